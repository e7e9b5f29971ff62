#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "improper/environments.hpp"
#include "improper/exact_pg.hpp"
#include "improper/rng.hpp"

using namespace improper;

namespace {

FiniteMdp random_mdp(RngStream& rng, int S, int A, double gamma) {
    std::vector<Matrix> transition;
    for (int a = 0; a < A; ++a) {
        Matrix p(S, S);
        for (int s = 0; s < S; ++s) {
            Vector row(S);
            for (int i = 0; i < S; ++i) row[i] = -std::log(rng.uniform_pos()) + 0.05;
            row /= row.sum();
            row[S - 1] = 1.0 - row.head(S - 1).sum();
            p.row(s) = row.transpose();
        }
        transition.push_back(p);
    }
    Matrix reward(S, A);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) reward(s, a) = rng.uniform();
    }
    Vector rho(S);
    for (int s = 0; s < S; ++s) rho[s] = -std::log(rng.uniform_pos()) + 0.3;
    rho /= rho.sum();
    rho[S - 1] = 1.0 - rho.head(S - 1).sum();
    return FiniteMdp(transition, reward, gamma, rho);
}

ControllerSet random_controllers(RngStream& rng, int M, int S, int A) {
    std::vector<Matrix> ks;
    for (int m = 0; m < M; ++m) {
        Matrix k(S, A);
        for (int s = 0; s < S; ++s) {
            Vector row(A);
            for (int a = 0; a < A; ++a) row[a] = -std::log(rng.uniform_pos()) + 0.05;
            row /= row.sum();
            row[A - 1] = 1.0 - row.head(A - 1).sum();
            k.row(s) = row.transpose();
        }
        ks.push_back(k);
    }
    return ControllerSet(ks);
}

}  // namespace

TEST_CASE("learning rate formulas") {
    CHECK(default_learning_rate(0.0) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(default_learning_rate(0.9) ==
          doctest::Approx(0.01 / 14.27).epsilon(1e-12));
    CHECK(default_learning_rate(0.999) < 1e-5);
    CHECK_THROWS_AS(default_learning_rate(1.0), std::invalid_argument);
    CHECK_THROWS_AS(default_learning_rate(-0.1), std::invalid_argument);

    CHECK(smoothness_bound(0.9) ==
          doctest::Approx(14.27 / (2.0 * 0.001)).epsilon(1e-12));
    CHECK(safe_learning_rate(0.9) == doctest::Approx(2.0 * 0.001 / 14.27).epsilon(1e-12));
}

TEST_CASE("pg run is constant for identical controllers") {
    RngStream rng(3);
    FiniteMdp mdp = random_mdp(rng, 4, 3, 0.9);
    Matrix k(4, 3);
    for (int s = 0; s < 4; ++s) k.row(s) << 0.2, 0.5, 0.3;
    ControllerSet controllers({k, k});

    PgRunConfig config;
    config.horizon = 20;
    const PgHistory history = softmax_pg_run(mdp, controllers, config);
    for (int t = 0; t < history.rounds(); ++t) {
        CHECK((history.theta[t] - Vector::Ones(2)).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
}

TEST_CASE("pg run ascends monotonically at the safe step") {
    auto [mdp, controllers] = envs::make_nonconcavity_example(1.0);
    PgRunConfig config;
    config.horizon = 300;
    const PgHistory history = softmax_pg_run(mdp, controllers, config);
    for (int t = 1; t < history.rounds(); ++t) {
        CHECK(history.v_mu[t] >= history.v_mu[t - 1] - 1e-10);
    }
    // The run should move toward the strong controller.
    CHECK(history.pi.back()[1] > history.pi.front()[1]);
}

TEST_CASE("bandit reduction converges and respects the rate bound") {
    // Two single-action-per-controller arms with values (1, 0).
    const double gamma = 0.9;
    std::vector<Matrix> transition(2, Matrix::Ones(1, 1));
    Matrix reward(1, 2);
    reward << 1.0, 0.0;
    FiniteMdp mdp(transition, reward, gamma, Vector::Ones(1));
    Matrix k1(1, 2), k2(1, 2);
    k1 << 1.0, 0.0;
    k2 << 0.0, 1.0;
    ControllerSet controllers({k1, k2});

    PgRunConfig config;
    config.learning_rate = 2.0 * (1.0 - gamma) / 5.0;
    config.horizon = 3000;
    config.v_star = 1.0 / (1.0 - gamma);
    Vector star(2);
    star << 1.0, 0.0;
    config.pi_star = star;
    const PgHistory history = softmax_pg_run(mdp, controllers, config);

    CHECK(history.pi.back()[0] > 0.99);
    for (int t = 0; t < history.rounds(); ++t) {
        CHECK(history.delta[t] * (t + 1) <= 5.0 * 4.0 / (1.0 - gamma) + 1e-9);
    }
}

TEST_CASE("best in class finds the strong corner and the even chain mixture") {
    {
        auto [mdp, controllers] = envs::make_nonconcavity_example(1.0);
        const BestInClass best = best_in_class(mdp, controllers, mdp.rho());
        CHECK(best.pi_star[1] == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(best.v_star == doctest::Approx(9.0 / 16.0).epsilon(1e-9));
    }
    {
        auto [mdp, controllers] = envs::make_chain(0.9);
        const BestInClass best = best_in_class(mdp, controllers, mdp.rho());
        CHECK(best.pi_star[0] == doctest::Approx(0.5).epsilon(1e-2));
        CHECK(best.v_star == doctest::Approx(envs::chain_even_mixture_value(0.9)).epsilon(1e-6));
    }
    {
        // Single controller.
        std::vector<Matrix> transition(1, Matrix::Ones(1, 1));
        FiniteMdp mdp(transition, Matrix::Ones(1, 1), 0.9, Vector::Ones(1));
        ControllerSet controllers({Matrix::Ones(1, 1)});
        const BestInClass best = best_in_class(mdp, controllers, mdp.rho());
        CHECK(best.pi_star[0] == doctest::Approx(1.0));
        CHECK(best.v_star == doctest::Approx(10.0).epsilon(1e-10));
    }
    {
        // Oracle refuses large controller counts.
        RngStream rng(5);
        FiniteMdp mdp = random_mdp(rng, 2, 2, 0.8);
        ControllerSet controllers = random_controllers(rng, 7, 2, 2);
        CHECK_THROWS_AS(best_in_class(mdp, controllers, mdp.rho()), std::invalid_argument);
    }
}

TEST_CASE("smoothness witness stays nonpositive") {
    RngStream rng(7);
    // Identical points.
    {
        FiniteMdp mdp = random_mdp(rng, 4, 3, 0.85);
        ControllerSet controllers = random_controllers(rng, 3, 4, 3);
        Vector theta(3);
        theta << 0.1, -0.4, 0.8;
        CHECK(smoothness_witness(mdp, controllers, theta, theta) <= 0.0);
    }
    for (int i = 0; i < 40; ++i) {
        const int M = 2 + static_cast<int>(rng.uniform_index(3));
        FiniteMdp mdp = random_mdp(rng, 4, 3, rng.uniform(0.5, 0.95));
        ControllerSet controllers = random_controllers(rng, M, 4, 3);
        Vector theta(M), dir(M);
        for (int m = 0; m < M; ++m) {
            theta[m] = rng.normal();
            dir[m] = rng.normal();
        }
        dir *= rng.uniform() / std::max(dir.norm(), 1e-12);
        CHECK(smoothness_witness(mdp, controllers, theta, theta + dir) <= 1e-10);
    }
}

TEST_CASE("ascent check holds at the safe step") {
    RngStream rng(9);
    auto [mdp, controllers] = envs::make_nonconcavity_example(1.0);
    Vector ones = Vector::Ones(2);
    CHECK(ascent_check(mdp, controllers, ones, safe_learning_rate(mdp.gamma())));
    for (int i = 0; i < 25; ++i) {
        FiniteMdp random = random_mdp(rng, 4, 3, rng.uniform(0.5, 0.9));
        ControllerSet ks = random_controllers(rng, 3, 4, 3);
        Vector theta(3);
        for (int m = 0; m < 3; ++m) theta[m] = rng.normal();
        CHECK(ascent_check(random, ks, theta, safe_learning_rate(random.gamma())));
    }
    CHECK_THROWS_AS(ascent_check(mdp, controllers, ones, 1.0), std::invalid_argument);
}

TEST_CASE("gradient domination gap") {
    auto [mdp, controllers] = envs::make_nonconcavity_example(1.0);
    Vector star(2);
    star << 0.0, 1.0;

    Vector ones = Vector::Ones(2);
    const LojasiewiczGap at_uniform =
        lojasiewicz_gap(mdp, controllers, ones, mdp.mu(), mdp.rho(), star);
    CHECK(at_uniform.assumption_holds);
    CHECK(at_uniform.lhs >= at_uniform.rhs - 1e-10);

    // Near the optimum the right side collapses to zero.
    Vector near(2);
    near << -6.0, 6.0;
    const LojasiewiczGap at_opt =
        lojasiewicz_gap(mdp, controllers, near, mdp.mu(), mdp.rho(), star);
    CHECK(at_opt.rhs <= at_opt.lhs + 1e-10);
    CHECK(at_opt.rhs == doctest::Approx(0.0).epsilon(1e-4));
}

TEST_CASE("rate bound arithmetic") {
    // M (7g^2+4g+5) / (c^2 (1-g)^3 t) with both norms one.
    const double bound = suboptimality_bound(2, 0.9, 1000, 0.5, 1.0, 1.0);
    CHECK(bound == doctest::Approx(114.16).epsilon(1e-3));
    CHECK(suboptimality_bound(2, 0.9, 100000000, 0.5, 1.0, 1.0) < 0.002);
    CHECK_THROWS_AS(suboptimality_bound(2, 0.9, 1000, 0.0, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("running support infimum") {
    Vector star(2);
    star << 1.0, 0.0;
    std::vector<Vector> history;
    Vector a(2), b(2), c(2);
    a << 0.5, 0.5;
    b << 0.7, 0.3;
    c << 0.6, 0.4;
    history = {a, b, c};
    const SupportMassSeries series = running_support_infimum(history, star);
    CHECK(series.series[0] == doctest::Approx(0.5));
    CHECK(series.series[1] == doctest::Approx(0.5));
    CHECK(series.series[2] == doctest::Approx(0.5));
    CHECK(series.final_value == doctest::Approx(0.5));

    // Support on both coordinates tracks the minimum.
    Vector star2(2);
    star2 << 0.5, 0.5;
    const SupportMassSeries both = running_support_infimum(history, star2);
    CHECK(both.series[2] == doctest::Approx(0.3));

    Vector empty_support = Vector::Zero(2);
    CHECK_THROWS_AS(running_support_infimum(history, empty_support), std::invalid_argument);
    CHECK_THROWS_AS(running_support_infimum({}, star), std::invalid_argument);
}
