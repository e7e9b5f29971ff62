#include "improper/bandit.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace improper {

namespace {

void require(bool cond, const std::string& what) {
    if (!cond) throw std::invalid_argument(what);
}

}  // namespace

BanditInstance::BanditInstance(Vector arm_means, Matrix controllers, double gamma)
    : arm_means_(std::move(arm_means)), controllers_(std::move(controllers)), gamma_(gamma) {
    require(arm_means_.size() >= 1, "BanditInstance: no arms");
    require((arm_means_.array() >= 0.0).all() && (arm_means_.array() <= 1.0).all(),
            "BanditInstance: arm means must lie in [0,1]");
    require(gamma_ >= 0.0 && gamma_ < 1.0, "BanditInstance: gamma must lie in [0,1)");
    require(controllers_.cols() == arm_means_.size(),
            "BanditInstance: controller arm-dimension mismatch");
    require((controllers_.array() >= 0.0).all(), "BanditInstance: negative controller entry");
    for (int m = 0; m < controllers_.rows(); ++m) {
        require(std::abs(controllers_.row(m).sum() - 1.0) <= kStochasticTol,
                "BanditInstance: controller row " + std::to_string(m) + " does not sum to 1");
    }
    controller_values_ = controllers_ * arm_means_;
    controller_values_.maxCoeff(&best_controller_);
}

double BanditInstance::min_gap() const {
    double g = std::numeric_limits<double>::infinity();
    for (int m = 0; m < num_controllers(); ++m) {
        if (m == best_controller_) continue;
        g = std::min(g, gap(m));
    }
    return g;
}

double bandit_value(const BanditInstance& instance, const Vector& pi) {
    require(pi.size() == instance.num_controllers(), "bandit_value: mixture size mismatch");
    return pi.dot(instance.controller_values()) / (1.0 - instance.gamma());
}

Vector bandit_gradient(const BanditInstance& instance, const Vector& theta) {
    const Vector pi = softmax(theta);
    const Vector& v = instance.controller_values();
    const double mean = pi.dot(v);
    return (pi.array() * (v.array() - mean)).matrix() / (1.0 - instance.gamma());
}

PgHistory bandit_exact_pg(const BanditInstance& instance, int horizon) {
    require(horizon >= 1, "bandit_exact_pg: horizon must be positive");
    const int M = instance.num_controllers();
    const double eta = 2.0 * (1.0 - instance.gamma()) / 5.0;
    const double v_star = instance.controller_values()[instance.best_controller()] /
                          (1.0 - instance.gamma());

    Vector theta = Vector::Constant(M, 1.0 / M);
    PgHistory history;
    double cum_regret = 0.0;
    double running_inf = std::numeric_limits<double>::infinity();
    for (int t = 0; t < horizon; ++t) {
        const Vector pi = softmax(theta);
        const double value = bandit_value(instance, pi);
        const Vector grad = bandit_gradient(instance, theta);

        history.round_index.push_back(t + 1);
        history.theta.push_back(theta);
        history.pi.push_back(pi);
        history.v_rho.push_back(value);
        history.v_mu.push_back(value);
        history.grad_norm.push_back(grad.norm());
        history.delta.push_back(v_star - value);
        cum_regret += v_star - value;
        running_inf = std::min(running_inf, pi[instance.best_controller()]);
        history.cbar.push_back(running_inf);

        theta += eta * grad;
    }
    history.cbar_final = history.cbar.back();
    return history;
}

double bandit_suboptimality_bound(int num_controllers, double gamma, int round) {
    require(round >= 1, "bandit_suboptimality_bound: round must be >= 1");
    return 5.0 * num_controllers * num_controllers / ((1.0 - gamma) * round);
}

double bandit_regret_envelope(int num_controllers, double gamma, int horizon) {
    require(horizon >= 2, "bandit_regret_envelope: horizon must be >= 2");
    const double m = num_controllers;
    const double log_term = 5.0 * m * m * std::log(static_cast<double>(horizon)) / (1.0 - gamma);
    const double sqrt_term = std::sqrt(5.0 / (1.0 - gamma)) * m * std::sqrt(horizon);
    return std::min(log_term, sqrt_term);
}

DirectPgHistory projection_free_pg(const BanditInstance& instance, double alpha, int horizon,
                                   RngStream& rng) {
    require(alpha > 0.0 && alpha < 1.0, "projection_free_pg: alpha must lie in (0,1)");
    require(horizon >= 1, "projection_free_pg: horizon must be positive");
    const int M = instance.num_controllers();
    const double v_star = instance.controller_values()[instance.best_controller()];
    const double value_scale = 1.0 / (1.0 - instance.gamma());

    Vector pi = Vector::Constant(M, 1.0 / M);
    DirectPgHistory history;
    double cum_regret = 0.0;
    for (int t = 0; t < horizon; ++t) {
        int leader = 0;
        pi.maxCoeff(&leader);  // Eigen returns the lowest index on ties

        const int chosen = rng.categorical(pi);
        const int arm = rng.categorical(instance.controllers().row(chosen).transpose());
        const double reward = rng.bernoulli(instance.arm_means()[arm]) ? 1.0 : 0.0;

        const double instant = value_scale * (v_star - pi.dot(instance.controller_values()));
        cum_regret += instant;
        history.pi.push_back(pi);
        history.chosen_controller.push_back(chosen);
        history.reward.push_back(reward);
        history.instant_regret.push_back(instant);
        history.cumulative_regret.push_back(cum_regret);

        Vector next = pi;
        double taken = 0.0;
        for (int m = 0; m < M; ++m) {
            if (m == leader) continue;
            const double importance_own = (m == chosen) ? reward / pi[m] : 0.0;
            const double importance_leader = (leader == chosen) ? reward / pi[leader] : 0.0;
            const double step = alpha * pi[m] * pi[m] * (importance_own - importance_leader);
            next[m] = pi[m] + step;
            taken += next[m];
        }
        next[leader] = 1.0 - taken;
        if (!((next.array() >= 0.0).all()) || std::abs(next.sum() - 1.0) > 1e-12) {
            throw std::logic_error("projection_free_pg: update left the simplex at round " +
                                   std::to_string(t + 1));
        }
        pi = next;
    }
    return history;
}

std::vector<double> regret_series(const std::vector<Vector>& pi_history,
                                  const BanditInstance& instance) {
    if (pi_history.empty()) throw std::invalid_argument("regret_series: empty history");
    const double v_star = instance.controller_values()[instance.best_controller()] /
                          (1.0 - instance.gamma());
    std::vector<double> out;
    out.reserve(pi_history.size());
    double acc = 0.0;
    for (const Vector& pi : pi_history) {
        acc += v_star - bandit_value(instance, pi);
        out.push_back(acc);
    }
    return out;
}

double alpha_threshold(const BanditInstance& instance) {
    const double gap = instance.min_gap();
    if (!(gap > 0.0)) {
        throw std::invalid_argument("alpha_threshold: minimum gap must be positive");
    }
    const double v_best = instance.controller_values()[instance.best_controller()];
    return gap / (v_best - gap);
}

double expected_leader_drift(const BanditInstance& instance, const Vector& pi, double alpha) {
    int leader = 0;
    pi.maxCoeff(&leader);
    const Vector& v = instance.controller_values();
    double drift = 0.0;
    for (int m = 0; m < instance.num_controllers(); ++m) {
        if (m == leader) continue;
        // E[pi'(m)] - pi(m) = alpha pi(m)^2 (v_m - v_leader); the leader
        // absorbs the negated sum.
        drift -= alpha * pi[m] * pi[m] * (v[m] - v[leader]);
    }
    return drift;
}

double direct_pg_regret_constant(const BanditInstance& instance, double alpha) {
    const double gap_min = instance.min_gap();
    require(gap_min > 0.0 && alpha > 0.0, "direct_pg_regret_constant: bad inputs");
    double sum = 0.0;
    for (int m = 0; m < instance.num_controllers(); ++m) {
        if (m == instance.best_controller()) continue;
        sum += instance.gap(m);
    }
    return sum / (alpha * gap_min * gap_min * (1.0 - instance.gamma()));
}

}  // namespace improper
