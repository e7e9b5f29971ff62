#include "improper/exact_pg.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace improper {

namespace {

void require(bool cond, const std::string& what) {
    if (!cond) throw std::invalid_argument(what);
}

constexpr double kSupportTol = 1e-9;

}  // namespace

double default_learning_rate(double gamma) {
    require(gamma >= 0.0 && gamma < 1.0, "default_learning_rate: gamma must lie in [0,1)");
    return (1.0 - gamma) * (1.0 - gamma) / (7.0 * gamma * gamma + 4.0 * gamma + 5.0);
}

double smoothness_bound(double gamma) {
    require(gamma >= 0.0 && gamma < 1.0, "smoothness_bound: gamma must lie in [0,1)");
    const double one_minus = 1.0 - gamma;
    return (7.0 * gamma * gamma + 4.0 * gamma + 5.0) / (2.0 * one_minus * one_minus * one_minus);
}

double safe_learning_rate(double gamma) { return 1.0 / smoothness_bound(gamma); }

PgHistory softmax_pg_run(const FiniteMdp& mdp, const ControllerSet& controllers,
                         const PgRunConfig& config) {
    require(config.horizon >= 1, "softmax_pg_run: horizon must be positive");
    const int M = controllers.size();
    const double eta =
        config.learning_rate > 0.0 ? config.learning_rate : safe_learning_rate(mdp.gamma());
    const Vector mu = config.mu.value_or(mdp.mu());
    const Vector rho = config.rho.value_or(mdp.rho());
    Vector theta = config.initial_theta.value_or(Vector::Ones(M));
    require(theta.size() == M, "softmax_pg_run: initial theta size mismatch");

    RngStream rng(config.seed);
    PgHistory history;
    history.theta.reserve(static_cast<std::size_t>(config.horizon));

    double running_inf = std::numeric_limits<double>::infinity();
    for (int t = 0; t < config.horizon; ++t) {
        PolicyEvaluation eval = evaluate_policy(mdp, controllers, theta, mu);
        Vector grad = value_gradient(mdp, controllers, eval);
        if (!grad.allFinite()) {
            throw std::runtime_error("softmax_pg_run: non-finite gradient at round " +
                                     std::to_string(t + 1));
        }

        history.round_index.push_back(t + 1);
        history.theta.push_back(theta);
        history.pi.push_back(eval.pi);
        history.v_mu.push_back(eval.value_mu);
        history.v_rho.push_back(rho.dot(eval.value));
        history.grad_norm.push_back(grad.norm());
        history.sampled_controller.push_back(rng.categorical(eval.pi));
        if (config.v_star.has_value()) {
            history.delta.push_back(*config.v_star - history.v_rho.back());
        } else {
            history.delta.push_back(std::numeric_limits<double>::quiet_NaN());
        }
        if (config.pi_star.has_value()) {
            double min_mass = std::numeric_limits<double>::infinity();
            for (int m = 0; m < M; ++m) {
                if ((*config.pi_star)[m] > kSupportTol) min_mass = std::min(min_mass, eval.pi[m]);
            }
            running_inf = std::min(running_inf, min_mass);
            history.cbar.push_back(running_inf);
        } else {
            history.cbar.push_back(std::numeric_limits<double>::quiet_NaN());
        }

        theta += eta * grad;
    }
    history.cbar_final = history.cbar.back();
    return history;
}

BestInClass best_in_class(const FiniteMdp& mdp, const ControllerSet& controllers,
                          const Vector& measure, double resolution, double refine_step) {
    const int M = controllers.size();
    if (M > 6) {
        throw std::invalid_argument(
            "best_in_class: grid oracle supports at most 6 controllers; supply the optimum "
            "externally");
    }
    require(resolution > 0.0 && resolution <= 1.0, "best_in_class: bad resolution");

    const auto value_of = [&](const Vector& pi) {
        return measure.dot(evaluate_mixture(mdp, controllers, pi, mdp.mu()).value);
    };

    const int units = std::max(1, static_cast<int>(std::lround(1.0 / resolution)));
    Vector best_pi = Vector::Zero(M);
    best_pi[0] = 1.0;
    double best_value = -std::numeric_limits<double>::infinity();

    // Recursive composition enumeration of the grid.
    std::vector<int> counts(static_cast<std::size_t>(M), 0);
    auto visit = [&](auto&& self, int index, int remaining) -> void {
        if (index == M - 1) {
            counts[static_cast<std::size_t>(index)] = remaining;
            Vector pi(M);
            for (int i = 0; i < M; ++i) {
                pi[i] = static_cast<double>(counts[static_cast<std::size_t>(i)]) / units;
            }
            const double v = value_of(pi);
            if (v > best_value) {
                best_value = v;
                best_pi = pi;
            }
            return;
        }
        for (int k = 0; k <= remaining; ++k) {
            counts[static_cast<std::size_t>(index)] = k;
            self(self, index + 1, remaining - k);
        }
    };
    visit(visit, 0, units);

    // Pairwise mass-transfer hill climbing down to refine_step.
    for (double step = resolution / 2.0; step >= refine_step; step /= 2.0) {
        bool improved = true;
        while (improved) {
            improved = false;
            for (int i = 0; i < M; ++i) {
                if (best_pi[i] <= 0.0) continue;
                for (int j = 0; j < M; ++j) {
                    if (j == i) continue;
                    const double delta = std::min(step, best_pi[i]);
                    Vector cand = best_pi;
                    cand[i] -= delta;
                    cand[j] += delta;
                    const double v = value_of(cand);
                    if (v > best_value + 1e-15) {
                        best_value = v;
                        best_pi = cand;
                        improved = true;
                    }
                }
            }
        }
    }
    return {best_pi, best_value};
}

double smoothness_witness(const FiniteMdp& mdp, const ControllerSet& controllers,
                          const Vector& theta, const Vector& theta_prime,
                          std::optional<double> beta) {
    const Vector mu = mdp.mu();
    const double beta_val = beta.value_or(smoothness_bound(mdp.gamma()));
    const double v = evaluate_policy(mdp, controllers, theta, mu).value_mu;
    const double v_prime = evaluate_policy(mdp, controllers, theta_prime, mu).value_mu;
    const Vector grad = value_gradient(mdp, controllers, theta, mu);
    const Vector diff = theta_prime - theta;
    return std::abs(v_prime - v - grad.dot(diff)) - 0.5 * beta_val * diff.squaredNorm();
}

LojasiewiczGap lojasiewicz_gap(const FiniteMdp& mdp, const ControllerSet& controllers,
                               const Vector& theta, const Vector& mu, const Vector& rho,
                               const Vector& pi_star) {
    const int M = controllers.size();
    require(pi_star.size() == M, "lojasiewicz_gap: pi_star size mismatch");

    const PolicyEvaluation eval = evaluate_policy(mdp, controllers, theta, mu);
    LojasiewiczGap out;
    out.lhs = value_gradient(mdp, controllers, eval).norm();

    // Drift of the optimal mixture under the current policy's controller
    // values must be nonnegative at every state for the bound to apply.
    const Vector drift = eval.advantage * pi_star;
    out.assumption_holds = (drift.array() >= -1e-12).all();

    double min_mass = std::numeric_limits<double>::infinity();
    for (int m = 0; m < M; ++m) {
        if (pi_star[m] > kSupportTol) min_mass = std::min(min_mass, eval.pi[m]);
    }

    const PolicyEvaluation star_eval = evaluate_mixture(mdp, controllers, pi_star, mu);
    double ratio_norm = 0.0;
    for (int s = 0; s < mdp.num_states(); ++s) {
        const double num = star_eval.visitation_mu[s];
        const double den = eval.visitation_mu[s];
        if (num <= 0.0) continue;
        if (den <= 0.0) {
            ratio_norm = std::numeric_limits<double>::infinity();
            break;
        }
        ratio_norm = std::max(ratio_norm, num / den);
    }
    const double star_rho = rho.dot(star_eval.value);
    const double cur_rho = rho.dot(eval.value);

    out.rhs = (1.0 / std::sqrt(static_cast<double>(M))) * min_mass * (1.0 / ratio_norm) *
              (star_rho - cur_rho);
    return out;
}

bool ascent_check(const FiniteMdp& mdp, const ControllerSet& controllers, const Vector& theta,
                  double eta) {
    const double beta = smoothness_bound(mdp.gamma());
    require(eta > 0.0 && eta <= 1.0 / beta + 1e-15, "ascent_check: eta must satisfy eta <= 1/beta");
    const Vector mu = mdp.mu();
    const PolicyEvaluation eval = evaluate_policy(mdp, controllers, theta, mu);
    const Vector grad = value_gradient(mdp, controllers, eval);
    const double v_next = evaluate_policy(mdp, controllers, theta + eta * grad, mu).value_mu;
    return v_next - eval.value_mu >= grad.squaredNorm() / (2.0 * beta) - 1e-10;
}

double suboptimality_bound(int num_controllers, double gamma, int round, double c_measured,
                           double visitation_ratio_norm, double inv_mu_norm) {
    require(c_measured > 0.0, "suboptimality_bound: measured c must be positive");
    require(round >= 1, "suboptimality_bound: round must be >= 1");
    const double one_minus = 1.0 - gamma;
    const double numer = 7.0 * gamma * gamma + 4.0 * gamma + 5.0;
    return (1.0 / round) * num_controllers * numer /
           (c_measured * c_measured * one_minus * one_minus * one_minus) *
           visitation_ratio_norm * visitation_ratio_norm * inv_mu_norm;
}

SupportMassSeries running_support_infimum(const std::vector<Vector>& pi_history,
                                          const Vector& pi_star) {
    require(!pi_history.empty(), "running_support_infimum: empty history");
    bool any_support = (pi_star.array() > kSupportTol).any();
    require(any_support, "running_support_infimum: pi_star has empty support");

    SupportMassSeries out;
    out.series.reserve(pi_history.size());
    double running = std::numeric_limits<double>::infinity();
    for (const Vector& pi : pi_history) {
        double min_mass = std::numeric_limits<double>::infinity();
        for (int m = 0; m < pi_star.size(); ++m) {
            if (pi_star[m] > kSupportTol) min_mass = std::min(min_mass, pi[m]);
        }
        running = std::min(running, min_mass);
        out.series.push_back(running);
    }
    out.final_value = running;
    return out;
}

}  // namespace improper
