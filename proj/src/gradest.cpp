#include "improper/gradest.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace improper {

Vector sample_unit_sphere(int dims, RngStream& rng) {
    if (dims < 1) throw std::invalid_argument("sample_unit_sphere: dims must be positive");
    Vector u(dims);
    double norm = 0.0;
    do {
        for (int i = 0; i < dims; ++i) u[i] = rng.normal();
        norm = u.norm();
    } while (norm == 0.0);
    return u / norm;
}

double rollout_return(const SimEnv& env, const Vector& pi, int horizon, double gamma,
                      RngStream& rng) {
    if (horizon < 1) throw std::invalid_argument("rollout_return: horizon must be positive");
    EnvState state = env.reset(rng);
    double total = 0.0;
    double discount = 1.0;
    for (int j = 0; j <= horizon; ++j) {
        if (env.is_terminal(state)) break;
        const int m = rng.categorical(pi);
        const double reward = env.advance(state, m, rng);
        if (!std::isfinite(reward)) {
            throw std::runtime_error("rollout_return: non-finite reward at step " +
                                     std::to_string(j));
        }
        total += discount * reward;
        discount *= gamma;
    }
    return total;
}

Vector estimate_gradient(const SimEnv& env, const Vector& theta, const GradEstConfig& config,
                         RngStream& rng) {
    if (config.alpha <= 0.0 || config.alpha >= 1.0) {
        throw std::invalid_argument("estimate_gradient: alpha must lie in (0,1)");
    }
    if (config.num_runs < 1 || config.num_rollouts < 1) {
        throw std::invalid_argument("estimate_gradient: budgets must be positive");
    }
    const int M = static_cast<int>(theta.size());
    Vector grad = Vector::Zero(M);
    for (int i = 0; i < config.num_runs; ++i) {
        RngStream run_rng = rng.child(static_cast<std::uint64_t>(i));
        RngStream sphere_rng = run_rng.child(0);
        const Vector u = sample_unit_sphere(M, sphere_rng);
        const Vector pi_perturbed = softmax(theta + config.alpha * u);

        double mean_return = 0.0;
        for (int l = 0; l < config.num_rollouts; ++l) {
            RngStream rollout_rng = run_rng.child(static_cast<std::uint64_t>(1 + l));
            mean_return += rollout_return(env, pi_perturbed, config.rollout_horizon,
                                          config.gamma, rollout_rng);
        }
        mean_return /= config.num_rollouts;
        grad += mean_return * u;
    }
    return grad * (static_cast<double>(M) / (config.alpha * config.num_runs));
}

Vector rescale_gradient(const Vector& g) {
    if (!g.allFinite()) throw std::invalid_argument("rescale_gradient: non-finite input");
    const double norm = g.norm();
    if (norm == 0.0) return g;
    return (10.0 / norm) * g;
}

PgHistory spge_run(SimEnv& env, const SpgeConfig& config, const GradEstConfig& gradest,
                   RngStream& rng) {
    if (config.horizon < 1) throw std::invalid_argument("spge_run: horizon must be positive");
    const int M = env.num_controllers();
    Vector theta = config.initial_theta.value_or(Vector::Ones(M));
    if (theta.size() != M) throw std::invalid_argument("spge_run: initial theta size mismatch");

    if (config.log_stride < 1) throw std::invalid_argument("spge_run: bad log stride");

    PgHistory history;
    double running_inf = std::numeric_limits<double>::infinity();
    for (int t = 0; t < config.horizon; ++t) {
        env.set_round(t);
        RngStream round_rng = rng.child(static_cast<std::uint64_t>(t));
        const Vector pi = softmax(theta);

        RngStream grad_rng = round_rng.child(0);
        Vector grad = estimate_gradient(env, theta, gradest, grad_rng);
        if (config.rescale) grad = rescale_gradient(grad);

        if (config.pi_star.has_value()) {
            double min_mass = std::numeric_limits<double>::infinity();
            for (int m = 0; m < M; ++m) {
                if ((*config.pi_star)[m] > 1e-9) min_mass = std::min(min_mass, pi[m]);
            }
            running_inf = std::min(running_inf, min_mass);
        }

        if (t % config.log_stride == 0 || t == config.horizon - 1) {
            double value_estimate = 0.0;
            if (gradest.validation_rollouts > 0) {
                RngStream validation_rng = round_rng.child(1);
                for (int l = 0; l < gradest.validation_rollouts; ++l) {
                    RngStream rollout_rng = validation_rng.child(static_cast<std::uint64_t>(l));
                    value_estimate += rollout_return(env, pi, gradest.rollout_horizon,
                                                     gradest.gamma, rollout_rng);
                }
                value_estimate /= gradest.validation_rollouts;
            }

            history.round_index.push_back(t + 1);
            history.theta.push_back(theta);
            history.pi.push_back(pi);
            history.value_estimate.push_back(value_estimate);
            history.grad_norm_estimate.push_back(grad.norm());
            history.grad_norm.push_back(grad.norm());
            RngStream sample_rng = round_rng.child(2);
            history.sampled_controller.push_back(sample_rng.categorical(pi));
            if (config.exact_value) {
                const auto [v_rho, v_mu] = config.exact_value(pi);
                history.v_rho.push_back(v_rho);
                history.v_mu.push_back(v_mu);
                history.delta.push_back(config.v_star ? *config.v_star - v_rho
                                                      : std::numeric_limits<double>::quiet_NaN());
            } else {
                history.v_rho.push_back(std::numeric_limits<double>::quiet_NaN());
                history.v_mu.push_back(std::numeric_limits<double>::quiet_NaN());
                history.delta.push_back(std::numeric_limits<double>::quiet_NaN());
            }
            history.cbar.push_back(config.pi_star.has_value()
                                       ? running_inf
                                       : std::numeric_limits<double>::quiet_NaN());
        }

        theta += config.learning_rate * grad;
        if (!theta.allFinite()) {
            throw std::runtime_error("spge_run: parameters diverged at round " +
                                     std::to_string(t + 1));
        }
    }
    history.cbar_final = history.cbar.back();
    return history;
}

}  // namespace improper
