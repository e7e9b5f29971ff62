#pragma once

#include <functional>
#include <optional>

#include "improper/history.hpp"
#include "improper/mdp.hpp"
#include "improper/rng.hpp"
#include "improper/sim_env.hpp"

namespace improper {

struct GradEstConfig {
    double alpha = 1.0 / std::sqrt(10.0);  // perturbation radius
    int num_runs = 10;
    int num_rollouts = 10;
    int rollout_horizon = 30;  // largest discount exponent in a rollout
    double gamma = 0.9;
    int validation_rollouts = 10;  // independent value estimate per round
};

// Uniform draw on the unit sphere in R^M (normalized Gaussian).
Vector sample_unit_sphere(int dims, RngStream& rng);

// One trajectory: at each step sample a controller from pi, apply it, and
// accumulate gamma^j r_j for j = 0..horizon, stopping early at terminals.
double rollout_return(const SimEnv& env, const Vector& pi, int horizon, double gamma,
                      RngStream& rng);

// One-point spherical-perturbation estimate of the value gradient at theta:
// average of mean-rollout-return(theta + alpha u) * u * (M / alpha).
Vector estimate_gradient(const SimEnv& env, const Vector& theta, const GradEstConfig& config,
                         RngStream& rng);

// Norm-targeted rescale used by the pendulum experiments: 10 g / ||g||.
Vector rescale_gradient(const Vector& g);

struct SpgeConfig {
    double learning_rate = 1e-4;
    int horizon = 100;  // learning rounds
    std::optional<Vector> initial_theta;
    bool rescale = false;
    std::optional<Vector> pi_star;  // enables the cbar log
    int log_stride = 1;  // store (and validate) every k-th round plus the last

    // Optional exact evaluator (tabular environments): returns
    // (V_rho, V_mu) of the current mixture so delta can be logged.
    std::function<std::pair<double, double>(const Vector& pi)> exact_value;
    std::optional<double> v_star;
};

// Gradient ascent on theta driven by estimate_gradient; rollouts restart
// from the environment's initial distribution each round.
PgHistory spge_run(SimEnv& env, const SpgeConfig& config, const GradEstConfig& gradest,
                   RngStream& rng);

}  // namespace improper
