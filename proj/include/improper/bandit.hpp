#pragma once

#include <vector>

#include "improper/history.hpp"
#include "improper/mdp.hpp"
#include "improper/rng.hpp"

namespace improper {

// Single-state specialization: controllers are distributions over arms and
// the value is linear in the mixture.
class BanditInstance {
public:
    // arm_means in [0,1]; controllers row-stochastic (M x A); gamma in [0,1).
    BanditInstance(Vector arm_means, Matrix controllers, double gamma);

    int num_arms() const { return static_cast<int>(arm_means_.size()); }
    int num_controllers() const { return static_cast<int>(controllers_.rows()); }
    double gamma() const { return gamma_; }
    const Vector& arm_means() const { return arm_means_; }
    const Matrix& controllers() const { return controllers_; }

    // Mean one-round reward of committing to controller m.
    const Vector& controller_values() const { return controller_values_; }
    int best_controller() const { return best_controller_; }
    double gap(int m) const { return controller_values_[best_controller_] - controller_values_[m]; }
    double min_gap() const;

private:
    Vector arm_means_;
    Matrix controllers_;
    double gamma_;
    Vector controller_values_;
    int best_controller_;
};

// (1/(1-gamma)) sum_m pi(m) v_m.
double bandit_value(const BanditInstance& instance, const Vector& pi);

// Component m: (1/(1-gamma)) pi(m) (v_m - pi^T v).
Vector bandit_gradient(const BanditInstance& instance, const Vector& theta);

// Exact-gradient ascent with the bandit step size 2(1-gamma)/5 and uniform
// initialization; logs delta and the running regret.
PgHistory bandit_exact_pg(const BanditInstance& instance, int horizon);

// Bound V* - V_t <= 5 M^2 / ((1-gamma) t) from the exact-gradient analysis.
double bandit_suboptimality_bound(int num_controllers, double gamma, int round);

// min{5 M^2 log T / (1-gamma), sqrt(5/(1-gamma)) M sqrt(T)} for T >= 2.
double bandit_regret_envelope(int num_controllers, double gamma, int horizon);

// One run of the projection-free direct-parameterization update with
// Bernoulli arm rewards.
struct DirectPgHistory {
    std::vector<Vector> pi;
    std::vector<int> chosen_controller;
    std::vector<double> reward;
    std::vector<double> instant_regret;
    std::vector<double> cumulative_regret;

    int rounds() const { return static_cast<int>(pi.size()); }
};
DirectPgHistory projection_free_pg(const BanditInstance& instance, double alpha, int horizon,
                                   RngStream& rng);

// Cumulative per-round value suboptimality computed from the instance.
std::vector<double> regret_series(const std::vector<Vector>& pi_history,
                                  const BanditInstance& instance);

// Step-scale admissibility threshold gap_min / (v* - gap_min).
double alpha_threshold(const BanditInstance& instance);

// Expected one-step change of pi(leader) under the projection-free update
// with noise-free rewards; nonnegative whenever the leader is the best
// controller.
double expected_leader_drift(const BanditInstance& instance, const Vector& pi, double alpha);

// log T coefficient in the noisy-gradient regret bound:
// (1/(1-gamma)) sum_{m != m*} gap_m / (alpha gap_min^2).
double direct_pg_regret_constant(const BanditInstance& instance, double alpha);

}  // namespace improper
