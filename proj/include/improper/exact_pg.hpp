#pragma once

#include <optional>
#include <utility>

#include "improper/history.hpp"
#include "improper/mdp.hpp"
#include "improper/rng.hpp"

namespace improper {

// Rate-analysis step size (1-g)^2 / (7g^2 + 4g + 5); see suboptimality_bound.
double default_learning_rate(double gamma);

// Smoothness constant of the mixture value: (7g^2 + 4g + 5) / (2(1-g)^3).
double smoothness_bound(double gamma);

// 1 / smoothness_bound; the step size that guarantees per-round ascent.
double safe_learning_rate(double gamma);

struct PgRunConfig {
    // Negative means "auto": use safe_learning_rate(gamma).
    double learning_rate = -1.0;
    int horizon = 1000;
    std::optional<Vector> initial_theta;  // default all-ones
    std::optional<Vector> mu;             // default mdp.mu()
    std::optional<Vector> rho;            // default mdp.rho()

    // When the in-class optimum is known, delta and cbar get logged.
    std::optional<double> v_star;
    std::optional<Vector> pi_star;

    std::uint64_t seed = 0;  // for the logged per-round controller draw
};

// Gradient ascent on theta with exact value gradients. The per-round
// controller draw is logged but has no effect on the update.
PgHistory softmax_pg_run(const FiniteMdp& mdp, const ControllerSet& controllers,
                         const PgRunConfig& config);

// Brute-force in-class optimum over the controller simplex: a uniform grid
// at `resolution` followed by pairwise mass-transfer refinement down to
// `refine_step`. Independent of the gradient path; M <= 6 only.
struct BestInClass {
    Vector pi_star;
    double v_star = 0.0;
};
BestInClass best_in_class(const FiniteMdp& mdp, const ControllerSet& controllers,
                          const Vector& measure, double resolution = 1.0 / 200.0,
                          double refine_step = 1e-4);

// |V(t') - V(t) - <grad V(t), t'-t>| - (beta/2)||t'-t||^2; nonpositive
// confirms beta-smoothness. beta defaults to smoothness_bound(gamma).
double smoothness_witness(const FiniteMdp& mdp, const ControllerSet& controllers,
                          const Vector& theta, const Vector& theta_prime,
                          std::optional<double> beta = std::nullopt);

// Both sides of the gradient-domination inequality at theta. When the
// nonnegative-drift assumption on the optimal mixture fails at some state,
// assumption_holds is false and the inequality is not claimed.
struct LojasiewiczGap {
    double lhs = 0.0;  // || grad V(mu) ||_2
    double rhs = 0.0;
    bool assumption_holds = false;
};
LojasiewiczGap lojasiewicz_gap(const FiniteMdp& mdp, const ControllerSet& controllers,
                               const Vector& theta, const Vector& mu,
                               const Vector& rho, const Vector& pi_star);

// True iff one gradient step of size eta improves V(mu) by at least
// ||grad||^2 / (2 beta) up to tolerance. Requires eta <= 1/beta.
bool ascent_check(const FiniteMdp& mdp, const ControllerSet& controllers,
                  const Vector& theta, double eta);

// Per-round upper bound on V*(rho) - V(rho) along the ascent trajectory,
// evaluated with a measured infimum mass c.
double suboptimality_bound(int num_controllers, double gamma, int round,
                           double c_measured, double visitation_ratio_norm,
                           double inv_mu_norm);

// Running infimum over rounds of the minimum mixture mass on the support of
// pi_star, plus its terminal value.
struct SupportMassSeries {
    std::vector<double> series;
    double final_value = 0.0;
};
SupportMassSeries running_support_infimum(const std::vector<Vector>& pi_history,
                                          const Vector& pi_star);

}  // namespace improper
