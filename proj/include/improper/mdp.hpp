#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace improper {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kStochasticTol = 1e-12;

// Tabular MDP: transition kernel per action, reward table, discount,
// start distribution rho and optimization measure mu (defaults to rho).
class FiniteMdp {
public:
    // transition[a] is an S x S matrix with entry (s, s') = P(s'|s, a).
    // Rewards must lie in [0, 1] unless allow_unnormalized_reward is set.
    FiniteMdp(std::vector<Matrix> transition, Matrix reward, double gamma,
              Vector rho, std::optional<Vector> mu = std::nullopt,
              bool allow_unnormalized_reward = false);

    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }
    double gamma() const { return gamma_; }
    const std::vector<Matrix>& transition() const { return transition_; }
    const Matrix& reward() const { return reward_; }
    const Vector& rho() const { return rho_; }
    const Vector& mu() const { return mu_; }

private:
    std::vector<Matrix> transition_;
    Matrix reward_;  // S x A
    double gamma_;
    Vector rho_;
    Vector mu_;
    int num_states_;
    int num_actions_;
};

// The M base controllers; each one an S x A row-stochastic matrix.
class ControllerSet {
public:
    explicit ControllerSet(std::vector<Matrix> controllers);

    int size() const { return static_cast<int>(controllers_.size()); }
    int num_states() const { return static_cast<int>(controllers_[0].rows()); }
    int num_actions() const { return static_cast<int>(controllers_[0].cols()); }
    const Matrix& operator[](int m) const { return controllers_[m]; }
    const std::vector<Matrix>& all() const { return controllers_; }

private:
    std::vector<Matrix> controllers_;
};

// Mixture weights theta with the cached softmax distribution over controllers.
struct MixtureState {
    Vector theta;
    Vector pi;

    explicit MixtureState(Vector t);
};

// Everything exact evaluation of one mixture yields: the value vector, its
// scalar values under mu and rho, state-action and state-controller values,
// controller advantages, and the discounted visitation under mu.
struct PolicyEvaluation {
    Vector value;            // V(s)
    double value_mu = 0.0;   // mu^T V
    double value_rho = 0.0;  // rho^T V
    Matrix q;                // S x A
    Matrix q_controller;     // S x M, one-step commitment to controller m
    Matrix advantage;        // S x M, q_controller - V
    Vector visitation_mu;    // discounted state visitation under mu
    Matrix induced;          // S x A induced policy
    Vector pi;               // mixture over controllers
};

// Overflow-safe softmax; strictly positive, sums to one.
Vector softmax(const Vector& theta);

// Row (s, a) = sum_m pi(m) K_m(s, a).
Matrix induced_policy(const FiniteMdp& mdp, const ControllerSet& controllers,
                      const Vector& pi);

// Exact evaluation of the mixture softmax(theta) started from mu.
PolicyEvaluation evaluate_policy(const FiniteMdp& mdp,
                                 const ControllerSet& controllers,
                                 const Vector& theta, const Vector& mu);

// Same, but for a direct point on the controller simplex.
PolicyEvaluation evaluate_mixture(const FiniteMdp& mdp,
                                  const ControllerSet& controllers,
                                  const Vector& pi, const Vector& mu);

// Discounted state visitation measure of the mixture, normalized to sum 1.
Vector state_visitation(const FiniteMdp& mdp, const ControllerSet& controllers,
                        const Vector& theta, const Vector& mu);

// Exact value gradient with respect to theta (length M).
Vector value_gradient(const FiniteMdp& mdp, const ControllerSet& controllers,
                      const Vector& theta, const Vector& mu);
Vector value_gradient(const FiniteMdp& mdp, const ControllerSet& controllers,
                      const PolicyEvaluation& eval);

// The two independent expansions of V^{pi'}(s) - V^{pi}(s): one over the
// visitation of the new policy with the old policy's advantages, one over
// the visitation of the old policy with the new policy's controller values.
struct ValueDifferenceSides {
    double via_new_visitation = 0.0;
    double via_old_visitation = 0.0;
};
ValueDifferenceSides value_difference_sides(const FiniteMdp& mdp,
                                            const ControllerSet& controllers,
                                            const Vector& theta,
                                            const Vector& theta_prime,
                                            int anchor_state);

// Load an MDP plus controller set from a JSON file with fields num_states,
// num_actions, gamma, transition (S x A x S), reward (S x A), rho, mu
// (optional) and controllers (M x S x A).
std::pair<FiniteMdp, ControllerSet> load_mdp_json(const std::string& path);

}  // namespace improper
