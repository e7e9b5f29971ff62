#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "improper/mdp.hpp"
#include "improper/rng.hpp"
#include "improper/sim_env.hpp"

namespace improper::envs {

// ---------------------------------------------------------------------------
// Tabular wrapper: rollout interface over a FiniteMdp plus controller set.
// State is a 1-vector holding the state index.
// ---------------------------------------------------------------------------
class TabularEnv : public SimEnv {
public:
    TabularEnv(FiniteMdp mdp, ControllerSet controllers,
               std::vector<bool> terminal = {});

    int num_controllers() const override { return controllers_.size(); }
    EnvState reset(RngStream& rng) const override;
    bool is_terminal(const EnvState& state) const override;
    double advance(EnvState& state, int controller, RngStream& rng) const override;

    const FiniteMdp& mdp() const { return mdp_; }
    const ControllerSet& controllers() const { return controllers_; }

private:
    FiniteMdp mdp_;
    ControllerSet controllers_;
    std::vector<bool> terminal_;
};

// ---------------------------------------------------------------------------
// Five-state counterexample with a non-concave mixture value. The single
// nonzero reward sits on the second hop and is scaled by 1/gamma so the
// start-state values come out as exact fractions of r.
// ---------------------------------------------------------------------------
std::pair<FiniteMdp, ControllerSet> make_nonconcavity_example(double r, double gamma = 0.9);

// Midpoint-concavity violation at theta = (log(1-eps), log(eps)) and its
// mirror, checked through evaluate_policy. True for every eps in (0, 0.5).
bool softmax_nonconcavity_check(double r, double epsilon, double gamma = 0.9);

// ---------------------------------------------------------------------------
// Ten-state chain: advance/retreat actions, absorbing final state, reward 1
// on the last advance. Controller 1 advances with probability 0.1 at state 5,
// controller 2 at state 6, both advance surely elsewhere.
// ---------------------------------------------------------------------------
std::pair<FiniteMdp, ControllerSet> make_chain(double gamma);

// Closed forms under this construction: single controller and the even
// mixture, value at the start state.
double chain_single_controller_value(double gamma);
double chain_even_mixture_value(double gamma);

// The formulas printed in the original derivation of this example; reported
// alongside the simulated values, not used as an oracle.
double chain_printed_single_value(double gamma);
double chain_printed_mixture_value(double gamma);

// Truncated forward expansion of the discounted value from one state:
// branches are dropped once their probability-times-discount weight falls
// below the cutoff. Independent of the linear-solve evaluation.
double truncated_expansion_value(const FiniteMdp& mdp, const ControllerSet& controllers,
                                 const Vector& pi, int start_state, double cutoff = 1e-12);

// ---------------------------------------------------------------------------
// Queueing
// ---------------------------------------------------------------------------

// Q' = min(cap, (Q - D)^+ + A); decision and arrivals must be 0/1 vectors.
Vector queue_step(const Vector& lengths, const Vector& decision, const Vector& arrivals,
                  int cap);

enum class QueueReward {
    NegativeBacklog,  // minus the post-service backlog (what the learner optimizes)
    Shaped,           // 1 - backlog / (N * cap), bounded in [0,1]
};

struct QueueController {
    enum class Kind { ServeQueue, Stationary, LongestQueueFirst } kind = Kind::ServeQueue;
    int queue = 0;          // ServeQueue
    Vector service_probs;   // Stationary: probability of serving each queue

    static QueueController serve(int queue);
    static QueueController stationary(Vector probs);
    static QueueController longest_queue_first();
};

struct TwoQueueConfig {
    std::vector<Eigen::Vector2d> arrival_schedule = {{0.49, 0.49}};
    int rounds_per_phase = 0;  // 0 = stationary
    int cap = 500;
    QueueReward reward = QueueReward::NegativeBacklog;
};

// Single server, two queues, at most one packet drained per slot.
class TwoQueueEnv : public SimEnv {
public:
    TwoQueueEnv(TwoQueueConfig config, std::vector<QueueController> controllers);

    int num_controllers() const override { return static_cast<int>(controllers_.size()); }
    EnvState reset(RngStream& rng) const override;
    double advance(EnvState& state, int controller, RngStream& rng) const override;
    void set_round(int round) override;

    Eigen::Vector2d current_arrivals() const { return arrivals_; }

private:
    TwoQueueConfig config_;
    std::vector<QueueController> controllers_;
    Eigen::Vector2d arrivals_;
};

// Discounted backlog bound for the controller that always serves the other
// queue: lambda * gamma / (1-gamma)^2.
double expert_backlog_bound(double lambda_unserved, double gamma);

// ---------------------------------------------------------------------------
// Path-graph interference network: actions are independent sets of the path
// conflict graph.
// ---------------------------------------------------------------------------
std::vector<std::vector<int>> path_graph_independent_sets(int num_queues);

struct PathController {
    enum class Kind { MaxWeight, MaxEgress, FixedSet } kind = Kind::MaxWeight;
    std::vector<int> fixed_set;  // FixedSet

    static PathController max_weight();
    static PathController max_egress();
    static PathController fixed(std::vector<int> set);
};

struct PathGraphConfig {
    int num_queues = 4;
    Vector arrivals;      // default 0.495 each
    int cap = 500;
    int start_max = 0;    // initial lengths iid Uniform{0..start_max}
    QueueReward reward = QueueReward::NegativeBacklog;
};

class PathGraphEnv : public SimEnv {
public:
    PathGraphEnv(PathGraphConfig config, std::vector<PathController> controllers);

    int num_controllers() const override { return static_cast<int>(controllers_.size()); }
    EnvState reset(RngStream& rng) const override;
    double advance(EnvState& state, int controller, RngStream& rng) const override;

    // Independent set selected by controller m in the given state.
    const std::vector<int>& decision(const EnvState& state, int controller) const;
    const std::vector<std::vector<int>>& independent_sets() const { return sets_; }

    // Packet-level FIFO simulation of one fixed controller. Packets still in
    // queue at the horizon are stamped with departure = horizon.
    struct Packet {
        int id = 0;
        int queue = 0;
        double arrival = 0.0;
        double departure = 0.0;
    };
    std::vector<Packet> simulate_packet_trace(int controller, int horizon,
                                              RngStream& rng) const;

private:
    PathGraphConfig config_;
    std::vector<PathController> controllers_;
    std::vector<std::vector<int>> sets_;
};

// Average of departure minus arrival over the trace.
double mean_delay(const std::vector<PathGraphEnv::Packet>& trace);

// ---------------------------------------------------------------------------
// Linearized pendulum on a cart, discrete Riccati gain, random switching.
// ---------------------------------------------------------------------------
struct PendulumParams {
    double gravity = 9.8;
    double pole_mass = 0.1;
    double pole_length = 1.0;
    double cart_mass = 1.0;
};

struct LinearSystem {
    Matrix a_continuous;  // 4x4
    Vector b_continuous;  // 4
    Matrix a_discrete;    // I + dt * A
    Vector b_discrete;    // dt * b
    double dt = 0.0;
};

LinearSystem make_pendulum(const PendulumParams& params, double dt);

struct DareResult {
    Matrix p;
    Vector gain;  // u = -gain^T x
};
DareResult solve_dare(const Matrix& a, const Vector& b, const Matrix& q_cost, double r_cost);

Matrix closed_loop(const Matrix& a, const Vector& b, const Vector& gain);
double spectral_radius(const Matrix& a);
double spectral_norm(const Matrix& a);

// (1/T) log(||x_T|| / ||x_0||) with per-step renormalization.
double switched_lyapunov_estimate(const std::vector<Matrix>& systems, const Vector& p,
                                  const Vector& x0, int steps, RngStream& rng);

// Upper bound sum_i p_i log ||A_i||_2 on the exponent.
double switched_norm_bound(const std::vector<Matrix>& systems, const Vector& p);

// ---------------------------------------------------------------------------
// Cartpole balance task on the discretized linear model with additive state
// noise; unit reward per step while upright.
// ---------------------------------------------------------------------------
struct CartpoleConfig {
    double dt = 0.02;
    double noise_std = 0.01;
    double angle_limit = 12.0 * 3.14159265358979323846 / 180.0;
    double position_limit = 2.4;
    double start_range = 0.05;  // initial coordinates iid Uniform(-range, range)
    int episode_length = 500;
};

class CartpoleEnv : public SimEnv {
public:
    CartpoleEnv(CartpoleConfig config, LinearSystem system, std::vector<Vector> gains);

    int num_controllers() const override { return static_cast<int>(gains_.size()); }
    EnvState reset(RngStream& rng) const override;
    bool is_terminal(const EnvState& state) const override;
    double advance(EnvState& state, int controller, RngStream& rng) const override;

    const CartpoleConfig& config() const { return config_; }
    const LinearSystem& system() const { return system_; }
    const std::vector<Vector>& gains() const { return gains_; }

    // Steps survived under the mixture pi, capped at episode_length.
    int uptime(const Vector& pi, RngStream& rng) const;

private:
    CartpoleConfig config_;
    LinearSystem system_;
    std::vector<Vector> gains_;
};

}  // namespace improper::envs
