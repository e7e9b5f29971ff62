#include "improper/environments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace improper::envs {

namespace {

void require(bool cond, const std::string& what) {
    if (!cond) throw std::invalid_argument(what);
}

Vector point_mass(int size, int index) {
    Vector v = Vector::Zero(size);
    v[index] = 1.0;
    return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// TabularEnv
// ---------------------------------------------------------------------------

TabularEnv::TabularEnv(FiniteMdp mdp, ControllerSet controllers, std::vector<bool> terminal)
    : mdp_(std::move(mdp)), controllers_(std::move(controllers)), terminal_(std::move(terminal)) {
    require(controllers_.num_states() == mdp_.num_states() &&
                controllers_.num_actions() == mdp_.num_actions(),
            "TabularEnv: controller dimensions do not match the MDP");
    if (terminal_.empty()) terminal_.assign(static_cast<std::size_t>(mdp_.num_states()), false);
    require(static_cast<int>(terminal_.size()) == mdp_.num_states(),
            "TabularEnv: terminal flag size mismatch");
}

EnvState TabularEnv::reset(RngStream& rng) const {
    EnvState s(1);
    s[0] = static_cast<double>(rng.categorical(mdp_.mu()));
    return s;
}

bool TabularEnv::is_terminal(const EnvState& state) const {
    return terminal_[static_cast<std::size_t>(std::lround(state[0]))];
}

double TabularEnv::advance(EnvState& state, int controller, RngStream& rng) const {
    const int s = static_cast<int>(std::lround(state[0]));
    const int a = rng.categorical(controllers_[controller].row(s).transpose());
    const int next = rng.categorical(mdp_.transition()[a].row(s).transpose());
    state[0] = static_cast<double>(next);
    return mdp_.reward()(s, a);
}

// ---------------------------------------------------------------------------
// Non-concavity example
// ---------------------------------------------------------------------------

std::pair<FiniteMdp, ControllerSet> make_nonconcavity_example(double r, double gamma) {
    require(r > 0.0, "make_nonconcavity_example: r must be positive");
    require(gamma > 0.0 && gamma < 1.0, "make_nonconcavity_example: gamma must lie in (0,1)");
    constexpr int S = 5;  // 0: start, 1: middle, 2..4: absorbing
    constexpr int kRight = 0, kUp = 1;
    constexpr int A = 3;

    std::vector<Matrix> transition(A, Matrix::Zero(S, S));
    // Unused actions self-loop so every row stays stochastic.
    for (int a = 0; a < A; ++a) {
        for (int s = 0; s < S; ++s) transition[a](s, s) = 1.0;
    }
    transition[kRight](0, 0) = 0.0;
    transition[kRight](0, 1) = 1.0;  // start -> middle
    transition[kUp](0, 0) = 0.0;
    transition[kUp](0, 2) = 1.0;  // start -> sink
    transition[kRight](1, 1) = 0.0;
    transition[kRight](1, 4) = 1.0;  // middle -> sink
    transition[kUp](1, 1) = 0.0;
    transition[kUp](1, 3) = 1.0;  // middle -> rewarded sink

    Matrix reward = Matrix::Zero(S, A);
    // The hop is taken one step in, so dividing by gamma makes V(start)
    // exactly pi(right|start) * pi(up|middle) * r.
    reward(1, kUp) = r / gamma;

    Matrix k1 = Matrix::Zero(S, A);
    Matrix k2 = Matrix::Zero(S, A);
    k1.row(0) << 0.25, 0.75, 0.0;
    k1.row(1) << 0.75, 0.25, 0.0;
    k2.row(0) << 0.75, 0.25, 0.0;
    k2.row(1) << 0.25, 0.75, 0.0;
    for (int s = 2; s < S; ++s) {
        k1.row(s) << 0.0, 0.0, 1.0;
        k2.row(s) << 0.0, 0.0, 1.0;
    }

    FiniteMdp mdp(std::move(transition), std::move(reward), gamma, point_mass(S, 0),
                  std::nullopt, /*allow_unnormalized_reward=*/r / gamma > 1.0);
    return {std::move(mdp), ControllerSet({k1, k2})};
}

bool softmax_nonconcavity_check(double r, double epsilon, double gamma) {
    require(epsilon > 0.0 && epsilon <= 0.5, "softmax_nonconcavity_check: epsilon in (0, 0.5]");
    auto [mdp, controllers] = make_nonconcavity_example(r, gamma);
    Vector theta1(2), theta2(2);
    theta1 << std::log(1.0 - epsilon), std::log(epsilon);
    theta2 << std::log(epsilon), std::log(1.0 - epsilon);
    const Vector mid = 0.5 * (theta1 + theta2);

    const double v1 = evaluate_policy(mdp, controllers, theta1, mdp.mu()).value_rho;
    const double v2 = evaluate_policy(mdp, controllers, theta2, mdp.mu()).value_rho;
    const double vm = evaluate_policy(mdp, controllers, mid, mdp.mu()).value_rho;
    return v1 + v2 > 2.0 * vm;
}

// ---------------------------------------------------------------------------
// Chain
// ---------------------------------------------------------------------------

std::pair<FiniteMdp, ControllerSet> make_chain(double gamma) {
    require(gamma > 0.0 && gamma < 1.0, "make_chain: gamma must lie in (0,1)");
    constexpr int S = 10;
    constexpr int kAdvance = 0, kRetreat = 1;

    std::vector<Matrix> transition(2, Matrix::Zero(S, S));
    for (int s = 0; s < S - 1; ++s) {
        transition[kAdvance](s, s + 1) = 1.0;
        transition[kRetreat](s, std::max(s - 1, 0)) = 1.0;
    }
    transition[kAdvance](S - 1, S - 1) = 1.0;  // absorbing
    transition[kRetreat](S - 1, S - 1) = 1.0;

    Matrix reward = Matrix::Zero(S, 2);
    reward(S - 2, kAdvance) = 1.0;

    Matrix k1(S, 2), k2(S, 2);
    for (int s = 0; s < S; ++s) {
        k1.row(s) << 1.0, 0.0;
        k2.row(s) << 1.0, 0.0;
    }
    k1.row(4) << 0.1, 0.9;  // controller 1 stalls at the fifth state
    k2.row(5) << 0.1, 0.9;  // controller 2 at the sixth

    FiniteMdp mdp(std::move(transition), std::move(reward), gamma, point_mass(S, 0));
    return {std::move(mdp), ControllerSet({k1, k2})};
}

namespace {
// The two stall states form a short random walk; the value at the start is
// p q gamma^8 / (1 - (1 - p q) gamma^2) where p, q are the advance
// probabilities at the stall states.
double chain_value_from_advance_probs(double p, double q, double gamma) {
    const double pq = p * q;
    const double g8 = std::pow(gamma, 8);
    return pq * g8 / (1.0 - (1.0 - pq) * gamma * gamma);
}
}  // namespace

double chain_single_controller_value(double gamma) {
    return chain_value_from_advance_probs(0.1, 1.0, gamma);
}

double chain_even_mixture_value(double gamma) {
    return chain_value_from_advance_probs(0.55, 0.55, gamma);
}

double chain_printed_single_value(double gamma) {
    return 0.1 * std::pow(gamma, 9) / (1.0 - 0.1 * 0.9 * gamma * gamma);
}

double chain_printed_mixture_value(double gamma) {
    return 0.55 * 0.55 * std::pow(gamma, 9) / (1.0 - 2.0 * 0.55 * 0.45 * gamma * gamma);
}

double truncated_expansion_value(const FiniteMdp& mdp, const ControllerSet& controllers,
                                 const Vector& pi, int start_state, double cutoff) {
    require(start_state >= 0 && start_state < mdp.num_states(),
            "truncated_expansion_value: bad start state");
    const Matrix policy = induced_policy(mdp, controllers, pi);

    // States from which some nonzero reward is still reachable; weight that
    // flows into dead states can be discarded.
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    std::vector<bool> can_earn(static_cast<std::size_t>(S), false);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            if (mdp.reward()(s, a) != 0.0 && policy(s, a) > 0.0) can_earn[s] = true;
        }
    }
    for (bool changed = true; changed;) {
        changed = false;
        for (int s = 0; s < S; ++s) {
            if (can_earn[s]) continue;
            for (int a = 0; a < A && !can_earn[s]; ++a) {
                if (policy(s, a) <= 0.0) continue;
                for (int s2 = 0; s2 < S; ++s2) {
                    if (mdp.transition()[a](s, s2) > 0.0 && can_earn[s2]) {
                        can_earn[s] = true;
                        changed = true;
                        break;
                    }
                }
            }
        }
    }

    // Depth-synchronous path sum: paths meeting at the same state after the
    // same number of steps carry a common future, so their probability-times-
    // discount weights are pooled. Expansion stops once the live weight
    // (an upper bound on the dropped mass) falls under the cutoff.
    double total = 0.0;
    Vector weight = Vector::Zero(S);
    weight[start_state] = 1.0;
    const int max_depth = 1000000;
    for (int depth = 0; depth < max_depth; ++depth) {
        double live = 0.0;
        for (int s = 0; s < S; ++s) {
            if (can_earn[s]) live += weight[s];
        }
        if (live <= cutoff) break;
        Vector next = Vector::Zero(S);
        for (int s = 0; s < S; ++s) {
            if (weight[s] <= 0.0 || !can_earn[s]) continue;
            for (int a = 0; a < A; ++a) {
                const double pa = policy(s, a);
                if (pa <= 0.0) continue;
                total += weight[s] * pa * mdp.reward()(s, a);
                for (int s2 = 0; s2 < S; ++s2) {
                    const double pt = mdp.transition()[a](s, s2);
                    if (pt <= 0.0) continue;
                    next[s2] += weight[s] * pa * pt * mdp.gamma();
                }
            }
        }
        weight = std::move(next);
    }
    return total;
}

// ---------------------------------------------------------------------------
// Queues
// ---------------------------------------------------------------------------

Vector queue_step(const Vector& lengths, const Vector& decision, const Vector& arrivals,
                  int cap) {
    require(lengths.size() == decision.size() && lengths.size() == arrivals.size(),
            "queue_step: size mismatch");
    require(cap >= 1, "queue_step: cap must be positive");
    Vector next(lengths.size());
    for (int i = 0; i < lengths.size(); ++i) {
        require(decision[i] == 0.0 || decision[i] == 1.0, "queue_step: decision must be 0/1");
        require(arrivals[i] == 0.0 || arrivals[i] == 1.0, "queue_step: arrivals must be 0/1");
        const double served = std::max(lengths[i] - decision[i], 0.0);
        next[i] = std::min(static_cast<double>(cap), served + arrivals[i]);
    }
    return next;
}

QueueController QueueController::serve(int queue) {
    QueueController c;
    c.kind = Kind::ServeQueue;
    c.queue = queue;
    return c;
}

QueueController QueueController::stationary(Vector probs) {
    require(probs.size() >= 1 && (probs.array() >= 0.0).all() && probs.sum() <= 1.0 + 1e-12,
            "QueueController::stationary: probabilities must be subnormalized");
    QueueController c;
    c.kind = Kind::Stationary;
    c.service_probs = std::move(probs);
    return c;
}

QueueController QueueController::longest_queue_first() {
    QueueController c;
    c.kind = Kind::LongestQueueFirst;
    return c;
}

TwoQueueEnv::TwoQueueEnv(TwoQueueConfig config, std::vector<QueueController> controllers)
    : config_(std::move(config)), controllers_(std::move(controllers)) {
    require(!config_.arrival_schedule.empty(), "TwoQueueEnv: empty arrival schedule");
    for (const auto& lam : config_.arrival_schedule) {
        require(lam[0] >= 0.0 && lam[0] < 1.0 && lam[1] >= 0.0 && lam[1] < 1.0,
                "TwoQueueEnv: arrival rates must lie in [0,1)");
    }
    require(!controllers_.empty(), "TwoQueueEnv: no controllers");
    arrivals_ = config_.arrival_schedule.front();
}

EnvState TwoQueueEnv::reset(RngStream& /*rng*/) const { return Eigen::Vector2d::Zero(); }

void TwoQueueEnv::set_round(int round) {
    if (config_.rounds_per_phase <= 0) return;
    const auto phases = static_cast<int>(config_.arrival_schedule.size());
    const int phase = std::min(round / config_.rounds_per_phase, phases - 1);
    arrivals_ = config_.arrival_schedule[static_cast<std::size_t>(phase)];
}

double TwoQueueEnv::advance(EnvState& state, int controller, RngStream& rng) const {
    require(controller >= 0 && controller < num_controllers(), "TwoQueueEnv: bad controller");
    const QueueController& ctrl = controllers_[static_cast<std::size_t>(controller)];

    int served = -1;
    switch (ctrl.kind) {
        case QueueController::Kind::ServeQueue:
            served = ctrl.queue;
            break;
        case QueueController::Kind::Stationary: {
            const double u = rng.uniform();
            double acc = 0.0;
            for (int i = 0; i < 2; ++i) {
                acc += ctrl.service_probs[i];
                if (u < acc) {
                    served = i;
                    break;
                }
            }
            break;
        }
        case QueueController::Kind::LongestQueueFirst:
            served = state[1] > state[0] ? 1 : 0;
            break;
    }

    double backlog = 0.0;
    for (int i = 0; i < 2; ++i) {
        const double post_service = std::max(state[i] - (i == served ? 1.0 : 0.0), 0.0);
        backlog += post_service;
        const double arrival = rng.bernoulli(arrivals_[i]) ? 1.0 : 0.0;
        state[i] = std::min(static_cast<double>(config_.cap), post_service + arrival);
    }
    return config_.reward == QueueReward::NegativeBacklog ? -backlog
                                                          : 1.0 - backlog / (2.0 * config_.cap);
}

double expert_backlog_bound(double lambda_unserved, double gamma) {
    require(lambda_unserved >= 0.0 && gamma > 0.0 && gamma < 1.0,
            "expert_backlog_bound: bad inputs");
    return lambda_unserved * gamma / ((1.0 - gamma) * (1.0 - gamma));
}

// ---------------------------------------------------------------------------
// Path graph
// ---------------------------------------------------------------------------

std::vector<std::vector<int>> path_graph_independent_sets(int num_queues) {
    require(num_queues >= 1, "path_graph_independent_sets: need at least one queue");
    require(num_queues <= 20, "path_graph_independent_sets: too many queues to enumerate");
    std::vector<std::vector<int>> sets;
    for (int mask = 0; mask < (1 << num_queues); ++mask) {
        if (mask & (mask << 1)) continue;  // adjacent pair
        std::vector<int> set;
        for (int i = 0; i < num_queues; ++i) {
            if (mask & (1 << i)) set.push_back(i);
        }
        sets.push_back(std::move(set));
    }
    std::sort(sets.begin(), sets.end());  // lexicographic tie-break order
    return sets;
}

PathController PathController::max_weight() { return {Kind::MaxWeight, {}}; }
PathController PathController::max_egress() { return {Kind::MaxEgress, {}}; }
PathController PathController::fixed(std::vector<int> set) {
    std::sort(set.begin(), set.end());
    return {Kind::FixedSet, std::move(set)};
}

PathGraphEnv::PathGraphEnv(PathGraphConfig config, std::vector<PathController> controllers)
    : config_(std::move(config)), controllers_(std::move(controllers)) {
    if (config_.arrivals.size() == 0) {
        config_.arrivals = Vector::Constant(config_.num_queues, 0.495);
    }
    require(config_.arrivals.size() == config_.num_queues, "PathGraphEnv: arrival size mismatch");
    require((config_.arrivals.array() >= 0.0).all() && (config_.arrivals.array() < 1.0).all(),
            "PathGraphEnv: arrival rates must lie in [0,1)");
    require(!controllers_.empty(), "PathGraphEnv: no controllers");
    sets_ = path_graph_independent_sets(config_.num_queues);
    for (const auto& c : controllers_) {
        if (c.kind == PathController::Kind::FixedSet) {
            require(std::find(sets_.begin(), sets_.end(), c.fixed_set) != sets_.end(),
                    "PathGraphEnv: fixed set is not an independent set");
        }
    }
}

EnvState PathGraphEnv::reset(RngStream& rng) const {
    EnvState q(config_.num_queues);
    for (int i = 0; i < config_.num_queues; ++i) {
        q[i] = config_.start_max > 0
                   ? static_cast<double>(rng.uniform_index(
                         static_cast<std::uint64_t>(config_.start_max) + 1))
                   : 0.0;
    }
    return q;
}

const std::vector<int>& PathGraphEnv::decision(const EnvState& state, int controller) const {
    const PathController& ctrl = controllers_[static_cast<std::size_t>(controller)];
    if (ctrl.kind == PathController::Kind::FixedSet) {
        const auto it = std::find(sets_.begin(), sets_.end(), ctrl.fixed_set);
        return *it;
    }
    // Max-weight scores by total backlog. Max-egress scores by the number of
    // nonempty queues served, with total backlog as the secondary score: a
    // bare lexicographic tie-break would systematically starve the queues
    // outside the first full-count set. Remaining ties go to the
    // lexicographically smallest set.
    double best_primary = -1.0, best_secondary = -1.0;
    std::size_t best_index = 0;
    for (std::size_t i = 0; i < sets_.size(); ++i) {
        double weight = 0.0, count = 0.0;
        for (int q : sets_[i]) {
            weight += state[q];
            count += state[q] > 0.0 ? 1.0 : 0.0;
        }
        const double primary = ctrl.kind == PathController::Kind::MaxWeight ? weight : count;
        const double secondary = ctrl.kind == PathController::Kind::MaxWeight ? 0.0 : weight;
        if (primary > best_primary ||
            (primary == best_primary && secondary > best_secondary)) {
            best_primary = primary;
            best_secondary = secondary;
            best_index = i;
        }
    }
    return sets_[best_index];
}

double PathGraphEnv::advance(EnvState& state, int controller, RngStream& rng) const {
    require(controller >= 0 && controller < num_controllers(), "PathGraphEnv: bad controller");
    const std::vector<int>& set = decision(state, controller);

    for (int q : set) state[q] = std::max(state[q] - 1.0, 0.0);
    const double backlog = state.sum();
    for (int i = 0; i < config_.num_queues; ++i) {
        if (rng.bernoulli(config_.arrivals[i])) {
            state[i] = std::min(static_cast<double>(config_.cap), state[i] + 1.0);
        }
    }
    return config_.reward == QueueReward::NegativeBacklog
               ? -backlog
               : 1.0 - backlog / (config_.num_queues * config_.cap);
}

std::vector<PathGraphEnv::Packet> PathGraphEnv::simulate_packet_trace(int controller,
                                                                      int horizon,
                                                                      RngStream& rng) const {
    require(horizon >= 1, "simulate_packet_trace: horizon must be positive");
    std::vector<Packet> packets;
    std::vector<std::deque<int>> queues(static_cast<std::size_t>(config_.num_queues));

    EnvState lengths(config_.num_queues);
    auto arrive = [&](int q, double t) {
        if (lengths[q] >= config_.cap) return;  // dropped at the cap
        const int id = static_cast<int>(packets.size());
        packets.push_back({id, q, t, std::numeric_limits<double>::quiet_NaN()});
        queues[static_cast<std::size_t>(q)].push_back(id);
        lengths[q] += 1.0;
    };

    lengths.setZero();
    for (int i = 0; i < config_.num_queues; ++i) {
        const int init = config_.start_max > 0
                             ? static_cast<int>(rng.uniform_index(
                                   static_cast<std::uint64_t>(config_.start_max) + 1))
                             : 0;
        for (int k = 0; k < init; ++k) arrive(i, 0.0);
    }

    for (int t = 1; t <= horizon; ++t) {
        const std::vector<int>& set = decision(lengths, controller);
        for (int q : set) {
            auto& fifo = queues[static_cast<std::size_t>(q)];
            if (fifo.empty()) continue;
            packets[static_cast<std::size_t>(fifo.front())].departure = t;
            fifo.pop_front();
            lengths[q] -= 1.0;
        }
        for (int i = 0; i < config_.num_queues; ++i) {
            if (rng.bernoulli(config_.arrivals[i])) arrive(i, t);
        }
    }
    // Censor whatever is still waiting.
    for (auto& fifo : queues) {
        for (int id : fifo) packets[static_cast<std::size_t>(id)].departure = horizon;
    }
    return packets;
}

double mean_delay(const std::vector<PathGraphEnv::Packet>& trace) {
    double sum = 0.0;
    int count = 0;
    for (const auto& p : trace) {
        if (std::isnan(p.departure)) continue;
        sum += p.departure - p.arrival;
        ++count;
    }
    if (count == 0) throw std::invalid_argument("mean_delay: no departed packets");
    return sum / count;
}

// ---------------------------------------------------------------------------
// Pendulum / DARE / switched systems / cartpole
// ---------------------------------------------------------------------------

LinearSystem make_pendulum(const PendulumParams& params, double dt) {
    require(params.gravity > 0.0 && params.pole_mass > 0.0 && params.pole_length > 0.0 &&
                params.cart_mass > 0.0,
            "make_pendulum: parameters must be positive");
    require(dt > 0.0 && dt <= 0.1, "make_pendulum: dt must lie in (0, 0.1]");

    const double total_mass = params.pole_mass + params.cart_mass;
    const double denom = 4.0 / 3.0 - params.pole_mass / total_mass;
    const double angle_gain = params.gravity / (params.pole_length * denom);

    LinearSystem sys;
    sys.dt = dt;
    sys.a_continuous = Matrix::Zero(4, 4);
    sys.a_continuous(0, 1) = 1.0;
    sys.a_continuous(1, 2) = angle_gain;
    sys.a_continuous(2, 3) = 1.0;
    sys.a_continuous(3, 2) = angle_gain;
    sys.b_continuous = Vector::Zero(4);
    sys.b_continuous[1] = 1.0 / total_mass;
    sys.b_continuous[3] = 1.0 / (params.pole_length * denom);
    sys.a_discrete = Matrix::Identity(4, 4) + dt * sys.a_continuous;
    sys.b_discrete = dt * sys.b_continuous;
    return sys;
}

DareResult solve_dare(const Matrix& a, const Vector& b, const Matrix& q_cost, double r_cost) {
    const int n = static_cast<int>(a.rows());
    require(a.cols() == n && b.size() == n && q_cost.rows() == n && q_cost.cols() == n,
            "solve_dare: dimension mismatch");
    require(r_cost > 0.0, "solve_dare: control cost must be positive");

    Matrix p = q_cost;
    constexpr int kMaxIterations = 100000;
    bool converged = false;
    for (int it = 0; it < kMaxIterations; ++it) {
        const Vector pb = p * b;
        const double s = r_cost + b.dot(pb);
        Matrix next = q_cost + a.transpose() * (p - pb * pb.transpose() / s) * a;
        // Asymmetry drift feeds the open loop's unstable modes; keep the
        // iterate symmetric.
        next = 0.5 * (next + next.transpose());
        const double change = (next - p).norm() / std::max(1.0, p.norm());
        p = next;
        if (change <= 1e-12) {
            converged = true;
            break;
        }
    }
    if (!converged) throw std::runtime_error("solve_dare: iteration did not converge");

    const Vector pb = p * b;
    const double s = r_cost + b.dot(pb);
    const Vector gain = (a.transpose() * pb) / s;  // row of (R + b'Pb)^{-1} b'PA

    const double radius = spectral_radius(closed_loop(a, b, gain));
    if (radius >= 1.0) {
        throw std::runtime_error("solve_dare: closed loop is not stable (spectral radius " +
                                 std::to_string(radius) + ")");
    }
    return {p, gain};
}

Matrix closed_loop(const Matrix& a, const Vector& b, const Vector& gain) {
    return a - b * gain.transpose();
}

double spectral_radius(const Matrix& a) {
    return a.eigenvalues().cwiseAbs().maxCoeff();
}

double spectral_norm(const Matrix& a) {
    return Eigen::JacobiSVD<Matrix>(a).singularValues().maxCoeff();
}

double switched_lyapunov_estimate(const std::vector<Matrix>& systems, const Vector& p,
                                  const Vector& x0, int steps, RngStream& rng) {
    require(!systems.empty(), "switched_lyapunov_estimate: no systems");
    require(p.size() == static_cast<int>(systems.size()),
            "switched_lyapunov_estimate: distribution size mismatch");
    require(steps >= 1, "switched_lyapunov_estimate: steps must be positive");
    const double norm0 = x0.norm();
    require(norm0 > 0.0, "switched_lyapunov_estimate: x0 must be nonzero");

    Vector x = x0 / norm0;
    double log_growth = 0.0;
    for (int t = 0; t < steps; ++t) {
        const int i = rng.categorical(p);
        Vector y = systems[static_cast<std::size_t>(i)] * x;
        const double n = y.norm();
        if (n == 0.0) return -std::numeric_limits<double>::infinity();
        log_growth += std::log(n);
        x = y / n;
    }
    return log_growth / steps;
}

double switched_norm_bound(const std::vector<Matrix>& systems, const Vector& p) {
    require(p.size() == static_cast<int>(systems.size()),
            "switched_norm_bound: distribution size mismatch");
    double bound = 0.0;
    for (int i = 0; i < p.size(); ++i) {
        bound += p[i] * std::log(spectral_norm(systems[static_cast<std::size_t>(i)]));
    }
    return bound;
}

CartpoleEnv::CartpoleEnv(CartpoleConfig config, LinearSystem system, std::vector<Vector> gains)
    : config_(config), system_(std::move(system)), gains_(std::move(gains)) {
    require(!gains_.empty(), "CartpoleEnv: no controllers");
    for (const auto& k : gains_) require(k.size() == 4, "CartpoleEnv: gain must have 4 entries");
    require(config_.angle_limit > 0.0 && config_.position_limit > 0.0 &&
                config_.episode_length > 0,
            "CartpoleEnv: thresholds must be positive");
}

EnvState CartpoleEnv::reset(RngStream& rng) const {
    EnvState x(4);
    for (int i = 0; i < 4; ++i) {
        x[i] = rng.uniform(-config_.start_range, config_.start_range);
    }
    return x;
}

bool CartpoleEnv::is_terminal(const EnvState& state) const {
    return std::abs(state[2]) > config_.angle_limit ||
           std::abs(state[0]) > config_.position_limit;
}

double CartpoleEnv::advance(EnvState& state, int controller, RngStream& rng) const {
    require(controller >= 0 && controller < num_controllers(), "CartpoleEnv: bad controller");
    const double u = -gains_[static_cast<std::size_t>(controller)].dot(state);
    Eigen::Vector4d next = system_.a_discrete * state + system_.b_discrete * u;
    if (config_.noise_std > 0.0) {
        for (int i = 0; i < 4; ++i) next[i] += config_.noise_std * rng.normal();
    }
    state = next;
    return 1.0;
}

int CartpoleEnv::uptime(const Vector& pi, RngStream& rng) const {
    EnvState x = reset(rng);
    for (int t = 0; t < config_.episode_length; ++t) {
        if (is_terminal(x)) return t;
        const int m = rng.categorical(pi);
        advance(x, m, rng);
    }
    return config_.episode_length;
}

}  // namespace improper::envs
