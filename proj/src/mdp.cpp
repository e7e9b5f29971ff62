#include "improper/mdp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace improper {

namespace {

void require(bool cond, const std::string& what) {
    if (!cond) throw std::invalid_argument(what);
}

void check_distribution(const Vector& v, const std::string& name) {
    require(v.size() >= 1, name + ": empty");
    require((v.array() >= 0.0).all(), name + ": negative entry");
    require(std::abs(v.sum() - 1.0) <= kStochasticTol, name + ": does not sum to 1");
}

void check_row_stochastic(const Matrix& m, const std::string& name) {
    require((m.array() >= 0.0).all(), name + ": negative entry");
    for (int r = 0; r < m.rows(); ++r) {
        require(std::abs(m.row(r).sum() - 1.0) <= kStochasticTol,
                name + ": row " + std::to_string(r) + " does not sum to 1");
    }
}

constexpr int kDenseSolveLimit = 2000;
constexpr double kResidualTol = 1e-10;

// Solve (I - gamma * P) x = b.  Dense LU for moderate S, otherwise a
// Neumann-series sweep down to the residual tolerance.
Vector solve_discounted(const Matrix& p, double gamma, const Vector& b) {
    const int n = static_cast<int>(p.rows());
    if (n <= kDenseSolveLimit) {
        Matrix a = Matrix::Identity(n, n) - gamma * p;
        Vector x = a.partialPivLu().solve(b);
        const double residual = (a * x - b).lpNorm<Eigen::Infinity>();
        if (!x.allFinite() || residual > kResidualTol) {
            throw std::runtime_error("solve_discounted: linear solve failed (residual " +
                                     std::to_string(residual) + ")");
        }
        return x;
    }
    Vector x = Vector::Zero(n);
    // Contraction factor gamma, so iterations are logarithmic in the tolerance.
    for (int it = 0; it < 1000000; ++it) {
        Vector next = b + gamma * (p * x);
        if ((next - x).lpNorm<Eigen::Infinity>() <= kResidualTol * (1.0 - gamma)) {
            return next;
        }
        x = std::move(next);
    }
    throw std::runtime_error("solve_discounted: iteration did not converge");
}

}  // namespace

FiniteMdp::FiniteMdp(std::vector<Matrix> transition, Matrix reward, double gamma,
                     Vector rho, std::optional<Vector> mu,
                     bool allow_unnormalized_reward)
    : transition_(std::move(transition)),
      reward_(std::move(reward)),
      gamma_(gamma),
      rho_(std::move(rho)) {
    require(!transition_.empty(), "FiniteMdp: no actions");
    num_actions_ = static_cast<int>(transition_.size());
    num_states_ = static_cast<int>(transition_[0].rows());
    require(num_states_ >= 1, "FiniteMdp: no states");
    require(gamma_ > 0.0 && gamma_ < 1.0, "FiniteMdp: gamma must lie in (0,1)");
    for (int a = 0; a < num_actions_; ++a) {
        require(transition_[a].rows() == num_states_ && transition_[a].cols() == num_states_,
                "FiniteMdp: transition matrix shape mismatch");
        check_row_stochastic(transition_[a], "FiniteMdp transition action " + std::to_string(a));
    }
    require(reward_.rows() == num_states_ && reward_.cols() == num_actions_,
            "FiniteMdp: reward shape mismatch");
    require(reward_.allFinite(), "FiniteMdp: non-finite reward");
    if (!allow_unnormalized_reward) {
        require((reward_.array() >= 0.0).all() && (reward_.array() <= 1.0).all(),
                "FiniteMdp: rewards outside [0,1]; pass allow_unnormalized_reward to accept");
    }
    require(rho_.size() == num_states_, "FiniteMdp: rho size mismatch");
    check_distribution(rho_, "FiniteMdp rho");
    mu_ = mu.has_value() ? std::move(*mu) : rho_;
    require(mu_.size() == num_states_, "FiniteMdp: mu size mismatch");
    check_distribution(mu_, "FiniteMdp mu");
}

ControllerSet::ControllerSet(std::vector<Matrix> controllers)
    : controllers_(std::move(controllers)) {
    require(!controllers_.empty(), "ControllerSet: empty");
    const auto rows = controllers_[0].rows();
    const auto cols = controllers_[0].cols();
    for (std::size_t m = 0; m < controllers_.size(); ++m) {
        require(controllers_[m].rows() == rows && controllers_[m].cols() == cols,
                "ControllerSet: controller shape mismatch");
        check_row_stochastic(controllers_[m], "ControllerSet controller " + std::to_string(m));
    }
}

MixtureState::MixtureState(Vector t) : theta(std::move(t)), pi(softmax(theta)) {}

Vector softmax(const Vector& theta) {
    require(theta.size() >= 1, "softmax: empty input");
    require(theta.allFinite(), "softmax: non-finite input");
    const double shift = theta.maxCoeff();
    Vector e = (theta.array() - shift).exp();
    return e / e.sum();
}

Matrix induced_policy(const FiniteMdp& mdp, const ControllerSet& controllers,
                      const Vector& pi) {
    require(pi.size() == controllers.size(), "induced_policy: mixture size mismatch");
    require(controllers.num_states() == mdp.num_states() &&
                controllers.num_actions() == mdp.num_actions(),
            "induced_policy: controller dimensions do not match the MDP");
    check_distribution(pi, "induced_policy pi");
    Matrix out = Matrix::Zero(mdp.num_states(), mdp.num_actions());
    for (int m = 0; m < controllers.size(); ++m) out += pi[m] * controllers[m];
    return out;
}

PolicyEvaluation evaluate_mixture(const FiniteMdp& mdp, const ControllerSet& controllers,
                                  const Vector& pi, const Vector& mu) {
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    const int M = controllers.size();
    require(mu.size() == S, "evaluate: mu size mismatch");
    check_distribution(mu, "evaluate mu");

    PolicyEvaluation out;
    out.pi = pi;
    out.induced = induced_policy(mdp, controllers, pi);

    Matrix p_pi = Matrix::Zero(S, S);
    for (int a = 0; a < A; ++a) {
        p_pi.noalias() += out.induced.col(a).asDiagonal() * mdp.transition()[a];
    }
    const Vector r_pi = (out.induced.array() * mdp.reward().array()).rowwise().sum();

    out.value = solve_discounted(p_pi, mdp.gamma(), r_pi);
    out.value_mu = mu.dot(out.value);
    out.value_rho = mdp.rho().dot(out.value);

    out.q.resize(S, A);
    for (int a = 0; a < A; ++a) {
        out.q.col(a) = mdp.reward().col(a) + mdp.gamma() * (mdp.transition()[a] * out.value);
    }
    out.q_controller.resize(S, M);
    for (int m = 0; m < M; ++m) {
        out.q_controller.col(m) = (controllers[m].array() * out.q.array()).rowwise().sum();
    }
    out.advantage = out.q_controller.colwise() - out.value;

    const Vector scaled = solve_discounted(p_pi.transpose(), mdp.gamma(), mu);
    out.visitation_mu = (1.0 - mdp.gamma()) * scaled;
    return out;
}

PolicyEvaluation evaluate_policy(const FiniteMdp& mdp, const ControllerSet& controllers,
                                 const Vector& theta, const Vector& mu) {
    return evaluate_mixture(mdp, controllers, softmax(theta), mu);
}

Vector state_visitation(const FiniteMdp& mdp, const ControllerSet& controllers,
                        const Vector& theta, const Vector& mu) {
    return evaluate_policy(mdp, controllers, theta, mu).visitation_mu;
}

Vector value_gradient(const FiniteMdp& mdp, const ControllerSet& /*controllers*/,
                      const PolicyEvaluation& eval) {
    const double scale = 1.0 / (1.0 - mdp.gamma());
    Vector grad = scale * (eval.advantage.transpose() * eval.visitation_mu);
    return grad.cwiseProduct(eval.pi);
}

Vector value_gradient(const FiniteMdp& mdp, const ControllerSet& controllers,
                      const Vector& theta, const Vector& mu) {
    const PolicyEvaluation eval = evaluate_policy(mdp, controllers, theta, mu);
    return value_gradient(mdp, controllers, eval);
}

ValueDifferenceSides value_difference_sides(const FiniteMdp& mdp,
                                            const ControllerSet& controllers,
                                            const Vector& theta,
                                            const Vector& theta_prime,
                                            int anchor_state) {
    require(anchor_state >= 0 && anchor_state < mdp.num_states(),
            "value_difference_sides: anchor state out of range");
    Vector point = Vector::Zero(mdp.num_states());
    point[anchor_state] = 1.0;

    const PolicyEvaluation old_eval = evaluate_policy(mdp, controllers, theta, point);
    const PolicyEvaluation new_eval = evaluate_policy(mdp, controllers, theta_prime, point);
    const double scale = 1.0 / (1.0 - mdp.gamma());

    ValueDifferenceSides out;
    out.via_new_visitation =
        scale * new_eval.visitation_mu.dot(old_eval.advantage * new_eval.pi);
    out.via_old_visitation =
        scale * old_eval.visitation_mu.dot(new_eval.q_controller * (new_eval.pi - old_eval.pi));
    return out;
}

std::pair<FiniteMdp, ControllerSet> load_mdp_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_mdp_json: cannot open " + path);
    nlohmann::json j;
    in >> j;

    const int S = j.at("num_states").get<int>();
    const int A = j.at("num_actions").get<int>();
    const double gamma = j.at("gamma").get<double>();

    const auto& jt = j.at("transition");
    require(static_cast<int>(jt.size()) == S, "load_mdp_json: transition outer size != S");
    std::vector<Matrix> transition(A, Matrix::Zero(S, S));
    for (int s = 0; s < S; ++s) {
        require(static_cast<int>(jt[s].size()) == A, "load_mdp_json: transition action size != A");
        for (int a = 0; a < A; ++a) {
            require(static_cast<int>(jt[s][a].size()) == S,
                    "load_mdp_json: transition row size != S");
            for (int s2 = 0; s2 < S; ++s2) transition[a](s, s2) = jt[s][a][s2].get<double>();
        }
    }

    Matrix reward(S, A);
    const auto& jr = j.at("reward");
    require(static_cast<int>(jr.size()) == S, "load_mdp_json: reward rows != S");
    for (int s = 0; s < S; ++s) {
        require(static_cast<int>(jr[s].size()) == A, "load_mdp_json: reward cols != A");
        for (int a = 0; a < A; ++a) reward(s, a) = jr[s][a].get<double>();
    }

    auto read_vector = [&](const char* name) {
        const auto& jv = j.at(name);
        Vector v(jv.size());
        for (std::size_t i = 0; i < jv.size(); ++i) v[static_cast<int>(i)] = jv[i].get<double>();
        return v;
    };
    Vector rho = read_vector("rho");
    std::optional<Vector> mu;
    if (j.contains("mu")) mu = read_vector("mu");

    const bool unnormalized = j.value("allow_unnormalized_reward", false);

    std::vector<Matrix> controllers;
    for (const auto& jc : j.at("controllers")) {
        Matrix k(S, A);
        require(static_cast<int>(jc.size()) == S, "load_mdp_json: controller rows != S");
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) k(s, a) = jc[s][a].get<double>();
        }
        controllers.push_back(std::move(k));
    }

    return {FiniteMdp(std::move(transition), std::move(reward), gamma, std::move(rho),
                      std::move(mu), unnormalized),
            ControllerSet(std::move(controllers))};
}

}  // namespace improper
