#pragma once

#include <utility>

#include <Eigen/Core>

#include "improper/rng.hpp"

namespace improper {

using EnvState = Eigen::VectorXd;

// Rollout interface: the environment owns its base controllers and applies
// the recommendation of controller m for one step. advance must be a pure
// function of (state, controller, rng draws); rewards must be finite.
class SimEnv {
public:
    virtual ~SimEnv() = default;

    virtual int num_controllers() const = 0;

    // Sample the initial state from mu.
    virtual EnvState reset(RngStream& rng) const = 0;

    virtual bool is_terminal(const EnvState& /*state*/) const { return false; }

    // Apply one step in place and return the reward. Hot path: no
    // allocation.
    virtual double advance(EnvState& state, int controller, RngStream& rng) const = 0;

    struct StepResult {
        EnvState next;
        double reward = 0.0;
    };
    StepResult step(const EnvState& state, int controller, RngStream& rng) const {
        StepResult result{state, 0.0};
        result.reward = advance(result.next, controller, rng);
        return result;
    }

    // Hook for environments whose parameters vary across learning rounds.
    virtual void set_round(int /*round*/) {}
};

}  // namespace improper
