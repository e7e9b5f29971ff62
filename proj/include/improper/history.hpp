#pragma once

#include <vector>

#include <Eigen/Core>

namespace improper {

// Per-round log shared by the exact-gradient, estimated-gradient and bandit
// policy-gradient loops. Entries cover every round unless the producing run
// was configured with a log stride; round_index holds the 1-based rounds
// actually stored (always including the last).
struct PgHistory {
    std::vector<int> round_index;
    std::vector<Eigen::VectorXd> theta;
    std::vector<Eigen::VectorXd> pi;
    std::vector<double> v_rho;
    std::vector<double> v_mu;
    std::vector<double> grad_norm;
    std::vector<double> delta;  // V*(rho) - V(rho); NaN when V* unknown
    std::vector<double> cbar;   // running infimum of mass on the optimal support
    std::vector<int> sampled_controller;

    // Estimated-gradient runs only.
    std::vector<double> value_estimate;
    std::vector<double> grad_norm_estimate;

    double cbar_final = std::numeric_limits<double>::quiet_NaN();

    int rounds() const { return static_cast<int>(pi.size()); }
};

}  // namespace improper
