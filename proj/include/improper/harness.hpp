#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "improper/mdp.hpp"

namespace improper::harness {

struct ExperimentConfig {
    std::string experiment;
    std::uint64_t seed = 1;
    int trials = -1;   // negative = experiment default
    int rounds = -1;   // negative = experiment default
    int workers = 0;   // 0 = hardware concurrency
    std::string out_dir = "out";
    bool run_checks = false;
    std::string config_path;  // optional JSON file mirroring this struct
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig merge_cli(ExperimentConfig base, const ExperimentConfig& overrides);

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct Table {
    std::string name;  // file stem
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

struct RunRecord {
    std::vector<Table> tables;
    std::vector<std::string> summary;
    std::vector<std::string> errors;  // per-trial failures; run continues
    std::vector<CheckResult> checks;

    bool all_checks_passed() const;
};

// Per-round mean and unbiased standard deviation across trials. Expects
// column 0 = trial and column 1 = round; all trials must share a round grid.
Table aggregate(const Table& raw, bool* single_trial_warning = nullptr);

// UTF-8, header row, '.' decimal separator, 17 significant digits.
void emit_csv(const Table& table, const std::string& path);
Table parse_csv(const std::string& path);

// Dispatch on config.experiment, run all trials, write CSVs under
// config.out_dir, evaluate the attached checks.
RunRecord run_experiment(const ExperimentConfig& config);

const std::vector<std::string>& experiment_names();

// Deterministic per-trial seed: master seed mixed with experiment id and
// trial index.
std::uint64_t derive_trial_seed(std::uint64_t master, const std::string& experiment, int trial);

// Run `total` jobs on up to `workers` threads; results must be written into
// preallocated slots so the outcome is independent of scheduling.
void parallel_for(int total, int workers, const std::function<void(int)>& body);

}  // namespace improper::harness
