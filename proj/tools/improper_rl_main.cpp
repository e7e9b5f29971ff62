#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "improper/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Improper reinforcement learning simulator: gradient-based optimization over "
                 "mixtures of base controllers"};

    std::string experiment;
    std::string config_path;
    improper::harness::ExperimentConfig cli;

    app.add_option("experiment", experiment, "Experiment to run")
        ->required()
        ->check(CLI::IsMember(improper::harness::experiment_names()));
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--seed", cli.seed, "Master seed");
    app.add_option("--trials", cli.trials, "Number of independent trials");
    app.add_option("--rounds", cli.rounds, "Learning rounds per trial");
    app.add_option("--out", cli.out_dir, "Output directory for CSV files");
    app.add_option("--workers", cli.workers, "Worker threads (0 = hardware)");
    app.add_flag("--check", cli.run_checks, "Run the attached acceptance assertions");

    CLI11_PARSE(app, argc, argv);

    improper::harness::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = improper::harness::load_config(config_path);
    cfg = improper::harness::merge_cli(cfg, cli);
    cfg.experiment = experiment;

    try {
        const improper::harness::RunRecord record = improper::harness::run_experiment(cfg);

        for (const auto& line : record.summary) std::cout << line << '\n';
        for (const auto& err : record.errors) std::cout << "error: " << err << '\n';
        for (const auto& table : record.tables) {
            std::cout << "wrote " << cfg.out_dir << '/' << table.name << ".csv ("
                      << table.rows.size() << " rows)\n";
        }
        if (cfg.run_checks) {
            bool all = true;
            for (const auto& check : record.checks) {
                std::cout << (check.passed ? "[PASS] " : "[FAIL] ") << check.name;
                if (!check.detail.empty()) std::cout << " (" << check.detail << ')';
                std::cout << '\n';
                all = all && check.passed;
            }
            if (!all) return 1;
        }
        if (!record.errors.empty() && record.tables.empty()) return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
