// Acceptance suite: runs every experiment-level guarantee end to end and
// prints one pass/fail line per criterion. Exit code is the number of
// failed criteria.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "improper/harness.hpp"

using improper::harness::CheckResult;
using improper::harness::ExperimentConfig;
using improper::harness::RunRecord;
using improper::harness::run_experiment;

namespace {

struct Criterion {
    int number = 0;
    std::string title;
    bool passed = false;
    double seconds = 0.0;
    std::optional<double> budget_seconds;
    std::string detail;
};

std::vector<Criterion> g_results;

void report(int number, const std::string& title, bool passed, double seconds,
            std::optional<double> budget, const std::string& detail = "") {
    Criterion c{number, title, passed, seconds, budget, detail};
    if (budget.has_value() && seconds > *budget) {
        c.passed = false;
        c.detail += (c.detail.empty() ? "" : "; ") + std::string("over runtime budget");
    }
    g_results.push_back(c);
    std::printf("[%s] criterion %2d: %s (%.1fs%s)%s%s%s\n", c.passed ? "PASS" : "FAIL", number,
                title.c_str(), seconds, budget ? (" / " + std::to_string(static_cast<int>(*budget)) + "s").c_str() : "",
                c.detail.empty() ? "" : " -- ", c.detail.c_str(), "");
    std::fflush(stdout);
}

// True iff every check whose name contains one of the fragments passed, and
// at least one such check exists.
bool checks_pass(const RunRecord& record, const std::vector<std::string>& fragments,
                 std::string* detail) {
    int matched = 0;
    bool ok = true;
    for (const auto& check : record.checks) {
        for (const auto& fragment : fragments) {
            if (check.name.find(fragment) == std::string::npos) continue;
            ++matched;
            if (!check.passed) {
                ok = false;
                if (detail != nullptr) {
                    *detail += (detail->empty() ? "" : "; ") + check.name + ": " + check.detail;
                }
            }
        }
    }
    if (matched == 0) {
        if (detail != nullptr) *detail += "no matching checks";
        return false;
    }
    return ok;
}

RunRecord timed_run(const std::string& experiment, double* seconds, int trials = -1,
                    int rounds = -1, std::uint64_t seed = 1, int workers = 0,
                    const std::string& out = "") {
    ExperimentConfig cfg;
    cfg.experiment = experiment;
    cfg.seed = seed;
    cfg.trials = trials;
    cfg.rounds = rounds;
    cfg.workers = workers;
    cfg.out_dir = out.empty() ? "acceptance_out/" + experiment : out;
    const auto t0 = std::chrono::steady_clock::now();
    RunRecord record = run_experiment(cfg);
    *seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return record;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

bool directories_identical(const std::string& a, const std::string& b, std::string* detail) {
    int files = 0;
    for (const auto& entry : std::filesystem::directory_iterator(a)) {
        const auto name = entry.path().filename();
        const auto other = std::filesystem::path(b) / name;
        if (!std::filesystem::exists(other)) {
            *detail += "missing " + name.string();
            return false;
        }
        if (slurp(entry.path()) != slurp(other)) {
            *detail += "differs: " + name.string();
            return false;
        }
        ++files;
    }
    if (files == 0) {
        *detail += "no files";
        return false;
    }
    return true;
}

}  // namespace

int main() {
    std::filesystem::create_directories("acceptance_out");
    double seconds = 0.0;
    std::string detail;

    // 1. Non-concavity certificate.
    {
        detail.clear();
        const RunRecord record = timed_run("nonconcavity", &seconds);
        const bool ok = checks_pass(record, {"corner value", "midpoint", "softmax"}, &detail);
        report(1, "non-concavity certificate values and midpoint inequality", ok, seconds, 1.0,
               detail);
    }

    // 2-6 and 9 come from the verifier suite (one run covers all of them).
    {
        detail.clear();
        const RunRecord record = timed_run("theory-checks", &seconds);

        std::string d2;
        report(2, "exact gradient matches central finite differences",
               checks_pass(record, {"finite differences"}, &d2), seconds, 30.0, d2);
        std::string d3;
        report(3, "value-difference identities", checks_pass(record, {"value-difference"}, &d3),
               seconds, std::nullopt, d3);
        std::string d4;
        report(4, "smoothness witnesses and ascent improvement",
               checks_pass(record, {"smoothness witness", "single-state smoothness", "ascent"},
                           &d4),
               seconds, std::nullopt, d4);
        std::string d5;
        report(5, "gradient-domination inequality under the drift filter",
               checks_pass(record, {"gradient-domination"}, &d5), seconds, std::nullopt, d5);
        std::string d6;
        report(6, "convergence-rate trajectories stay under the bound",
               checks_pass(record, {"suboptimality"}, &d6), seconds, 60.0, d6);
        std::string d9;
        report(9, "gradient-estimator statistics",
               checks_pass(record, {"estimator"}, &d9), seconds, 120.0, d9);
    }

    // 7. Exact bandit ascent: rate bound, monotone mass, regret envelope.
    {
        detail.clear();
        const RunRecord record = timed_run("bandit-exact", &seconds);
        const bool ok = checks_pass(
            record, {"suboptimality bound", "nondecreasing", "infimum mass", "envelope"}, &detail);
        report(7, "bandit exact ascent rate, infimum mass, regret envelope", ok, seconds, 60.0,
               detail);
    }

    // 8. Projection-free direct update.
    {
        detail.clear();
        const RunRecord record = timed_run("bandit-noisy", &seconds);
        const bool ok =
            checks_pass(record, {"simplex", "final best mass", "regret ratio"}, &detail);
        report(8, "projection-free bandit: simplex, convergence, log-regret factor", ok, seconds,
               120.0, detail);
    }

    // 10. Chain: oracle agreement, strict mixture dominance, learning.
    {
        detail.clear();
        const RunRecord record = timed_run("chain", &seconds);
        const bool ok = checks_pass(
            record, {"expansion oracle", "dominates", "grid oracle", "mean final"}, &detail);
        report(10, "chain: expansion oracle, mixture dominance, learned even mixture", ok,
               seconds, std::nullopt, detail);
    }

    // 11. Two-queue experiment.
    {
        detail.clear();
        const RunRecord record = timed_run("queue2", &seconds);
        const bool ok = checks_pass(
            record, {"symmetric rates", "asymmetric rates", "analytic backlog", "simulated backlog"},
            &detail);
        report(11, "two-queue: even and tilted mixtures, discounted-backlog bound", ok, seconds,
               300.0, detail);
    }

    // 12. Path graph.
    {
        detail.clear();
        const RunRecord record = timed_run("pathgraph", &seconds);
        const bool ok = checks_pass(record, {"delay ordering", "max-egress mass"}, &detail);
        report(12, "path graph: delay ordering and max-egress convergence", ok, seconds, 300.0,
               detail);
    }

    // 13. Cartpole and switched-system stability.
    {
        detail.clear();
        const RunRecord record = timed_run("cartpole", &seconds);
        const bool ok = checks_pass(record, {"log-norm bound", "pure controllers"}, &detail);
        report(13, "cartpole: switching-exponent bound and uptime ordering", ok, seconds, 600.0,
               detail);
    }

    // 14. Determinism: same seed, different worker counts, byte-equal CSVs.
    {
        detail.clear();
        const auto t0 = std::chrono::steady_clock::now();
        double ignored = 0.0;
        timed_run("nonconcavity", &ignored, -1, -1, 11, 1, "acceptance_out/det_a/nonconcavity");
        timed_run("nonconcavity", &ignored, -1, -1, 11, 2, "acceptance_out/det_b/nonconcavity");
        timed_run("bandit-noisy", &ignored, 4, 3000, 11, 1, "acceptance_out/det_a/bandit-noisy");
        timed_run("bandit-noisy", &ignored, 4, 3000, 11, 2, "acceptance_out/det_b/bandit-noisy");
        timed_run("chain", &ignored, 4, 12, 11, 1, "acceptance_out/det_a/chain");
        timed_run("chain", &ignored, 4, 12, 11, 2, "acceptance_out/det_b/chain");
        bool ok = directories_identical("acceptance_out/det_a/nonconcavity",
                                        "acceptance_out/det_b/nonconcavity", &detail);
        ok = directories_identical("acceptance_out/det_a/bandit-noisy",
                                   "acceptance_out/det_b/bandit-noisy", &detail) &&
             ok;
        ok = directories_identical("acceptance_out/det_a/chain", "acceptance_out/det_b/chain",
                                   &detail) &&
             ok;
        seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report(14, "repeated runs with one seed produce byte-identical CSVs", ok, seconds,
               std::nullopt, detail);
    }

    int failures = 0;
    for (const auto& c : g_results) failures += c.passed ? 0 : 1;
    std::printf("%d/%zu criteria passed\n", static_cast<int>(g_results.size()) - failures,
                g_results.size());
    return failures;
}
