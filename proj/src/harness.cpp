#include "improper/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "improper/bandit.hpp"
#include "improper/environments.hpp"
#include "improper/exact_pg.hpp"
#include "improper/gradest.hpp"
#include "improper/mdp.hpp"
#include "improper/rng.hpp"

namespace improper::harness {

namespace {

void require(bool cond, const std::string& what) {
    if (!cond) throw std::invalid_argument(what);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

CheckResult make_check(const std::string& name, bool passed, const std::string& detail) {
    return {name, passed, detail};
}

double median(std::vector<double> values) {
    require(!values.empty(), "median: empty");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double mean_of(const std::vector<double>& values) {
    require(!values.empty(), "mean: empty");
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

double sample_std(const std::vector<double>& values) {
    if (values.size() < 2) return 0.0;
    const double m = mean_of(values);
    double acc = 0.0;
    for (double v : values) acc += (v - m) * (v - m);
    return std::sqrt(acc / static_cast<double>(values.size() - 1));
}

}  // namespace

bool RunRecord::all_checks_passed() const {
    for (const auto& c : checks) {
        if (!c.passed) return false;
    }
    return true;
}

std::uint64_t derive_trial_seed(std::uint64_t master, const std::string& experiment, int trial) {
    RngStream stream(master, {fnv1a64(experiment.c_str()), static_cast<std::uint64_t>(trial)});
    return stream.next_u64();
}

void parallel_for(int total, int workers, const std::function<void(int)>& body) {
    if (total <= 0) return;
    int n = workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency());
    n = std::max(1, std::min(n, total));
    if (n == 1) {
        for (int i = 0; i < total; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n));
    for (int w = 0; w < n; ++w) {
        pool.emplace_back([&]() {
            for (int i = next.fetch_add(1); i < total; i = next.fetch_add(1)) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

Table aggregate(const Table& raw, bool* single_trial_warning) {
    require(raw.columns.size() >= 2 && raw.columns[0] == "trial" && raw.columns[1] == "t",
            "aggregate: expected columns (trial, t, ...)");
    Table out;
    out.name = raw.name + "_agg";
    out.columns.push_back("t");
    for (std::size_t c = 2; c < raw.columns.size(); ++c) {
        out.columns.push_back("mean_" + raw.columns[c]);
        out.columns.push_back("std_" + raw.columns[c]);
    }

    // Group rows by round in first-appearance order; stored order is
    // trial-major so sums run in trial order.
    std::vector<double> grid;
    std::map<double, std::size_t> index;
    std::vector<std::vector<std::vector<double>>> groups;  // round -> column -> samples
    for (const auto& row : raw.rows) {
        const double t = row[1];
        auto it = index.find(t);
        if (it == index.end()) {
            it = index.emplace(t, grid.size()).first;
            grid.push_back(t);
            groups.emplace_back(raw.columns.size() - 2);
        }
        auto& group = groups[it->second];
        for (std::size_t c = 2; c < raw.columns.size(); ++c) {
            group[c - 2].push_back(row[c]);
        }
    }

    bool warn = false;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        std::vector<double> row;
        row.push_back(grid[g]);
        for (const auto& samples : groups[g]) {
            if (samples.size() < 2) warn = true;
            row.push_back(mean_of(samples));
            row.push_back(sample_std(samples));
        }
        out.rows.push_back(std::move(row));
    }
    if (single_trial_warning != nullptr) *single_trial_warning = warn;
    return out;
}

void emit_csv(const Table& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("emit_csv: cannot open " + path);
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (c > 0) out << ',';
        out << table.columns[c];
    }
    out << '\n';
    for (const auto& row : table.rows) {
        require(row.size() == table.columns.size(), "emit_csv: ragged row");
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c > 0) out << ',';
            out << format_double(row[c]);
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("emit_csv: write failed for " + path);
}

Table parse_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("parse_csv: cannot open " + path);
    Table table;
    table.name = std::filesystem::path(path).stem().string();
    std::string line;
    if (!std::getline(in, line)) return table;
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) table.columns.push_back(cell);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
        table.rows.push_back(std::move(row));
    }
    return table;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_config: cannot open " + path);
    nlohmann::json j;
    in >> j;
    ExperimentConfig cfg;
    cfg.experiment = j.value("experiment", std::string());
    cfg.seed = j.value("seed", std::uint64_t{1});
    cfg.trials = j.value("trials", -1);
    cfg.rounds = j.value("rounds", -1);
    cfg.workers = j.value("workers", 0);
    cfg.out_dir = j.value("out", std::string("out"));
    cfg.config_path = path;
    return cfg;
}

ExperimentConfig merge_cli(ExperimentConfig base, const ExperimentConfig& overrides) {
    if (!overrides.experiment.empty()) base.experiment = overrides.experiment;
    if (overrides.seed != 1) base.seed = overrides.seed;
    if (overrides.trials >= 0) base.trials = overrides.trials;
    if (overrides.rounds >= 0) base.rounds = overrides.rounds;
    if (overrides.workers > 0) base.workers = overrides.workers;
    if (overrides.out_dir != "out") base.out_dir = overrides.out_dir;
    base.run_checks = base.run_checks || overrides.run_checks;
    return base;
}

namespace {

// ------------------------------------------------------------------
// Shared table builders
// ------------------------------------------------------------------

std::vector<std::string> pg_columns(int M, bool estimated) {
    std::vector<std::string> cols{"trial", "t"};
    for (int m = 1; m <= M; ++m) cols.push_back("theta_" + std::to_string(m));
    for (int m = 1; m <= M; ++m) cols.push_back("pi_" + std::to_string(m));
    cols.insert(cols.end(), {"V_rho", "delta", "grad_norm", "cbar_t"});
    if (estimated) {
        cols.push_back("value_estimate");
        cols.push_back("grad_norm_estimate");
    }
    return cols;
}

void append_pg_rows(Table& table, int trial, const PgHistory& history, int stride,
                    bool estimated) {
    const int M = static_cast<int>(history.pi.front().size());
    const int stored = static_cast<int>(history.pi.size());
    for (int i = 0; i < stored; ++i) {
        if (i % stride != 0 && i != stored - 1) continue;
        std::vector<double> row{static_cast<double>(trial),
                                static_cast<double>(history.round_index[i])};
        for (int m = 0; m < M; ++m) row.push_back(history.theta[i][m]);
        for (int m = 0; m < M; ++m) row.push_back(history.pi[i][m]);
        row.push_back(history.v_rho[i]);
        row.push_back(history.delta[i]);
        row.push_back(history.grad_norm[i]);
        row.push_back(history.cbar[i]);
        if (estimated) {
            row.push_back(history.value_estimate[i]);
            row.push_back(history.grad_norm_estimate[i]);
        }
        table.rows.push_back(std::move(row));
    }
}

std::vector<std::string> direct_pg_columns(int M) {
    std::vector<std::string> cols{"trial", "t"};
    for (int m = 1; m <= M; ++m) cols.push_back("pi_" + std::to_string(m));
    cols.insert(cols.end(), {"chosen_m", "reward", "instant_regret", "cum_regret"});
    return cols;
}

void append_direct_rows(Table& table, int trial, const DirectPgHistory& history, int stride) {
    const int M = static_cast<int>(history.pi.front().size());
    for (int t = 0; t < history.rounds(); ++t) {
        if (t % stride != 0 && t != history.rounds() - 1) continue;
        std::vector<double> row{static_cast<double>(trial), static_cast<double>(t + 1)};
        for (int m = 0; m < M; ++m) row.push_back(history.pi[t][m]);
        row.push_back(static_cast<double>(history.chosen_controller[t]));
        row.push_back(history.reward[t]);
        row.push_back(history.instant_regret[t]);
        row.push_back(history.cumulative_regret[t]);
        table.rows.push_back(std::move(row));
    }
}

// ------------------------------------------------------------------
// Random tabular instances for the verifier suite
// ------------------------------------------------------------------

struct RandomInstance {
    FiniteMdp mdp;
    ControllerSet controllers;
};

Vector random_distribution(int n, RngStream& rng, double floor_mass) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = -std::log(rng.uniform_pos()) + floor_mass;
    const double total = v.sum();
    v /= total;
    // Renormalize exactly so constructor tolerances hold.
    v[n - 1] = 1.0 - v.head(n - 1).sum();
    return v;
}

Matrix random_row_stochastic(int rows, int cols, RngStream& rng, double floor_mass) {
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        m.row(r) = random_distribution(cols, rng, floor_mass).transpose();
    }
    return m;
}

RandomInstance random_instance(RngStream& rng, int max_states = 10, int max_actions = 5,
                               int max_controllers = 5) {
    auto draw = [&](int max_value) {
        return max_value <= 1
                   ? 1
                   : 2 + static_cast<int>(
                             rng.uniform_index(static_cast<std::uint64_t>(max_value - 1)));
    };
    const int S = draw(max_states);
    const int A = draw(max_actions);
    const int M = draw(max_controllers);
    const double gamma = rng.uniform(0.5, 0.95);

    std::vector<Matrix> transition;
    transition.reserve(static_cast<std::size_t>(A));
    for (int a = 0; a < A; ++a) transition.push_back(random_row_stochastic(S, S, rng, 0.05));
    Matrix reward(S, A);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) reward(s, a) = rng.uniform();
    }
    Vector rho = random_distribution(S, rng, 0.3);

    std::vector<Matrix> controllers;
    controllers.reserve(static_cast<std::size_t>(M));
    for (int m = 0; m < M; ++m) controllers.push_back(random_row_stochastic(S, A, rng, 0.05));

    return {FiniteMdp(std::move(transition), reward, gamma, rho),
            ControllerSet(std::move(controllers))};
}

Vector finite_difference_gradient(const FiniteMdp& mdp, const ControllerSet& controllers,
                                  const Vector& theta, const Vector& mu, double h = 1e-5) {
    Vector grad(theta.size());
    for (int m = 0; m < theta.size(); ++m) {
        Vector up = theta, down = theta;
        up[m] += h;
        down[m] -= h;
        const double v_up = evaluate_policy(mdp, controllers, up, mu).value_mu;
        const double v_down = evaluate_policy(mdp, controllers, down, mu).value_mu;
        grad[m] = (v_up - v_down) / (2.0 * h);
    }
    return grad;
}

// ------------------------------------------------------------------
// nonconcavity
// ------------------------------------------------------------------

RunRecord run_nonconcavity(const ExperimentConfig& cfg) {
    RunRecord record;
    const double r = 1.0;
    auto [mdp, controllers] = envs::make_nonconcavity_example(r);

    Vector e1(2), e2(2), mid(2);
    e1 << 1.0, 0.0;
    e2 << 0.0, 1.0;
    mid << 0.5, 0.5;
    const double v1 = evaluate_mixture(mdp, controllers, e1, mdp.mu()).value_rho;
    const double v2 = evaluate_mixture(mdp, controllers, e2, mdp.mu()).value_rho;
    const double vm = evaluate_mixture(mdp, controllers, mid, mdp.mu()).value_rho;
    const bool softmax_cert = envs::softmax_nonconcavity_check(r, 0.1);

    Table table;
    table.name = cfg.experiment;
    table.columns = {"mixture_on_first", "value_start_state"};
    table.rows = {{1.0, v1}, {0.0, v2}, {0.5, vm}};
    record.tables.push_back(table);

    record.summary.push_back("corner values: " + format_double(v1) + ", " + format_double(v2) +
                             "; midpoint: " + format_double(vm));
    record.summary.push_back(std::string("non-concave: ") +
                             ((v1 + v2) / 2.0 > vm && softmax_cert ? "true" : "false"));

    record.checks.push_back(make_check("corner value r/16", std::abs(v1 - r / 16.0) <= 1e-10,
                                       format_double(v1)));
    record.checks.push_back(make_check("corner value 9r/16", std::abs(v2 - 9.0 * r / 16.0) <= 1e-10,
                                       format_double(v2)));
    record.checks.push_back(
        make_check("midpoint value r/4", std::abs(vm - r / 4.0) <= 1e-10, format_double(vm)));
    record.checks.push_back(make_check("midpoint inequality 10r/32 > r/4",
                                       (v1 + v2) / 2.0 > vm + r / 64.0,
                                       format_double((v1 + v2) / 2.0 - vm)));
    record.checks.push_back(make_check("softmax midpoint certificate", softmax_cert, ""));
    return record;
}

// ------------------------------------------------------------------
// chain
// ------------------------------------------------------------------

RunRecord run_chain(const ExperimentConfig& cfg) {
    RunRecord record;
    const double gamma = 0.9;
    auto [mdp, controllers] = envs::make_chain(gamma);
    const int trials = cfg.trials >= 1 ? cfg.trials : 20;
    const int rounds = cfg.rounds >= 1 ? cfg.rounds : 150;

    Vector even(2), e1(2), e2(2);
    even << 0.5, 0.5;
    e1 << 1.0, 0.0;
    e2 << 0.0, 1.0;
    const double v_even = evaluate_mixture(mdp, controllers, even, mdp.mu()).value_rho;
    const double v_k1 = evaluate_mixture(mdp, controllers, e1, mdp.mu()).value_rho;
    const double v_k2 = evaluate_mixture(mdp, controllers, e2, mdp.mu()).value_rho;
    const double enum_even = envs::truncated_expansion_value(mdp, controllers, even, 0);
    const double enum_k1 = envs::truncated_expansion_value(mdp, controllers, e1, 0);

    record.summary.push_back("solver values: mixture " + format_double(v_even) + ", corners " +
                             format_double(v_k1) + " / " + format_double(v_k2));
    record.summary.push_back(
        "printed closed forms (reported, not gating): single " +
        format_double(envs::chain_printed_single_value(gamma)) + ", mixture " +
        format_double(envs::chain_printed_mixture_value(gamma)));
    record.summary.push_back("construction closed forms: single " +
                             format_double(envs::chain_single_controller_value(gamma)) +
                             ", mixture " + format_double(envs::chain_even_mixture_value(gamma)));

    const BestInClass best = best_in_class(mdp, controllers, mdp.rho(), 1.0 / 200.0);

    // Learning runs on the simulator.
    std::vector<bool> terminal(10, false);
    terminal[9] = true;
    std::vector<PgHistory> histories(static_cast<std::size_t>(trials));
    const FiniteMdp& mdp_ref = mdp;
    const ControllerSet& controllers_ref = controllers;
    parallel_for(trials, cfg.workers, [&](int trial) {
        envs::TabularEnv env(mdp_ref, controllers_ref, terminal);
        SpgeConfig spge;
        spge.learning_rate = 1e-4;
        spge.horizon = rounds;
        spge.pi_star = even;
        spge.v_star = best.v_star;
        spge.exact_value = [&](const Vector& pi) {
            const PolicyEvaluation eval = evaluate_mixture(mdp_ref, controllers_ref, pi, mdp_ref.mu());
            return std::make_pair(eval.value_rho, eval.value_mu);
        };
        GradEstConfig gradest;  // defaults: alpha 1/sqrt(10), 10 runs, 10 rollouts, lt 30
        RngStream rng(derive_trial_seed(cfg.seed, "chain", trial));
        histories[static_cast<std::size_t>(trial)] = spge_run(env, spge, gradest, rng);
    });

    Table table;
    table.name = cfg.experiment;
    table.columns = pg_columns(2, true);
    for (int trial = 0; trial < trials; ++trial) {
        append_pg_rows(table, trial, histories[static_cast<std::size_t>(trial)], 1, true);
    }
    record.tables.push_back(std::move(table));

    Vector mean_final = Vector::Zero(2);
    for (const auto& h : histories) mean_final += h.pi.back();
    mean_final /= trials;
    record.summary.push_back("mean final mixture: (" + format_double(mean_final[0]) + ", " +
                             format_double(mean_final[1]) + ")");

    record.checks.push_back(make_check(
        "expansion oracle matches solver",
        std::abs(enum_even - v_even) <= 1e-8 && std::abs(enum_k1 - v_k1) <= 1e-8,
        "mixture gap " + format_double(enum_even - v_even)));
    record.checks.push_back(make_check("mixture strictly dominates corners",
                                       v_even > v_k1 + 1e-6 && v_even > v_k2 + 1e-6,
                                       format_double(v_even - v_k1)));
    record.checks.push_back(make_check(
        "grid oracle finds the even mixture",
        (best.pi_star - even).lpNorm<Eigen::Infinity>() <= 1.0 / 200.0 + 1e-9,
        "pi_star = (" + format_double(best.pi_star[0]) + ", " + format_double(best.pi_star[1]) +
            ")"));
    record.checks.push_back(make_check(
        "mean final mixture within 0.1 of even",
        std::abs(mean_final[0] - 0.5) <= 0.1 && std::abs(mean_final[1] - 0.5) <= 0.1,
        format_double(mean_final[0])));
    return record;
}

// ------------------------------------------------------------------
// bandit-exact
// ------------------------------------------------------------------

BanditInstance standard_bandit(int M) {
    Vector means(M);
    for (int m = 0; m < M; ++m) {
        means[m] = M == 1 ? 0.9 : 0.9 - 0.8 * m / (M - 1);  // 0.9 down to 0.1
    }
    Matrix controllers = Matrix::Identity(M, M);
    return BanditInstance(means, controllers, 0.9);
}

RunRecord run_bandit_exact(const ExperimentConfig& cfg) {
    RunRecord record;
    const int rounds = cfg.rounds >= 1 ? cfg.rounds : 10000;

    for (int M : {2, 5}) {
        const BanditInstance instance = standard_bandit(M);
        const PgHistory history = bandit_exact_pg(instance, rounds);
        const std::vector<double> regret = regret_series(history.pi, instance);

        bool delta_ok = true, monotone_ok = true, regret_ok = true;
        double worst_margin = std::numeric_limits<double>::infinity();
        for (int t = 0; t < history.rounds(); ++t) {
            const double bound = bandit_suboptimality_bound(M, instance.gamma(), t + 1);
            worst_margin = std::min(worst_margin, bound - history.delta[t]);
            if (history.delta[t] > bound) delta_ok = false;
            if (t > 0 && history.pi[t][instance.best_controller()] <
                             history.pi[t - 1][instance.best_controller()] - 1e-12) {
                monotone_ok = false;
            }
            if (t >= 1 &&
                regret[static_cast<std::size_t>(t)] >
                    bandit_regret_envelope(M, instance.gamma(), t + 1)) {
                regret_ok = false;
            }
        }
        double inf_mass = std::numeric_limits<double>::infinity();
        for (const auto& pi : history.pi) {
            inf_mass = std::min(inf_mass, pi[instance.best_controller()]);
        }

        const std::string tag = "M=" + std::to_string(M);
        record.checks.push_back(make_check("suboptimality bound holds (" + tag + ")", delta_ok,
                                           "worst margin " + format_double(worst_margin)));
        record.checks.push_back(
            make_check("best-controller mass nondecreasing (" + tag + ")", monotone_ok, ""));
        record.checks.push_back(make_check(
            "infimum mass equals 1/M (" + tag + ")",
            std::abs(inf_mass - 1.0 / M) <= 1e-10, format_double(inf_mass)));
        record.checks.push_back(make_check("regret under envelope (" + tag + ")", regret_ok,
                                           "R(T) = " + format_double(regret.back())));

        Table table;
        table.name = cfg.experiment + "_M" + std::to_string(M);
        table.columns = pg_columns(M, false);
        append_pg_rows(table, 0, history, std::max(1, rounds / 2000), false);
        record.tables.push_back(std::move(table));
        record.summary.push_back(tag + ": final delta " + format_double(history.delta.back()) +
                                 ", regret " + format_double(regret.back()) + ", inf mass " +
                                 format_double(inf_mass));
    }
    return record;
}

// ------------------------------------------------------------------
// bandit-noisy
// ------------------------------------------------------------------

RunRecord run_bandit_noisy(const ExperimentConfig& cfg) {
    RunRecord record;
    const int trials = cfg.trials >= 1 ? cfg.trials : 20;
    const int rounds = cfg.rounds >= 1 ? cfg.rounds : 100000;
    const int mid_horizon = std::min(10000, rounds);

    Vector means(2);
    means << 0.9, 0.1;
    const BanditInstance instance(means, Matrix::Identity(2, 2), 0.9);
    const double alpha = 0.9 * std::min(1.0, alpha_threshold(instance));

    std::vector<DirectPgHistory> histories(static_cast<std::size_t>(trials));
    std::vector<std::string> failures(static_cast<std::size_t>(trials));
    parallel_for(trials, cfg.workers, [&](int trial) {
        RngStream rng(derive_trial_seed(cfg.seed, "bandit-noisy", trial));
        try {
            histories[static_cast<std::size_t>(trial)] =
                projection_free_pg(instance, alpha, rounds, rng);
        } catch (const std::exception& e) {
            failures[static_cast<std::size_t>(trial)] = e.what();
        }
    });

    std::vector<double> final_mass, ratio_mid, ratio_end;
    Table table;
    table.name = cfg.experiment;
    table.columns = direct_pg_columns(2);
    for (int trial = 0; trial < trials; ++trial) {
        const auto& failure = failures[static_cast<std::size_t>(trial)];
        if (!failure.empty()) {
            record.errors.push_back("trial " + std::to_string(trial) + ": " + failure);
            continue;
        }
        const auto& h = histories[static_cast<std::size_t>(trial)];
        final_mass.push_back(h.pi.back()[instance.best_controller()]);
        ratio_mid.push_back(h.cumulative_regret[static_cast<std::size_t>(mid_horizon - 1)] /
                            std::log(static_cast<double>(mid_horizon)));
        ratio_end.push_back(h.cumulative_regret.back() / std::log(static_cast<double>(rounds)));
        append_direct_rows(table, trial, h, std::max(1, rounds / 1000));
    }
    record.tables.push_back(std::move(table));

    const double constant = direct_pg_regret_constant(instance, alpha);
    record.summary.push_back("alpha = " + format_double(alpha) + ", regret constant " +
                             format_double(constant));
    record.summary.push_back("median final best mass " + format_double(median(final_mass)));
    record.summary.push_back("median R(T)/log T: mid " + format_double(median(ratio_mid)) +
                             ", end " + format_double(median(ratio_end)));

    record.checks.push_back(make_check("simplex preserved every round", record.errors.empty(),
                                       std::to_string(record.errors.size()) + " failures"));
    record.checks.push_back(make_check("median final best mass >= 0.99",
                                       median(final_mass) >= 0.99,
                                       format_double(median(final_mass))));
    record.checks.push_back(make_check(
        "median regret ratio within factor 3 (mid horizon)",
        median(ratio_mid) <= 3.0 * constant, format_double(median(ratio_mid))));
    record.checks.push_back(make_check(
        "median regret ratio within factor 3 (full horizon)",
        median(ratio_end) <= 3.0 * constant, format_double(median(ratio_end))));
    return record;
}

// ------------------------------------------------------------------
// queue2 (stationary) and the nonstationary variant
// ------------------------------------------------------------------

struct QueueRunResult {
    std::vector<PgHistory> histories;
    Vector mean_final;
};

QueueRunResult run_two_queue_learning(const ExperimentConfig& cfg, const std::string& tag,
                                      const envs::TwoQueueConfig& env_config, int trials,
                                      int rounds) {
    QueueRunResult result;
    result.histories.resize(static_cast<std::size_t>(trials));
    parallel_for(trials, cfg.workers, [&](int trial) {
        envs::TwoQueueEnv env(env_config, {envs::QueueController::serve(0),
                                           envs::QueueController::serve(1)});
        SpgeConfig spge;
        spge.learning_rate = 1e-4;
        spge.horizon = rounds;
        spge.pi_star = Vector::Constant(2, 0.5);
        GradEstConfig gradest;
        RngStream rng(derive_trial_seed(cfg.seed, tag, trial));
        result.histories[static_cast<std::size_t>(trial)] = spge_run(env, spge, gradest, rng);
    });
    result.mean_final = Vector::Zero(2);
    for (const auto& h : result.histories) result.mean_final += h.pi.back();
    result.mean_final /= trials;
    return result;
}

RunRecord run_queue2(const ExperimentConfig& cfg) {
    RunRecord record;
    const int trials = cfg.trials >= 1 ? cfg.trials : 20;
    const int rounds = cfg.rounds >= 1 ? cfg.rounds : 6000;

    envs::TwoQueueConfig symmetric;
    symmetric.arrival_schedule = {{0.49, 0.49}};
    const QueueRunResult sym =
        run_two_queue_learning(cfg, "queue2-sym", symmetric, trials, std::min(rounds, 2000));

    envs::TwoQueueConfig asymmetric;
    asymmetric.arrival_schedule = {{0.30, 0.60}};
    const QueueRunResult asym = run_two_queue_learning(cfg, "queue2-asym", asymmetric, trials, rounds);

    // The controller that always serves queue 1 leaves queue 2 growing at its
    // arrival rate; its discounted backlog has a closed-form bound.
    const double gamma = 0.9;
    const double bound = envs::expert_backlog_bound(0.49, gamma);
    std::vector<double> simulated(static_cast<std::size_t>(trials));
    parallel_for(trials, cfg.workers, [&](int trial) {
        envs::TwoQueueEnv env(symmetric, {envs::QueueController::serve(0),
                                          envs::QueueController::serve(1)});
        Vector pure(2);
        pure << 1.0, 0.0;
        RngStream rng(derive_trial_seed(cfg.seed, "queue2-expert", trial));
        simulated[static_cast<std::size_t>(trial)] = -rollout_return(env, pure, 300, gamma, rng);
    });
    const double sim_mean = mean_of(simulated);
    const double sim_ci = 3.0 * sample_std(simulated) / std::sqrt(static_cast<double>(trials));

    for (const auto* part : {&sym, &asym}) {
        Table table;
        table.name = cfg.experiment + (part == &sym ? "_sym" : "_asym");
        table.columns = pg_columns(2, true);
        for (int trial = 0; trial < trials; ++trial) {
            append_pg_rows(table, trial, part->histories[static_cast<std::size_t>(trial)],
                           std::max(1, rounds / 500), true);
        }
        record.tables.push_back(std::move(table));
    }

    record.summary.push_back("symmetric mean final mixture: (" + format_double(sym.mean_final[0]) +
                             ", " + format_double(sym.mean_final[1]) + ")");
    record.summary.push_back("asymmetric mean final mixture: (" +
                             format_double(asym.mean_final[0]) + ", " +
                             format_double(asym.mean_final[1]) + ")");
    record.summary.push_back("always-serve-first discounted backlog: analytic bound " +
                             format_double(bound) + ", simulated " + format_double(sim_mean) +
                             " +- " + format_double(sim_ci));

    record.checks.push_back(make_check(
        "symmetric rates: mean final mixture within 0.1 of even",
        std::abs(sym.mean_final[0] - 0.5) <= 0.1 && std::abs(sym.mean_final[1] - 0.5) <= 0.1,
        format_double(sym.mean_final[0])));
    record.checks.push_back(make_check("asymmetric rates: second controller mass exceeds 0.7",
                                       asym.mean_final[1] > 0.7,
                                       format_double(asym.mean_final[1])));
    record.checks.push_back(make_check("analytic backlog bound equals 44.1",
                                       std::abs(bound - 44.1) <= 1e-12, format_double(bound)));
    record.checks.push_back(make_check("simulated backlog respects the bound",
                                       sim_mean <= bound + sim_ci,
                                       format_double(sim_mean) + " vs " + format_double(bound)));
    return record;
}

RunRecord run_queue2_nonstationary(const ExperimentConfig& cfg) {
    RunRecord record;
    const int trials = cfg.trials >= 1 ? cfg.trials : 20;
    const int rounds = cfg.rounds >= 1 ? cfg.rounds : 7500;

    envs::TwoQueueConfig config;
    config.arrival_schedule = {{0.30, 0.60}, {0.60, 0.30}, {0.49, 0.49}};
    config.rounds_per_phase = rounds / 3;

    QueueRunResult result = run_two_queue_learning(cfg, "queue2-ns", config, trials, rounds);

    Table table;
    table.name = cfg.experiment;
    table.columns = pg_columns(2, true);
    for (int trial = 0; trial < trials; ++trial) {
        append_pg_rows(table, trial, result.histories[static_cast<std::size_t>(trial)],
                       std::max(1, rounds / 500), true);
    }
    record.tables.push_back(std::move(table));

    for (int phase = 1; phase <= 3; ++phase) {
        const int t_end = std::min(phase * config.rounds_per_phase, rounds) - 1;
        Vector mean = Vector::Zero(2);
        for (const auto& h : result.histories) mean += h.pi[static_cast<std::size_t>(t_end)];
        mean /= trials;
        record.summary.push_back("phase " + std::to_string(phase) + " end mixture: (" +
                                 format_double(mean[0]) + ", " + format_double(mean[1]) + ")");
    }
    return record;
}

// ------------------------------------------------------------------
// pathgraph
// ------------------------------------------------------------------

std::vector<envs::PathController> path_controllers() {
    return {envs::PathController::max_weight(), envs::PathController::max_egress(),
            envs::PathController::fixed({0, 2}), envs::PathController::fixed({1, 3}),
            envs::PathController::fixed({0, 3})};
}

RunRecord run_pathgraph(const ExperimentConfig& cfg) {
    RunRecord record;
    const int delay_trials = 200;
    const int delay_horizon = 320;
    const int trials = cfg.trials >= 1 ? cfg.trials : 20;
    const int rounds = cfg.rounds >= 1 ? cfg.rounds : 100000;

    envs::PathGraphConfig delay_config;  // defaults: 4 queues, 0.495 arrivals, empty start
    envs::PathGraphEnv delay_env(delay_config, path_controllers());

    // Common random numbers: the same arrival stream drives every controller.
    const int num_controllers = delay_env.num_controllers();
    Matrix delays(delay_trials, num_controllers);
    parallel_for(delay_trials, cfg.workers, [&](int trial) {
        for (int c = 0; c < num_controllers; ++c) {
            RngStream rng(derive_trial_seed(cfg.seed, "pathgraph-delay", trial));
            const auto trace = delay_env.simulate_packet_trace(c, delay_horizon, rng);
            delays(trial, c) = envs::mean_delay(trace);
        }
    });
    const Vector mean_delays = delays.colwise().mean();

    Table delay_table;
    delay_table.name = cfg.experiment + "_delay";
    delay_table.columns = {"trial", "t", "delay_MW", "delay_MER", "delay_13", "delay_24",
                           "delay_14"};
    for (int trial = 0; trial < delay_trials; ++trial) {
        std::vector<double> row{static_cast<double>(trial), 1.0};
        for (int c = 0; c < num_controllers; ++c) row.push_back(delays(trial, c));
        delay_table.rows.push_back(std::move(row));
    }
    record.tables.push_back(std::move(delay_table));

    // One packet trace dump for reference.
    {
        RngStream rng(derive_trial_seed(cfg.seed, "pathgraph-delay", 0));
        const auto trace = delay_env.simulate_packet_trace(1, delay_horizon, rng);
        Table trace_table;
        trace_table.name = cfg.experiment + "_trace";
        trace_table.columns = {"packet_id", "queue", "arrival_t", "departure_t"};
        for (const auto& p : trace) {
            trace_table.rows.push_back({static_cast<double>(p.id), static_cast<double>(p.queue),
                                        p.arrival, p.departure});
        }
        record.tables.push_back(std::move(trace_table));
    }

    // Learning. The one-point estimator's noise per coordinate scales like
    // M |V| / (alpha sqrt(#runs)), so this experiment decouples alpha from
    // #runs and spends its budget on runs with one rollout each.
    envs::PathGraphConfig learn_config;
    std::vector<PgHistory> histories(static_cast<std::size_t>(trials));
    parallel_for(trials, cfg.workers, [&](int trial) {
        envs::PathGraphEnv env(learn_config, path_controllers());
        SpgeConfig spge;
        spge.learning_rate = 1.1e-4;
        spge.horizon = rounds;
        spge.log_stride = std::max(1, rounds / 400);
        Vector star = Vector::Zero(5);
        star[1] = 1.0;
        spge.pi_star = star;
        GradEstConfig gradest;
        gradest.alpha = 0.45;
        gradest.num_runs = 50;
        gradest.num_rollouts = 1;
        gradest.rollout_horizon = 30;
        gradest.validation_rollouts = 4;
        RngStream rng(derive_trial_seed(cfg.seed, "pathgraph-learn", trial));
        histories[static_cast<std::size_t>(trial)] = spge_run(env, spge, gradest, rng);
    });

    Table learn_table;
    learn_table.name = cfg.experiment;
    learn_table.columns = pg_columns(5, true);
    for (int trial = 0; trial < trials; ++trial) {
        append_pg_rows(learn_table, trial, histories[static_cast<std::size_t>(trial)], 1, true);
    }
    record.tables.push_back(std::move(learn_table));

    Vector mean_final = Vector::Zero(5);
    for (const auto& h : histories) mean_final += h.pi.back();
    mean_final /= trials;

    std::ostringstream probs;
    probs << "mean final mixture:";
    for (int c = 0; c < 5; ++c) probs << ' ' << format_double(mean_final[c]);
    record.summary.push_back(probs.str());
    record.summary.push_back("mean delays (MW, MER, {1,3}, {2,4}, {1,4}): " +
                             format_double(mean_delays[0]) + ", " + format_double(mean_delays[1]) +
                             ", " + format_double(mean_delays[2]) + ", " +
                             format_double(mean_delays[3]) + ", " + format_double(mean_delays[4]));

    bool ordering = mean_delays[1] < mean_delays[0];
    for (int c = 2; c < 5; ++c) ordering = ordering && mean_delays[0] < mean_delays[c];
    record.checks.push_back(make_check("mean delay ordering MER < MW < fixed sets", ordering,
                                       format_double(mean_delays[1]) + " / " +
                                           format_double(mean_delays[0])));
    record.checks.push_back(make_check("max-egress mass exceeds 0.9", mean_final[1] > 0.9,
                                       format_double(mean_final[1])));
    return record;
}

// ------------------------------------------------------------------
// cartpole + switched-system stability
// ------------------------------------------------------------------

RunRecord run_cartpole(const ExperimentConfig& cfg) {
    RunRecord record;
    const int draws = cfg.trials >= 1 ? cfg.trials : 10;
    const int spge_rounds = cfg.rounds >= 1 ? cfg.rounds : 25;
    const int uptime_episodes = 20;

    // dt = 0.05 keeps the loop fast enough for the gain perturbations to
    // matter; at 0.02 every uptime difference drowns in the state noise.
    const double dt = 0.05;
    const envs::LinearSystem system = envs::make_pendulum({}, dt);
    const envs::DareResult dare =
        envs::solve_dare(system.a_discrete, system.b_discrete, Matrix::Identity(4, 4), 1.0);

    struct DrawResult {
        Vector learned_pi;
        double uptime_mix = 0.0, uptime_k1 = 0.0, uptime_k2 = 0.0;
        double epls_estimate = 0.0, epls_bound = 0.0;
        double exponent_k1 = 0.0, exponent_k2 = 0.0;
        std::string error;
    };
    std::vector<DrawResult> results(static_cast<std::size_t>(draws));

    parallel_for(draws, cfg.workers, [&](int draw) {
        DrawResult& out = results[static_cast<std::size_t>(draw)];
        try {
            RngStream draw_rng(derive_trial_seed(cfg.seed, "cartpole", draw));
            Vector delta(4);
            for (int i = 0; i < 4; ++i) delta[i] = std::sqrt(0.1) * draw_rng.normal();
            const Vector k1 = dare.gain + delta;
            const Vector k2 = dare.gain - delta;

            envs::CartpoleConfig env_config;
            env_config.dt = dt;
            envs::CartpoleEnv env(env_config, system, {k1, k2});
            SpgeConfig spge;
            spge.learning_rate = 1e-4;
            spge.horizon = spge_rounds;
            spge.rescale = true;  // pendulum runs scale the estimate to norm 10
            GradEstConfig gradest;
            RngStream learn_rng = draw_rng.child(1);
            const PgHistory history = spge_run(env, spge, gradest, learn_rng);
            out.learned_pi = history.pi.back();

            RngStream eval_rng = draw_rng.child(2);
            Vector e1(2), e2(2);
            e1 << 1.0, 0.0;
            e2 << 0.0, 1.0;
            double mix = 0.0, u1 = 0.0, u2 = 0.0;
            for (int ep = 0; ep < uptime_episodes; ++ep) {
                RngStream ep_rng = eval_rng.child(static_cast<std::uint64_t>(ep));
                RngStream r1 = ep_rng.child(0), r2 = ep_rng.child(1), r3 = ep_rng.child(2);
                mix += env.uptime(out.learned_pi, r1);
                u1 += env.uptime(e1, r2);
                u2 += env.uptime(e2, r3);
            }
            out.uptime_mix = mix / uptime_episodes;
            out.uptime_k1 = u1 / uptime_episodes;
            out.uptime_k2 = u2 / uptime_episodes;

            const std::vector<Matrix> loops = {
                envs::closed_loop(system.a_discrete, system.b_discrete, k1),
                envs::closed_loop(system.a_discrete, system.b_discrete, k2)};
            Vector p(2);
            p << 0.53, 0.47;
            out.epls_bound = envs::switched_norm_bound(loops, p);
            std::vector<double> estimates;
            for (int seed = 0; seed < 20; ++seed) {
                RngStream epls_rng = draw_rng.child(3).child(static_cast<std::uint64_t>(seed));
                estimates.push_back(envs::switched_lyapunov_estimate(
                    loops, p, Vector::Ones(4), 10000, epls_rng));
            }
            out.epls_estimate = median(estimates);
            out.exponent_k1 = std::log(envs::spectral_radius(loops[0]));
            out.exponent_k2 = std::log(envs::spectral_radius(loops[1]));
        } catch (const std::exception& e) {
            out.error = e.what();
        }
    });

    Table table;
    table.name = cfg.experiment;
    table.columns = {"trial",      "t",          "pi_1",        "pi_2",        "uptime_mix",
                     "uptime_k1",  "uptime_k2",  "epls_est",    "epls_bound",  "exp_k1",
                     "exp_k2"};
    int ordering_hits = 0, epls_hits = 0, stabilized = 0, valid = 0;
    for (int draw = 0; draw < draws; ++draw) {
        const DrawResult& r = results[static_cast<std::size_t>(draw)];
        if (!r.error.empty()) {
            record.errors.push_back("draw " + std::to_string(draw) + ": " + r.error);
            continue;
        }
        ++valid;
        table.rows.push_back({static_cast<double>(draw), 1.0, r.learned_pi[0], r.learned_pi[1],
                              r.uptime_mix, r.uptime_k1, r.uptime_k2, r.epls_estimate,
                              r.epls_bound, r.exponent_k1, r.exponent_k2});
        if (r.uptime_mix >= r.uptime_k1 && r.uptime_mix >= r.uptime_k2) ++ordering_hits;
        if (r.epls_estimate <= r.epls_bound + 0.05) ++epls_hits;
        if (r.epls_estimate < 0.0 && std::max(r.exponent_k1, r.exponent_k2) > 0.0) ++stabilized;
    }
    record.tables.push_back(std::move(table));

    record.summary.push_back("draws where learned mixture matches or beats both pure gains: " +
                             std::to_string(ordering_hits) + "/" + std::to_string(valid));
    record.summary.push_back(
        "draws where the mixture exponent is negative while some pure exponent is positive: " +
        std::to_string(stabilized) + "/" + std::to_string(valid));

    record.checks.push_back(make_check(
        "switching exponent respects the log-norm bound",
        valid > 0 && epls_hits == valid,
        std::to_string(epls_hits) + "/" + std::to_string(valid)));
    record.checks.push_back(make_check(
        "learned mixture at least matches both pure controllers on 80% of draws",
        valid > 0 && ordering_hits >= static_cast<int>(std::ceil(0.8 * valid)),
        std::to_string(ordering_hits) + "/" + std::to_string(valid)));
    return record;
}

// ------------------------------------------------------------------
// theory-checks
// ------------------------------------------------------------------

RunRecord run_theory_checks(const ExperimentConfig& cfg) {
    RunRecord record;
    RngStream root(cfg.seed, {fnv1a64("theory-checks")});

    // Gradient against central finite differences.
    {
        RngStream rng = root.child(1);
        double worst = 0.0;
        for (int i = 0; i < 50; ++i) {
            RandomInstance inst = random_instance(rng);
            Vector theta(inst.controllers.size());
            for (int m = 0; m < theta.size(); ++m) theta[m] = rng.normal();
            const Vector grad =
                value_gradient(inst.mdp, inst.controllers, theta, inst.mdp.mu());
            const Vector fd =
                finite_difference_gradient(inst.mdp, inst.controllers, theta, inst.mdp.mu());
            const double rel = (grad - fd).norm() / std::max(fd.norm(), 1e-12);
            worst = std::max(worst, rel);
        }
        record.summary.push_back("gradient vs finite differences, worst relative error " +
                                 format_double(worst));
        record.checks.push_back(make_check("gradient matches finite differences (50 instances)",
                                           worst <= 1e-6, format_double(worst)));
    }

    // Both value-difference expansions.
    {
        RngStream rng = root.child(2);
        double worst = 0.0;
        for (int i = 0; i < 50; ++i) {
            RandomInstance inst = random_instance(rng);
            Vector theta(inst.controllers.size()), theta_prime(inst.controllers.size());
            for (int m = 0; m < theta.size(); ++m) {
                theta[m] = rng.normal();
                theta_prime[m] = rng.normal();
            }
            const int anchor =
                static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(inst.mdp.num_states())));
            Vector point = Vector::Zero(inst.mdp.num_states());
            point[anchor] = 1.0;
            const double direct =
                evaluate_policy(inst.mdp, inst.controllers, theta_prime, point).value[anchor] -
                evaluate_policy(inst.mdp, inst.controllers, theta, point).value[anchor];
            const ValueDifferenceSides sides =
                value_difference_sides(inst.mdp, inst.controllers, theta, theta_prime, anchor);
            worst = std::max(worst, std::abs(sides.via_new_visitation - direct));
            worst = std::max(worst, std::abs(sides.via_old_visitation - direct));
        }
        record.summary.push_back("value-difference identities, worst absolute error " +
                                 format_double(worst));
        record.checks.push_back(make_check("value-difference identities hold (50 draws)",
                                           worst <= 1e-9, format_double(worst)));
    }

    // Smoothness witnesses, the single-state constant, and the ascent guarantee.
    {
        RngStream rng = root.child(3);
        double worst_witness = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < 100; ++i) {
            RandomInstance inst = random_instance(rng);
            Vector theta(inst.controllers.size());
            for (int m = 0; m < theta.size(); ++m) theta[m] = rng.normal();
            Vector direction(theta.size());
            for (int m = 0; m < theta.size(); ++m) direction[m] = rng.normal();
            direction *= rng.uniform() / std::max(direction.norm(), 1e-12);
            worst_witness = std::max(
                worst_witness,
                smoothness_witness(inst.mdp, inst.controllers, theta, theta + direction));
        }
        record.checks.push_back(make_check("smoothness witness nonpositive (100 draws)",
                                           worst_witness <= 1e-10,
                                           format_double(worst_witness)));

        double worst_bandit = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < 100; ++i) {
            RandomInstance inst = random_instance(rng, 1, 5, 5);
            const double beta = 5.0 / (2.0 * (1.0 - inst.mdp.gamma()));
            Vector theta(inst.controllers.size());
            for (int m = 0; m < theta.size(); ++m) theta[m] = rng.normal();
            Vector direction(theta.size());
            for (int m = 0; m < theta.size(); ++m) direction[m] = rng.normal();
            direction *= rng.uniform() / std::max(direction.norm(), 1e-12);
            worst_bandit = std::max(
                worst_bandit, smoothness_witness(inst.mdp, inst.controllers, theta,
                                                 theta + direction, beta));
        }
        record.checks.push_back(make_check(
            "single-state smoothness constant 5/(2(1-gamma)) (100 draws)",
            worst_bandit <= 1e-10, format_double(worst_bandit)));

        int ascent_ok = 0;
        for (int i = 0; i < 100; ++i) {
            RandomInstance inst = random_instance(rng);
            Vector theta(inst.controllers.size());
            for (int m = 0; m < theta.size(); ++m) theta[m] = rng.normal();
            if (ascent_check(inst.mdp, inst.controllers, theta,
                             safe_learning_rate(inst.mdp.gamma()))) {
                ++ascent_ok;
            }
        }
        record.checks.push_back(make_check("ascent improvement holds (100 draws)",
                                           ascent_ok == 100, std::to_string(ascent_ok) + "/100"));
    }

    // Gradient-domination inequality behind the convergence rate.
    {
        RngStream rng = root.child(4);
        int tested = 0, held = 0;
        for (int inst_index = 0; inst_index < 10; ++inst_index) {
            RandomInstance inst = random_instance(rng, 6, 4, 3);
            const BestInClass best =
                best_in_class(inst.mdp, inst.controllers, inst.mdp.rho(), 1.0 / 50.0);
            for (int k = 0; k < 10; ++k) {
                Vector theta(inst.controllers.size());
                for (int m = 0; m < theta.size(); ++m) theta[m] = rng.normal();
                if (k >= 5) {
                    // Bias half the draws toward the optimum where the
                    // drift condition is more likely to hold.
                    for (int m = 0; m < theta.size(); ++m) {
                        theta[m] = std::log(best.pi_star[m] + 0.05) + 0.3 * rng.normal();
                    }
                }
                const LojasiewiczGap gap =
                    lojasiewicz_gap(inst.mdp, inst.controllers, theta, inst.mdp.mu(),
                                    inst.mdp.rho(), best.pi_star);
                if (!gap.assumption_holds) continue;
                ++tested;
                if (gap.lhs >= gap.rhs - 1e-10) ++held;
            }
        }
        record.summary.push_back("gradient-domination draws passing the drift filter: " +
                                 std::to_string(tested));
        record.checks.push_back(make_check(
            "gradient-domination inequality on filtered draws",
            tested > 0 && held == tested,
            std::to_string(held) + "/" + std::to_string(tested)));
    }

    // Convergence-rate trajectories.
    {
        RngStream rng = root.child(5);
        const int horizon = cfg.rounds >= 1 ? cfg.rounds : 5000;
        int instances_checked = 0;
        bool all_monotone = true, all_bounded = true;

        auto check_trajectory = [&](const FiniteMdp& mdp, const ControllerSet& controllers) {
            const BestInClass best = best_in_class(mdp, controllers, mdp.rho(), 1.0 / 100.0);
            PgRunConfig config;
            config.horizon = horizon;
            config.v_star = best.v_star;
            config.pi_star = best.pi_star;
            const PgHistory history = softmax_pg_run(mdp, controllers, config);

            const PolicyEvaluation star_eval =
                evaluate_mixture(mdp, controllers, best.pi_star, mdp.mu());
            double ratio_norm = 0.0, inv_mu = 0.0;
            for (int s = 0; s < mdp.num_states(); ++s) {
                ratio_norm = std::max(ratio_norm, star_eval.visitation_mu[s] / mdp.mu()[s]);
                inv_mu = std::max(inv_mu, 1.0 / mdp.mu()[s]);
            }
            const double c_measured = history.cbar_final;
            for (int t = 0; t < history.rounds(); ++t) {
                if (t > 0 && history.delta[t] > history.delta[t - 1] + 1e-10) all_monotone = false;
                const double bound =
                    suboptimality_bound(controllers.size(), mdp.gamma(), t + 1, c_measured,
                                        ratio_norm, inv_mu);
                if (history.delta[t] > bound) all_bounded = false;
            }
            ++instances_checked;
        };

        {
            // Interior start measure keeps the bound's norms finite.
            auto [mdp_raw, controllers] = envs::make_nonconcavity_example(1.0);
            Vector mu(5);
            mu << 0.9, 0.025, 0.025, 0.025, 0.025;
            FiniteMdp mdp(mdp_raw.transition(), mdp_raw.reward(), mdp_raw.gamma(), mu, mu, true);
            check_trajectory(mdp, controllers);
        }
        int accepted = 0;
        while (accepted < 5) {
            RandomInstance inst = random_instance(rng, 6, 4, 3);
            // Keep instances where the optimal mixture's drift stays
            // nonnegative along the whole trajectory.
            const BestInClass best =
                best_in_class(inst.mdp, inst.controllers, inst.mdp.rho(), 1.0 / 50.0);
            PgRunConfig probe;
            probe.horizon = 200;
            probe.v_star = best.v_star;
            probe.pi_star = best.pi_star;
            const PgHistory trial_run = softmax_pg_run(inst.mdp, inst.controllers, probe);
            bool assumption_ok = true;
            for (int t = 0; t < trial_run.rounds() && assumption_ok; t += 10) {
                const PolicyEvaluation eval = evaluate_mixture(
                    inst.mdp, inst.controllers, trial_run.pi[static_cast<std::size_t>(t)],
                    inst.mdp.mu());
                if (!((eval.advantage * best.pi_star).array() >= -1e-12).all()) {
                    assumption_ok = false;
                }
            }
            if (!assumption_ok) continue;
            check_trajectory(inst.mdp, inst.controllers);
            ++accepted;
        }

        record.summary.push_back("convergence trajectories checked: " +
                                 std::to_string(instances_checked));
        record.checks.push_back(
            make_check("suboptimality nonincreasing along trajectories", all_monotone, ""));
        record.checks.push_back(make_check("suboptimality under the rate bound", all_bounded, ""));
    }

    // Estimator statistics.
    {
        RngStream rng = root.child(6);
        GradEstConfig gradest;

        // Zero rewards give an exactly zero estimate.
        {
            std::vector<Matrix> transition(2, Matrix::Identity(2, 2));
            Matrix reward = Matrix::Zero(2, 2);
            Vector rho = Vector::Constant(2, 0.5);
            FiniteMdp mdp(transition, reward, 0.9, rho);
            std::vector<Matrix> ks(2, Matrix::Constant(2, 2, 0.5));
            envs::TabularEnv env(mdp, ControllerSet(ks));
            RngStream sub = rng.child(0);
            const Vector grad = estimate_gradient(env, Vector::Ones(2), gradest, sub);
            record.checks.push_back(make_check("estimator exactly zero on zero rewards",
                                               grad.lpNorm<Eigen::Infinity>() == 0.0,
                                               format_double(grad.norm())));
        }

        // Constant value: the estimate has zero mean.
        {
            std::vector<Matrix> transition(1, Matrix::Identity(1, 1));
            Matrix reward = Matrix::Constant(1, 1, 1.0);
            Vector rho = Vector::Ones(1);
            FiniteMdp mdp(transition, reward, 0.9, rho);
            std::vector<Matrix> ks(3, Matrix::Ones(1, 1));
            envs::TabularEnv env(mdp, ControllerSet(ks));
            Matrix estimates(200, 3);
            for (int rep = 0; rep < 200; ++rep) {
                RngStream sub = rng.child(static_cast<std::uint64_t>(100 + rep));
                estimates.row(rep) =
                    estimate_gradient(env, Vector::Ones(3), gradest, sub).transpose();
            }
            bool pass = true;
            double worst = 0.0;
            for (int m = 0; m < 3; ++m) {
                std::vector<double> column(estimates.col(m).data(),
                                           estimates.col(m).data() + 200);
                const double m_abs = std::abs(mean_of(column));
                const double limit = 3.0 * sample_std(column) / std::sqrt(200.0);
                worst = std::max(worst, m_abs - limit);
                if (m_abs > limit) pass = false;
            }
            record.checks.push_back(make_check("estimator mean zero on constant value",
                                               pass, format_double(worst)));
        }

        // Agreement with the truncated-horizon gradient on a single state.
        {
            Vector means(2);
            means << 0.9, 0.1;
            std::vector<Matrix> transition(2, Matrix::Identity(1, 1));
            Matrix reward(1, 2);
            reward << 0.9, 0.1;
            FiniteMdp mdp(transition, reward, 0.9, Vector::Ones(1));
            std::vector<Matrix> ks;
            Matrix k1(1, 2), k2(1, 2);
            k1 << 1.0, 0.0;
            k2 << 0.0, 1.0;
            envs::TabularEnv env(mdp, ControllerSet({k1, k2}));

            GradEstConfig big = gradest;
            big.alpha = 0.05;
            big.num_runs = 500;
            big.num_rollouts = 10;
            Vector theta(2);
            theta << 0.3, -0.2;
            const int reps = 40;
            Matrix samples(reps, 2);
            for (int rep = 0; rep < reps; ++rep) {
                RngStream sub = rng.child(static_cast<std::uint64_t>(1000 + rep));
                samples.row(rep) = estimate_gradient(env, theta, big, sub).transpose();
            }
            // Truncated-horizon value gradient in closed form.
            const double horizon_scale =
                (1.0 - std::pow(big.gamma, big.rollout_horizon + 1)) / (1.0 - big.gamma);
            const Vector pi = softmax(theta);
            Vector v(2);
            v << 0.9, 0.1;
            const double mean_v = pi.dot(v);
            Vector exact(2);
            for (int m = 0; m < 2; ++m) exact[m] = horizon_scale * pi[m] * (v[m] - mean_v);

            bool pass = true;
            double worst = 0.0;
            for (int m = 0; m < 2; ++m) {
                std::vector<double> column(samples.col(m).data(), samples.col(m).data() + reps);
                const double se = sample_std(column) / std::sqrt(static_cast<double>(reps));
                const double err = std::abs(mean_of(column) - exact[m]);
                worst = std::max(worst, err - 3.0 * se);
                if (err > 3.0 * se) pass = false;
            }
            record.checks.push_back(make_check(
                "estimator agrees with truncated exact gradient (3 standard errors)", pass,
                format_double(worst)));
        }
    }

    Table table;
    table.name = cfg.experiment;
    table.columns = {"check_index", "passed"};
    for (std::size_t i = 0; i < record.checks.size(); ++i) {
        table.rows.push_back({static_cast<double>(i), record.checks[i].passed ? 1.0 : 0.0});
    }
    record.tables.push_back(std::move(table));
    return record;
}

}  // namespace

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {
        "nonconcavity", "chain",        "bandit-exact",        "bandit-noisy", "queue2",
        "queue2-nonstationary", "pathgraph", "cartpole", "theory-checks"};
    return names;
}

RunRecord run_experiment(const ExperimentConfig& cfg) {
    RunRecord record;
    if (cfg.experiment == "nonconcavity") {
        record = run_nonconcavity(cfg);
    } else if (cfg.experiment == "chain") {
        record = run_chain(cfg);
    } else if (cfg.experiment == "bandit-exact") {
        record = run_bandit_exact(cfg);
    } else if (cfg.experiment == "bandit-noisy") {
        record = run_bandit_noisy(cfg);
    } else if (cfg.experiment == "queue2") {
        record = run_queue2(cfg);
    } else if (cfg.experiment == "queue2-nonstationary") {
        record = run_queue2_nonstationary(cfg);
    } else if (cfg.experiment == "pathgraph") {
        record = run_pathgraph(cfg);
    } else if (cfg.experiment == "cartpole") {
        record = run_cartpole(cfg);
    } else if (cfg.experiment == "theory-checks") {
        record = run_theory_checks(cfg);
    } else {
        throw std::invalid_argument("run_experiment: unknown experiment '" + cfg.experiment + "'");
    }

    std::filesystem::create_directories(cfg.out_dir);
    for (const auto& table : record.tables) {
        emit_csv(table, cfg.out_dir + "/" + table.name + ".csv");
        if (table.columns.size() >= 2 && table.columns[0] == "trial" && table.columns[1] == "t") {
            emit_csv(aggregate(table), cfg.out_dir + "/" + table.name + "_agg.csv");
        }
    }
    return record;
}

}  // namespace improper::harness
