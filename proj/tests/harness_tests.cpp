#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "improper/harness.hpp"

using namespace improper;
using namespace improper::harness;

TEST_CASE("aggregate means and unbiased deviations") {
    Table raw;
    raw.name = "x";
    raw.columns = {"trial", "t", "v"};
    raw.rows = {{0, 1, 0.0}, {0, 2, 5.0}, {1, 1, 2.0}, {1, 2, 7.0}};
    const Table agg = aggregate(raw);
    CHECK(agg.columns == std::vector<std::string>{"t", "mean_v", "std_v"});
    REQUIRE(agg.rows.size() == 2);
    CHECK(agg.rows[0][0] == 1.0);
    CHECK(agg.rows[0][1] == doctest::Approx(1.0));
    CHECK(agg.rows[0][2] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(agg.rows[1][1] == doctest::Approx(6.0));

    // Identical trials collapse to zero deviation.
    Table same;
    same.name = "y";
    same.columns = {"trial", "t", "v"};
    same.rows = {{0, 1, 3.0}, {1, 1, 3.0}, {2, 1, 3.0}};
    CHECK(aggregate(same).rows[0][2] == 0.0);

    // A single trial warns and reports zero deviation.
    Table single;
    single.name = "z";
    single.columns = {"trial", "t", "v"};
    single.rows = {{0, 1, 3.0}};
    bool warn = false;
    const Table agg_single = aggregate(single, &warn);
    CHECK(warn);
    CHECK(agg_single.rows[0][2] == 0.0);
}

TEST_CASE("csv round trip is bit exact") {
    Table table;
    table.name = "roundtrip";
    table.columns = {"trial", "t", "value"};
    table.rows = {{0, 1, 1.0 / 3.0}, {0, 2, -1.2345678912345678e-101}, {1, 1, 6.02214076e23}};
    const std::string path = "roundtrip_test.csv";
    emit_csv(table, path);
    const Table parsed = parse_csv(path);
    REQUIRE(parsed.columns == table.columns);
    REQUIRE(parsed.rows.size() == table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        for (std::size_t c = 0; c < table.columns.size(); ++c) {
            CHECK(parsed.rows[r][c] == table.rows[r][c]);  // exact, not approximate
        }
    }
    std::remove(path.c_str());

    // Header-only file for an empty table.
    Table empty;
    empty.name = "empty";
    empty.columns = {"a", "b"};
    emit_csv(empty, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "a,b");
    CHECK_FALSE(std::getline(in, line));
    in.close();
    std::remove(path.c_str());
}

TEST_CASE("trial seeds differ across trials and experiments") {
    const auto a = derive_trial_seed(1, "queue2", 0);
    const auto b = derive_trial_seed(1, "queue2", 1);
    const auto c = derive_trial_seed(1, "chain", 0);
    const auto d = derive_trial_seed(2, "queue2", 0);
    CHECK(a != b);
    CHECK(a != c);
    CHECK(a != d);
    CHECK(derive_trial_seed(1, "queue2", 0) == a);
}

TEST_CASE("parallel_for covers every index regardless of worker count") {
    for (int workers : {1, 2, 4}) {
        std::vector<int> hits(100, 0);
        parallel_for(100, workers, [&](int i) { hits[static_cast<std::size_t>(i)] += 1; });
        for (int h : hits) CHECK(h == 1);
    }
}

TEST_CASE("config file loading and cli merge") {
    const std::string path = "config_test.json";
    {
        std::ofstream out(path);
        out << R"({"experiment": "chain", "seed": 99, "trials": 3, "rounds": 7, "out": "d"})";
    }
    ExperimentConfig cfg = load_config(path);
    CHECK(cfg.experiment == "chain");
    CHECK(cfg.seed == 99);
    CHECK(cfg.trials == 3);
    CHECK(cfg.rounds == 7);
    CHECK(cfg.out_dir == "d");

    ExperimentConfig overrides;
    overrides.trials = 5;
    overrides.run_checks = true;
    cfg = merge_cli(cfg, overrides);
    CHECK(cfg.trials == 5);
    CHECK(cfg.rounds == 7);
    CHECK(cfg.run_checks);
    std::remove(path.c_str());
}

TEST_CASE("unknown experiment is rejected") {
    ExperimentConfig cfg;
    cfg.experiment = "nope";
    CHECK_THROWS_AS(run_experiment(cfg), std::invalid_argument);
}

TEST_CASE("experiment runs are byte-identical across worker counts") {
    const std::string dir_a = "determinism_a";
    const std::string dir_b = "determinism_b";

    ExperimentConfig cfg;
    cfg.experiment = "chain";
    cfg.seed = 5;
    cfg.trials = 3;
    cfg.rounds = 8;
    cfg.workers = 1;
    cfg.out_dir = dir_a;
    run_experiment(cfg);

    cfg.workers = 2;
    cfg.out_dir = dir_b;
    run_experiment(cfg);

    int compared = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir_a)) {
        const auto name = entry.path().filename();
        std::ifstream fa(entry.path(), std::ios::binary);
        std::ifstream fb(std::filesystem::path(dir_b) / name, std::ios::binary);
        REQUIRE(fb.good());
        std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
        std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
        CHECK(ca == cb);
        ++compared;
    }
    CHECK(compared >= 2);  // raw plus aggregate
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
}
