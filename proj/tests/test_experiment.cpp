#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "truffle/sim/experiment.hpp"

using namespace truffle;
using namespace truffle::sim;

namespace {

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

/// Self-cleaning output directory under the system temp root.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        std::random_device entropy;
        path = std::filesystem::temp_directory_path() /
               ("truffle-exp-" + std::to_string(entropy()));
    }
    ~TempDir() {
        std::error_code ignored;
        std::filesystem::remove_all(path, ignored);
    }
};

/// One cold function, aggressively compressed clock: a full grid stays in
/// the tens of milliseconds.
std::string tiny_sweep_json(const char* extra = "") {
    std::string text = R"({
        "workload": "smoke",
        "input_sizes_mb": [1],
        "added_delays_ms": [0, 100],
        "repetitions": 2,
        "nodes": 2,
        "scale_factor": 0.02,
        "scheduling_ms": 20,
        "functions": [
            {"name": "f1", "cold_start_ms": 300, "compute_ms": 10,
             "placement": "node1"}
        ])";
    text += extra;
    text += "}";
    return text;
}

}  // namespace

TEST_CASE("summarize computes mean and population stddev") {
    auto empty = summarize({});
    CHECK(empty.count == 0);
    CHECK(empty.mean == 0.0);
    CHECK(empty.stddev == 0.0);

    auto single = summarize({42.0});
    CHECK(single.count == 1);
    CHECK(single.mean == doctest::Approx(42.0));
    CHECK(single.stddev == doctest::Approx(0.0));

    auto spread = summarize({1.0, 2.0, 3.0, 4.0});
    CHECK(spread.count == 4);
    CHECK(spread.mean == doctest::Approx(2.5));
    CHECK(spread.stddev == doctest::Approx(std::sqrt(1.25)));
}

TEST_CASE("improvement percentages match hand-computed anchors") {
    // Two-stage workflow, 128 MiB over an object store vs. the overlapped
    // runs: 4353 -> 2697 and 3701 -> 2697, worked out by hand.
    CHECK(improvement_pct(4353.0, 2697.0) == doctest::Approx(38.04).epsilon(0.001));
    CHECK(improvement_pct(3701.0, 2697.0) == doctest::Approx(27.13).epsilon(0.001));
    CHECK(improvement_pct(100.0, 100.0) == doctest::Approx(0.0));
    CHECK(improvement_pct(100.0, 150.0) == doctest::Approx(-50.0));  // regression
    CHECK(improvement_pct(0.0, 50.0) == 0.0);
    CHECK(improvement_pct(-3.0, 50.0) == 0.0);
}

TEST_CASE("io_ratio guards the empty-baseline case") {
    CHECK(io_ratio(100.0, 25.0) == doctest::Approx(0.25));
    CHECK(io_ratio(1291.0, 0.0) == doctest::Approx(0.0));
    CHECK(io_ratio(0.0, 17.0) == 0.0);
}

TEST_CASE("experiment config parses the sweep keys over the cluster keys") {
    auto parsed = ExperimentConfig::parse(tiny_sweep_json(R"(,
        "modes": ["truffle"],
        "storage_kind": "kvs")"));
    REQUIRE(parsed.ok());
    const auto& config = parsed.value();
    CHECK(config.workload == "smoke");
    CHECK(config.input_sizes_mb == std::vector<std::uint64_t>{1});
    CHECK(config.added_delays_ms == std::vector<std::int64_t>({0, 100}));
    CHECK(config.repetitions == 2);
    REQUIRE(config.modes.size() == 1);
    CHECK(config.modes.front() == Mode::truffle);
    CHECK(config.cluster.storage_kind == StorageKind::kvs);
    CHECK(config.cluster.nodes == 2);
    CHECK(config.cluster.scale_factor == doctest::Approx(0.02));
}

TEST_CASE("experiment config defaults delays, repetitions, and modes") {
    auto parsed = ExperimentConfig::parse(R"({
        "workload": "w", "input_sizes_mb": [8],
        "functions": [{"name": "f1"}]})");
    REQUIRE(parsed.ok());
    CHECK(parsed.value().added_delays_ms == std::vector<std::int64_t>{0});
    CHECK(parsed.value().repetitions == 3);
    REQUIRE(parsed.value().modes.size() == 2);
    CHECK(parsed.value().modes[0] == Mode::baseline);
    CHECK(parsed.value().modes[1] == Mode::truffle);
}

TEST_CASE("experiment config rejects unusable sweeps") {
    auto expect_rejected = [](const std::string& text) {
        auto parsed = ExperimentConfig::parse(text);
        REQUIRE_MESSAGE(!parsed.ok(), text);
        CHECK(parsed.error().code == Errc::config_error);
    };
    expect_rejected(R"({"input_sizes_mb": [1],
                        "functions": [{"name": "f1"}]})");  // no workload
    expect_rejected(R"({"workload": "w",
                        "functions": [{"name": "f1"}]})");  // no sizes
    expect_rejected(R"({"workload": "w", "input_sizes_mb": [-1],
                        "functions": [{"name": "f1"}]})");
    expect_rejected(R"({"workload": "w", "input_sizes_mb": [1],
                        "added_delays_ms": [-5],
                        "functions": [{"name": "f1"}]})");
    expect_rejected(R"({"workload": "w", "input_sizes_mb": [1],
                        "repetitions": 0,
                        "functions": [{"name": "f1"}]})");
    expect_rejected(R"({"workload": "w", "input_sizes_mb": [1],
                        "modes": ["baseline", "baseline"],
                        "functions": [{"name": "f1"}]})");
    expect_rejected(R"({"workload": "w", "input_sizes_mb": [1],
                        "modes": ["turbo"],
                        "functions": [{"name": "f1"}]})");
    expect_rejected(R"({"workload": "w", "input_sizes_mb": [1],
                        "modes": [],
                        "functions": [{"name": "f1"}]})");
    // Cluster-level problems surface through the same gate.
    expect_rejected(R"({"workload": "w", "input_sizes_mb": [1],
                        "functions": [{"name": "f1", "placement": "node9"}]})");
}

TEST_CASE("sweep delays stack onto per-function delays") {
    auto parsed = ExperimentConfig::parse(tiny_sweep_json());
    REQUIRE(parsed.ok());
    auto config = parsed.value();
    config.cluster.functions[0].added_delay_ms = 250;

    auto materialized = config.cluster_config(1000);
    CHECK(materialized.functions[0].added_delay_ms == 1250);
    // The original stays untouched for the next grid point.
    CHECK(config.cluster.functions[0].added_delay_ms == 250);
    CHECK(config.cluster_config(0).functions[0].added_delay_ms == 250);
}

TEST_CASE("csv rows carry the exact column set") {
    ResultRow baseline;
    baseline.workload = "chain";
    baseline.storage_kind = StorageKind::object_store;
    baseline.size_mb = 128;
    baseline.added_delay_ms = 2000;
    baseline.mode = Mode::baseline;
    baseline.mean_ms = 4190.125;
    baseline.stddev_ms = 12.5;
    baseline.improvement_pct = 0.0;
    baseline.io_ratio = 1.0;

    ResultRow truffle = baseline;
    truffle.mode = Mode::truffle;
    truffle.mean_ms = 2530.0;
    truffle.stddev_ms = 8.25;
    truffle.improvement_pct = 39.617;
    truffle.io_ratio = 0.012;

    ResultRow orphan = truffle;  // truffle row with no baseline twin
    orphan.improvement_pct.reset();
    orphan.io_ratio.reset();

    const auto csv = results_csv({baseline, truffle, orphan});
    std::istringstream lines(csv);
    std::string line;
    REQUIRE(std::getline(lines, line));
    CHECK(line ==
          "workload,storage_kind,size_mb,added_delay_ms,mode,mean_ms,stddev_ms,"
          "improvement_pct,io_ratio");
    REQUIRE(std::getline(lines, line));
    CHECK(line == "chain,object_store,128,2000,baseline,4190.125,12.500,0.000,1.000");
    REQUIRE(std::getline(lines, line));
    CHECK(line == "chain,object_store,128,2000,truffle,2530.000,8.250,39.617,0.012");
    REQUIRE(std::getline(lines, line));
    CHECK(line == "chain,object_store,128,2000,truffle,2530.000,8.250,,");
    CHECK(!std::getline(lines, line));
}

TEST_CASE("json rows map missing comparisons to null") {
    ResultRow row;
    row.workload = "w";
    row.mode = Mode::truffle;
    row.mean_ms = 10.0;

    const auto doc = nlohmann::json::parse(results_json({row}));
    REQUIRE(doc.size() == 1);
    CHECK(doc[0]["improvement_pct"].is_null());
    CHECK(doc[0]["io_ratio"].is_null());
    CHECK(doc[0]["mode"] == "truffle");
    CHECK(doc[0]["mean_ms"].get<double>() == doctest::Approx(10.0));
}

TEST_CASE("a full sweep writes rows, records, and stats") {
    auto parsed = ExperimentConfig::parse(tiny_sweep_json());
    REQUIRE(parsed.ok());
    TempDir out;
    std::ostringstream log;

    auto report = run_experiment(parsed.value(), out.path.string(), false, log);
    REQUIRE(report.ok());
    CHECK(report.value().grid_points == 2);
    CHECK(report.value().runs == 8);  // 2 points x 2 modes x 2 reps
    CHECK(report.value().failed_runs == 0);
    CHECK(!report.value().missing_data);
    REQUIRE(report.value().rows.size() == 4);

    // Grid order: per point, baseline first, then truffle.
    const auto& rows = report.value().rows;
    CHECK(rows[0].added_delay_ms == 0);
    CHECK(rows[0].mode == Mode::baseline);
    CHECK(rows[1].added_delay_ms == 0);
    CHECK(rows[1].mode == Mode::truffle);
    CHECK(rows[2].added_delay_ms == 100);
    CHECK(rows[3].added_delay_ms == 100);
    for (const auto& row : rows) {
        CHECK(row.mean_ms > 0.0);
        REQUIRE(row.improvement_pct.has_value());
        REQUIRE(row.io_ratio.has_value());
    }
    CHECK(*rows[0].improvement_pct == 0.0);
    CHECK(*rows[0].io_ratio == 1.0);

    // Every artifact landed and re-parses.
    const auto csv = slurp(out.path / "results.csv");
    CHECK(csv.find("workload,storage_kind") == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

    const auto results = nlohmann::json::parse(slurp(out.path / "results.json"));
    CHECK(results.size() == 4);

    const auto records = nlohmann::json::parse(slurp(out.path / "records.json"));
    REQUIRE(records.size() == 8);
    for (const auto& entry : records) {
        CHECK(entry.contains("size_mb"));
        CHECK(entry.contains("added_delay_ms"));
        CHECK(entry.contains("mode"));
        CHECK(entry["record"]["failed"] == false);
        CHECK(entry["record"]["functions"].size() == 1);
    }

    // The log narrates one line per run.
    CHECK(log.str().find("smoke size_mb=1 delay_ms=0 mode=baseline rep=0") !=
          std::string::npos);
    CHECK(log.str().find("mode=truffle rep=1") != std::string::npos);
}

TEST_CASE("a truffle-only sweep leaves comparisons empty") {
    auto parsed = ExperimentConfig::parse(tiny_sweep_json(R"(,
        "modes": ["truffle"])"));
    REQUIRE(parsed.ok());
    auto config = parsed.value();
    config.added_delays_ms = {0};
    config.repetitions = 1;
    TempDir out;
    std::ostringstream log;

    auto report = run_experiment(config, out.path.string(), false, log);
    REQUIRE(report.ok());
    REQUIRE(report.value().rows.size() == 1);
    CHECK(!report.value().rows.front().improvement_pct.has_value());
    CHECK(!report.value().rows.front().io_ratio.has_value());
}

TEST_CASE("parallel sweeps produce the same grid in the same order") {
    auto parsed = ExperimentConfig::parse(tiny_sweep_json());
    REQUIRE(parsed.ok());
    auto config = parsed.value();
    config.repetitions = 1;
    TempDir out;
    std::ostringstream log;

    auto report = run_experiment(config, out.path.string(), true, log);
    REQUIRE(report.ok());
    REQUIRE(report.value().rows.size() == 4);
    CHECK(report.value().rows[0].added_delay_ms == 0);
    CHECK(report.value().rows[2].added_delay_ms == 100);
    CHECK(report.value().runs == 4);
}

TEST_CASE("run_experiment refuses bad configs and unwritable outputs") {
    ExperimentConfig invalid;  // no workload, no sizes, no functions
    TempDir out;
    std::ostringstream log;
    auto report = run_experiment(invalid, out.path.string(), false, log);
    REQUIRE(!report.ok());
    CHECK(report.error().code == Errc::config_error);

    auto parsed = ExperimentConfig::parse(tiny_sweep_json());
    REQUIRE(parsed.ok());
    auto config = parsed.value();
    config.repetitions = 1;
    auto blocked =
        run_experiment(config, "/proc/definitely/not/writable", false, log);
    REQUIRE(!blocked.ok());
    CHECK(blocked.error().code == Errc::config_error);
}
