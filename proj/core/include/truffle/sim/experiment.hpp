#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "truffle/result.hpp"
#include "truffle/sim/cluster.hpp"
#include "truffle/sim/record.hpp"

namespace truffle::sim {

/// A measurement sweep: one cluster shape driven across a grid of input
/// sizes and added cold-start delays, each point repeated and run under the
/// requested data-passing modes.  Parsed from a JSON document that combines
/// the cluster keys (see ClusterConfig) with: workload, input_sizes_mb,
/// added_delays_ms, repetitions, modes.
struct ExperimentConfig {
    std::string workload;  ///< label stamped on every output row
    std::vector<std::uint64_t> input_sizes_mb;
    std::vector<std::int64_t> added_delays_ms = {0};
    int repetitions = 3;
    std::vector<Mode> modes = {Mode::baseline, Mode::truffle};
    ClusterConfig cluster;

    static Result<ExperimentConfig> parse(const std::string& json_text);
    Result<void> validate() const;

    /// The cluster for one delay point: the sweep delay stacks onto each
    /// function's own added_delay_ms.
    ClusterConfig cluster_config(std::int64_t added_delay_ms) const;
};

/// Mean and population standard deviation of a sample set.
struct RunStats {
    double mean = 0.0;
    double stddev = 0.0;
    int count = 0;
};

RunStats summarize(const std::vector<double>& samples);

/// Latency win of truffle over baseline, as a percentage of baseline.
/// Nonpositive baselines yield 0 (nothing meaningful to compare against).
double improvement_pct(double baseline_mean, double truffle_mean);

/// Share of the baseline's on-critical-path IO wait that truffle still
/// pays.  Nonpositive baseline IO yields 0.
double io_ratio(double baseline_io_mean, double truffle_io_mean);

/// One line of results.csv / results.json.  improvement_pct and io_ratio
/// are only meaningful where both modes ran: baseline rows carry the
/// identity values (0, 1), truffle rows without a baseline twin carry
/// nothing (empty CSV cell, JSON null).
struct ResultRow {
    std::string workload;
    StorageKind storage_kind = StorageKind::direct;
    std::uint64_t size_mb = 0;
    std::int64_t added_delay_ms = 0;
    Mode mode = Mode::baseline;
    double mean_ms = 0.0;
    double stddev_ms = 0.0;
    std::optional<double> improvement_pct;
    std::optional<double> io_ratio;
};

std::string results_csv(const std::vector<ResultRow>& rows);
std::string results_json(const std::vector<ResultRow>& rows);

/// What a sweep produced beyond its files.
struct ExperimentReport {
    std::vector<ResultRow> rows;
    int grid_points = 0;   ///< (size, delay) combinations attempted
    int runs = 0;          ///< individual workflow invocations
    int failed_runs = 0;
    /// True when some (point, mode) ended with zero successful repetitions,
    /// so its row is absent from the results.
    bool missing_data = false;
};

/// Runs the full sweep.  Writes results.csv, results.json, and records.json
/// (every repetition's raw measurement) under out_dir, creating it if
/// needed.  `parallel` runs grid points concurrently — faster, but sleeps
/// contend, so treat timings as smoke only.  Progress goes to `log`.
///
/// Errors are reserved for unusable configs and unwritable output; failed
/// measurement runs are counted and preserved in the report instead.
Result<ExperimentReport> run_experiment(const ExperimentConfig& config,
                                        const std::string& out_dir, bool parallel,
                                        std::ostream& log);

}  // namespace truffle::sim
