#include "truffle/sim/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <mutex>

#include <json.hpp>

namespace truffle::sim {

namespace {

std::string fixed3(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.3f", value);
    return buffer;
}

/// Everything one (size, delay) grid point yields.
struct PointOutcome {
    std::vector<ResultRow> rows;
    std::vector<nlohmann::json> records;
    int runs = 0;
    int failed_runs = 0;
    bool missing_data = false;
};

PointOutcome run_point(const ExperimentConfig& config, std::uint64_t size_mb,
                       std::int64_t delay_ms, std::ostream& log,
                       std::mutex& log_mu) {
    PointOutcome outcome;
    auto note = [&](const std::string& line) {
        std::lock_guard lock(log_mu);
        log << line << "\n" << std::flush;
    };
    const std::string point_label = config.workload +
                                    " size_mb=" + std::to_string(size_mb) +
                                    " delay_ms=" + std::to_string(delay_ms);

    auto cluster = Cluster::deploy(config.cluster_config(delay_ms));
    if (!cluster.ok()) {
        note(point_label + " deploy failed: " + cluster.error().detail);
        outcome.runs = outcome.failed_runs =
            config.repetitions * static_cast<int>(config.modes.size());
        outcome.missing_data = true;
        return outcome;
    }
    auto& sim = *cluster.value();

    std::optional<RunStats> baseline_latency;
    std::optional<RunStats> baseline_io;
    for (Mode mode : config.modes) {
        std::vector<double> latencies;
        std::vector<double> io_waits;
        for (int rep = 0; rep < config.repetitions; ++rep) {
            auto record = sim.invoke_workflow(size_mb, mode);
            ++outcome.runs;
            nlohmann::json entry;
            entry["size_mb"] = size_mb;
            entry["added_delay_ms"] = delay_ms;
            entry["mode"] = std::string(to_string(mode));
            entry["record"] = nlohmann::json::parse(record.to_json());
            outcome.records.push_back(std::move(entry));

            if (record.failed) {
                ++outcome.failed_runs;
                note(point_label + " mode=" + std::string(to_string(mode)) +
                     " rep=" + std::to_string(rep) +
                     " FAILED: " + record.failure_detail);
                continue;
            }
            latencies.push_back(record.end_to_end_ms);
            io_waits.push_back(record.io_critical_path_ms);
            note(point_label + " mode=" + std::string(to_string(mode)) +
                 " rep=" + std::to_string(rep) +
                 " end_to_end_ms=" + fixed3(record.end_to_end_ms) +
                 " io_ms=" + fixed3(record.io_critical_path_ms));
        }

        if (latencies.empty()) {
            outcome.missing_data = true;
            continue;
        }
        const RunStats latency = summarize(latencies);
        const RunStats io = summarize(io_waits);

        ResultRow row;
        row.workload = config.workload;
        row.storage_kind = config.cluster.storage_kind;
        row.size_mb = size_mb;
        row.added_delay_ms = delay_ms;
        row.mode = mode;
        row.mean_ms = latency.mean;
        row.stddev_ms = latency.stddev;
        if (mode == Mode::baseline) {
            row.improvement_pct = 0.0;
            row.io_ratio = 1.0;
            baseline_latency = latency;
            baseline_io = io;
        } else if (baseline_latency.has_value()) {
            row.improvement_pct =
                improvement_pct(baseline_latency->mean, latency.mean);
            row.io_ratio = io_ratio(baseline_io->mean, io.mean);
        }
        outcome.rows.push_back(std::move(row));
    }
    return outcome;
}

Result<void> write_file(const std::filesystem::path& path,
                        const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out.good()) {
        return {Errc::config_error, "cannot write " + path.string()};
    }
    return {};
}

}  // namespace

Result<ExperimentConfig> ExperimentConfig::parse(const std::string& json_text) {
    const auto doc = nlohmann::json::parse(json_text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        return {Errc::config_error, "experiment config is not a JSON object"};
    }

    ExperimentConfig config;
    if (!doc.contains("workload") || !doc["workload"].is_string()) {
        return {Errc::config_error, "workload must name the sweep"};
    }
    config.workload = doc["workload"].get<std::string>();

    if (!doc.contains("input_sizes_mb") || !doc["input_sizes_mb"].is_array()) {
        return {Errc::config_error, "input_sizes_mb must be an array"};
    }
    for (const auto& size : doc["input_sizes_mb"]) {
        if (!size.is_number_integer() || size.get<std::int64_t>() < 0) {
            return {Errc::config_error, "input sizes must be integers >= 0"};
        }
        config.input_sizes_mb.push_back(size.get<std::uint64_t>());
    }

    if (doc.contains("added_delays_ms")) {
        if (!doc["added_delays_ms"].is_array()) {
            return {Errc::config_error, "added_delays_ms must be an array"};
        }
        config.added_delays_ms.clear();
        for (const auto& delay : doc["added_delays_ms"]) {
            if (!delay.is_number_integer() || delay.get<std::int64_t>() < 0) {
                return {Errc::config_error, "added delays must be integers >= 0"};
            }
            config.added_delays_ms.push_back(delay.get<std::int64_t>());
        }
    }

    if (doc.contains("repetitions")) {
        if (!doc["repetitions"].is_number_integer()) {
            return {Errc::config_error, "repetitions must be an integer"};
        }
        config.repetitions = doc["repetitions"].get<int>();
    }

    if (doc.contains("modes")) {
        if (!doc["modes"].is_array()) {
            return {Errc::config_error, "modes must be an array"};
        }
        config.modes.clear();
        for (const auto& mode : doc["modes"]) {
            if (!mode.is_string()) {
                return {Errc::config_error, "modes must be strings"};
            }
            auto parsed = parse_mode(mode.get<std::string>());
            if (!parsed.ok()) {
                return {Errc::config_error, parsed.error().detail};
            }
            for (Mode existing : config.modes) {
                if (existing == parsed.value()) {
                    return {Errc::config_error,
                            "mode listed twice: " + mode.get<std::string>()};
                }
            }
            config.modes.push_back(parsed.value());
        }
    }

    auto cluster = ClusterConfig::parse(json_text);
    if (!cluster.ok()) {
        return cluster.error();
    }
    config.cluster = std::move(cluster.value());

    if (auto valid = config.validate(); !valid.ok()) {
        return valid.error();
    }
    return config;
}

Result<void> ExperimentConfig::validate() const {
    if (workload.empty()) {
        return {Errc::config_error, "workload must be non-empty"};
    }
    if (input_sizes_mb.empty()) {
        return {Errc::config_error, "input_sizes_mb must be non-empty"};
    }
    if (added_delays_ms.empty()) {
        return {Errc::config_error, "added_delays_ms must be non-empty"};
    }
    if (repetitions < 1) {
        return {Errc::config_error, "repetitions must be >= 1"};
    }
    if (modes.empty()) {
        return {Errc::config_error, "modes must be non-empty"};
    }
    return cluster.validate();
}

ClusterConfig ExperimentConfig::cluster_config(std::int64_t added_delay_ms) const {
    ClusterConfig materialized = cluster;
    for (auto& fn : materialized.functions) {
        fn.added_delay_ms += added_delay_ms;
    }
    return materialized;
}

RunStats summarize(const std::vector<double>& samples) {
    RunStats stats;
    stats.count = static_cast<int>(samples.size());
    if (samples.empty()) {
        return stats;
    }
    double sum = 0.0;
    for (double sample : samples) {
        sum += sample;
    }
    stats.mean = sum / static_cast<double>(samples.size());
    double squares = 0.0;
    for (double sample : samples) {
        squares += (sample - stats.mean) * (sample - stats.mean);
    }
    stats.stddev = std::sqrt(squares / static_cast<double>(samples.size()));
    return stats;
}

double improvement_pct(double baseline_mean, double truffle_mean) {
    if (baseline_mean <= 0.0) {
        return 0.0;
    }
    return 100.0 * (1.0 - truffle_mean / baseline_mean);
}

double io_ratio(double baseline_io_mean, double truffle_io_mean) {
    if (baseline_io_mean <= 0.0) {
        return 0.0;
    }
    return truffle_io_mean / baseline_io_mean;
}

std::string results_csv(const std::vector<ResultRow>& rows) {
    std::string csv =
        "workload,storage_kind,size_mb,added_delay_ms,mode,mean_ms,stddev_ms,"
        "improvement_pct,io_ratio\n";
    for (const auto& row : rows) {
        csv += row.workload;
        csv += ',';
        csv += to_string(row.storage_kind);
        csv += ',';
        csv += std::to_string(row.size_mb);
        csv += ',';
        csv += std::to_string(row.added_delay_ms);
        csv += ',';
        csv += to_string(row.mode);
        csv += ',';
        csv += fixed3(row.mean_ms);
        csv += ',';
        csv += fixed3(row.stddev_ms);
        csv += ',';
        if (row.improvement_pct.has_value()) {
            csv += fixed3(*row.improvement_pct);
        }
        csv += ',';
        if (row.io_ratio.has_value()) {
            csv += fixed3(*row.io_ratio);
        }
        csv += '\n';
    }
    return csv;
}

std::string results_json(const std::vector<ResultRow>& rows) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& row : rows) {
        nlohmann::json entry;
        entry["workload"] = row.workload;
        entry["storage_kind"] = std::string(to_string(row.storage_kind));
        entry["size_mb"] = row.size_mb;
        entry["added_delay_ms"] = row.added_delay_ms;
        entry["mode"] = std::string(to_string(row.mode));
        entry["mean_ms"] = row.mean_ms;
        entry["stddev_ms"] = row.stddev_ms;
        entry["improvement_pct"] =
            row.improvement_pct.has_value() ? nlohmann::json(*row.improvement_pct)
                                            : nlohmann::json(nullptr);
        entry["io_ratio"] = row.io_ratio.has_value() ? nlohmann::json(*row.io_ratio)
                                                     : nlohmann::json(nullptr);
        doc.push_back(std::move(entry));
    }
    return doc.dump(2);
}

Result<ExperimentReport> run_experiment(const ExperimentConfig& config,
                                        const std::string& out_dir, bool parallel,
                                        std::ostream& log) {
    if (auto valid = config.validate(); !valid.ok()) {
        return valid.error();
    }
    std::error_code fs_error;
    std::filesystem::create_directories(out_dir, fs_error);
    if (fs_error) {
        return Error{Errc::config_error,
                     "cannot create " + out_dir + ": " + fs_error.message()};
    }

    struct Point {
        std::uint64_t size_mb;
        std::int64_t delay_ms;
    };
    std::vector<Point> grid;
    for (std::uint64_t size : config.input_sizes_mb) {
        for (std::int64_t delay : config.added_delays_ms) {
            grid.push_back({size, delay});
        }
    }

    std::mutex log_mu;
    std::vector<PointOutcome> outcomes(grid.size());
    if (parallel) {
        std::vector<std::future<PointOutcome>> pending;
        pending.reserve(grid.size());
        for (const auto& point : grid) {
            pending.push_back(std::async(std::launch::async, [&, point] {
                return run_point(config, point.size_mb, point.delay_ms, log, log_mu);
            }));
        }
        for (std::size_t i = 0; i < pending.size(); ++i) {
            outcomes[i] = pending[i].get();
        }
    } else {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            outcomes[i] = run_point(config, grid[i].size_mb, grid[i].delay_ms, log,
                                    log_mu);
        }
    }

    ExperimentReport report;
    report.grid_points = static_cast<int>(grid.size());
    nlohmann::json records = nlohmann::json::array();
    for (auto& outcome : outcomes) {
        report.runs += outcome.runs;
        report.failed_runs += outcome.failed_runs;
        report.missing_data = report.missing_data || outcome.missing_data;
        for (auto& row : outcome.rows) {
            report.rows.push_back(std::move(row));
        }
        for (auto& record : outcome.records) {
            records.push_back(std::move(record));
        }
    }

    const auto base = std::filesystem::path(out_dir);
    if (auto written = write_file(base / "results.csv", results_csv(report.rows));
        !written.ok()) {
        return written.error();
    }
    if (auto written = write_file(base / "results.json", results_json(report.rows));
        !written.ok()) {
        return written.error();
    }
    if (auto written = write_file(base / "records.json", records.dump(2));
        !written.ok()) {
        return written.error();
    }
    return report;
}

}  // namespace truffle::sim
