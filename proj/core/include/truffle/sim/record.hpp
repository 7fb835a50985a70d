#pragma once

#include <chrono>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "truffle/pass.hpp"
#include "truffle/result.hpp"
#include "truffle/trace.hpp"

namespace truffle::sim {

/// Which data-passing discipline an invocation ran under.
enum class Mode { baseline, truffle };

constexpr std::string_view to_string(Mode mode) {
    return mode == Mode::baseline ? "baseline" : "truffle";
}
Result<Mode> parse_mode(std::string_view text);

/// One function execution's phase trail inside a workflow run.
struct FunctionTrace {
    std::string invocation_id;
    std::string function_name;
    std::string host;
    std::map<std::string, std::chrono::steady_clock::time_point> phases;
    std::vector<TransferReport> transfers;
    std::vector<std::string> failures;  ///< "phase: detail"

    std::optional<std::chrono::steady_clock::time_point> phase(
        std::string_view name) const;
};

/// The full measurement of one workflow invocation, assembled from the phase
/// stamps every component emitted under a single trace id.
struct MeasurementRecord {
    std::string trace_id;
    Mode mode = Mode::baseline;
    bool failed = false;
    std::string failure_detail;
    double end_to_end_ms = 0.0;
    double io_critical_path_ms = 0.0;
    std::vector<FunctionTrace> functions;  ///< in first-seen order

    /// Within each function the canonical phases must be monotone, and
    /// end_to_end must equal last stamp − first stamp across all functions.
    Result<void> validate() const;

    /// Stable JSON form; timestamps become milliseconds since the record's
    /// first stamp.
    std::string to_json() const;
};

/// Recomputes the two derived durations from the phase stamps:
/// end-to-end = last − first over every stamp, io critical path =
/// Σ max(0, data_ready − cold_start_end) over functions.
void finalize_durations(MeasurementRecord& record);

/// TraceSink that folds concurrent emissions into per-trace records.
/// Repeated phase stamps overwrite (the relay's response supersedes the
/// function's own); repeated on_invocation calls refine the host.
class RecordBuilder final : public TraceSink {
public:
    void on_invocation(const std::string& trace_id, const std::string& invocation_id,
                       const std::string& function_name,
                       const std::string& host) override;
    void on_phase(const std::string& trace_id, const std::string& invocation_id,
                  std::string_view phase,
                  std::chrono::steady_clock::time_point at) override;
    void on_transfer(const std::string& trace_id, const std::string& invocation_id,
                     const TransferReport& report) override;
    void on_failure(const std::string& trace_id, const std::string& invocation_id,
                    std::string_view phase, const std::string& detail) override;

    /// Assembles everything recorded under trace_id into a record and
    /// forgets the trace.  Fills the derived durations; `failed` stays false
    /// here — the caller knows whether the invocation's response succeeded.
    MeasurementRecord build(const std::string& trace_id, Mode mode);

    /// Traces currently held (in-flight or never built).
    std::size_t open_traces() const;

private:
    struct TraceAccumulator {
        std::vector<std::string> order;  // invocation ids, first-seen
        std::map<std::string, FunctionTrace> functions;
    };

    FunctionTrace& slot(TraceAccumulator& acc, const std::string& invocation_id);

    mutable std::mutex mu_;
    std::map<std::string, TraceAccumulator> traces_;
};

}  // namespace truffle::sim
