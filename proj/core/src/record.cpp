#include "truffle/sim/record.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace truffle::sim {

namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point from, Clock::time_point to) {
    return std::chrono::duration<double, std::milli>(to - from).count();
}

// The phases every lifecycle walks through, in the order time must respect.
constexpr std::array<std::string_view, 7> kCanonicalOrder = {
    phase::kInvokeReceived, phase::kScheduled,    phase::kColdStartEnd,
    phase::kDataReady,      phase::kComputeStart, phase::kComputeEnd,
    phase::kResponse,
};

}  // namespace

Result<Mode> parse_mode(std::string_view text) {
    if (text == "baseline") return Mode::baseline;
    if (text == "truffle") return Mode::truffle;
    return {Errc::invalid_argument, "unknown mode: " + std::string(text)};
}

std::optional<Clock::time_point> FunctionTrace::phase(std::string_view name) const {
    auto it = phases.find(std::string(name));
    if (it == phases.end()) {
        return std::nullopt;
    }
    return it->second;
}

Result<void> MeasurementRecord::validate() const {
    double first = std::numeric_limits<double>::max();
    double last = std::numeric_limits<double>::lowest();
    bool any = false;

    for (const auto& fn : functions) {
        Clock::time_point previous{};
        bool have_previous = false;
        for (auto name : kCanonicalOrder) {
            auto at = fn.phase(name);
            if (!at.has_value()) {
                continue;
            }
            if (have_previous && *at < previous) {
                return {Errc::invalid_argument,
                        fn.function_name + ": phase " + std::string(name) +
                            " precedes an earlier lifecycle phase"};
            }
            previous = *at;
            have_previous = true;
        }
        for (const auto& [name, at] : fn.phases) {
            const double ms = std::chrono::duration<double, std::milli>(
                                  at.time_since_epoch())
                                  .count();
            first = std::min(first, ms);
            last = std::max(last, ms);
            any = true;
        }
    }

    if (any) {
        const double span = last - first;
        if (std::abs(span - end_to_end_ms) > 0.5) {
            return {Errc::invalid_argument,
                    "end_to_end_ms does not equal last-first span"};
        }
    }
    return {};
}

void finalize_durations(MeasurementRecord& record) {
    std::optional<Clock::time_point> first;
    std::optional<Clock::time_point> last;
    double io_ms = 0.0;

    for (const auto& fn : record.functions) {
        for (const auto& [name, at] : fn.phases) {
            if (!first.has_value() || at < *first) first = at;
            if (!last.has_value() || at > *last) last = at;
        }
        const auto ready = fn.phase(phase::kDataReady);
        const auto cold_end = fn.phase(phase::kColdStartEnd);
        if (ready.has_value() && cold_end.has_value()) {
            io_ms += std::max(0.0, ms_between(*cold_end, *ready));
        }
    }

    record.end_to_end_ms = (first && last) ? ms_between(*first, *last) : 0.0;
    record.io_critical_path_ms = io_ms;
}

std::string MeasurementRecord::to_json() const {
    std::optional<Clock::time_point> origin;
    for (const auto& fn : functions) {
        for (const auto& [name, at] : fn.phases) {
            if (!origin.has_value() || at < *origin) origin = at;
        }
    }

    nlohmann::json doc;
    doc["trace_id"] = trace_id;
    doc["mode"] = std::string(to_string(mode));
    doc["failed"] = failed;
    if (!failure_detail.empty()) {
        doc["failure_detail"] = failure_detail;
    }
    doc["end_to_end_ms"] = end_to_end_ms;
    doc["io_critical_path_ms"] = io_critical_path_ms;

    auto& fns = doc["functions"] = nlohmann::json::array();
    for (const auto& fn : functions) {
        nlohmann::json entry;
        entry["invocation_id"] = fn.invocation_id;
        entry["function"] = fn.function_name;
        entry["host"] = fn.host;
        auto& phases = entry["phases"] = nlohmann::json::object();
        for (const auto& [name, at] : fn.phases) {
            phases[name] = origin.has_value() ? ms_between(*origin, at) : 0.0;
        }
        auto& transfers = entry["transfers"] = nlohmann::json::array();
        for (const auto& report : fn.transfers) {
            transfers.push_back({{"outcome", std::string(to_string(report.outcome))},
                                 {"host", report.host},
                                 {"bytes", report.bytes},
                                 {"wait_ms", report.wait_ms},
                                 {"transfer_ms", report.transfer_ms},
                                 {"attempts", report.attempts}});
        }
        if (!fn.failures.empty()) {
            entry["failures"] = fn.failures;
        }
        fns.push_back(std::move(entry));
    }
    return doc.dump();
}

FunctionTrace& RecordBuilder::slot(TraceAccumulator& acc,
                                   const std::string& invocation_id) {
    auto it = acc.functions.find(invocation_id);
    if (it == acc.functions.end()) {
        acc.order.push_back(invocation_id);
        auto& fresh = acc.functions[invocation_id];
        fresh.invocation_id = invocation_id;
        return fresh;
    }
    return it->second;
}

void RecordBuilder::on_invocation(const std::string& trace_id,
                                  const std::string& invocation_id,
                                  const std::string& function_name,
                                  const std::string& host) {
    std::lock_guard lock(mu_);
    auto& fn = slot(traces_[trace_id], invocation_id);
    fn.function_name = function_name;
    fn.host = host;
}

void RecordBuilder::on_phase(const std::string& trace_id,
                             const std::string& invocation_id, std::string_view phase,
                             Clock::time_point at) {
    std::lock_guard lock(mu_);
    slot(traces_[trace_id], invocation_id).phases[std::string(phase)] = at;
}

void RecordBuilder::on_transfer(const std::string& trace_id,
                                const std::string& invocation_id,
                                const TransferReport& report) {
    std::lock_guard lock(mu_);
    slot(traces_[trace_id], invocation_id).transfers.push_back(report);
}

void RecordBuilder::on_failure(const std::string& trace_id,
                               const std::string& invocation_id,
                               std::string_view phase, const std::string& detail) {
    std::lock_guard lock(mu_);
    slot(traces_[trace_id], invocation_id)
        .failures.push_back(std::string(phase) + ": " + detail);
}

MeasurementRecord RecordBuilder::build(const std::string& trace_id, Mode mode) {
    MeasurementRecord record;
    record.trace_id = trace_id;
    record.mode = mode;
    {
        std::lock_guard lock(mu_);
        auto it = traces_.find(trace_id);
        if (it != traces_.end()) {
            for (const auto& id : it->second.order) {
                record.functions.push_back(std::move(it->second.functions[id]));
            }
            traces_.erase(it);
        }
    }
    finalize_durations(record);
    return record;
}

std::size_t RecordBuilder::open_traces() const {
    std::lock_guard lock(mu_);
    return traces_.size();
}

}  // namespace truffle::sim
