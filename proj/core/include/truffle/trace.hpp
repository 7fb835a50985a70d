#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace truffle {

struct TransferReport;

/// Names of the per-invocation phase timestamps the runtime components emit.
namespace phase {
inline constexpr std::string_view kInvokeReceived = "invoke_received";
inline constexpr std::string_view kPrefetchStart = "prefetch_start";
inline constexpr std::string_view kPlatformForwardStart = "platform_forward_start";
inline constexpr std::string_view kScheduled = "scheduled";
inline constexpr std::string_view kColdStartEnd = "cold_start_end";
inline constexpr std::string_view kDataReady = "data_ready";
inline constexpr std::string_view kComputeStart = "compute_start";
inline constexpr std::string_view kComputeEnd = "compute_end";
inline constexpr std::string_view kResponse = "response";
}  // namespace phase

/// Receives phase timestamps and transfer reports from the sidecar and the
/// platform.  Implementations must be thread-safe; emitters call from many
/// execution contexts at once.  All methods are fire-and-forget.
class TraceSink {
public:
    virtual ~TraceSink() = default;

    /// Associates invocation_id with a function.  May be called again as
    /// better information arrives (the platform knows the placement host the
    /// source sidecar does not); the latest call wins.
    virtual void on_invocation(const std::string& trace_id,
                               const std::string& invocation_id,
                               const std::string& function_name,
                               const std::string& host) = 0;

    virtual void on_phase(const std::string& trace_id, const std::string& invocation_id,
                          std::string_view phase,
                          std::chrono::steady_clock::time_point at) = 0;

    virtual void on_transfer(const std::string& trace_id,
                             const std::string& invocation_id,
                             const TransferReport& report) = 0;

    virtual void on_failure(const std::string& trace_id,
                            const std::string& invocation_id, std::string_view phase,
                            const std::string& detail) = 0;
};

}  // namespace truffle
