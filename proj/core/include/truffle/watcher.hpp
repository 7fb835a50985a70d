#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <string>
#include <unordered_map>

#include "truffle/result.hpp"

namespace truffle {

enum class EventKind { scheduled, running, terminated };

constexpr std::string_view to_string(EventKind kind) {
    switch (kind) {
    case EventKind::scheduled:  return "scheduled";
    case EventKind::running:    return "running";
    case EventKind::terminated: return "terminated";
    }
    return "unknown";
}

/// One orchestrator lifecycle notification.
struct SchedulingEvent {
    std::string function_name;
    std::string host_address;  ///< non-empty for scheduled/running
    EventKind kind = EventKind::scheduled;
    std::chrono::steady_clock::time_point at{};
};

/// Folds the orchestrator event stream into a function→host registry and
/// answers "which host runs F?" the moment scheduling completes.
///
/// Lifecycle per function: scheduled → running → terminated, then the slate
/// is clean for the next instance.  A stream may also begin at running (a
/// subscriber attaching mid-lifecycle); everything else out of order is
/// rejected and counted, never applied.
class Watcher {
public:
    static constexpr std::chrono::milliseconds kDefaultWaitTimeout{30'000};

    /// Blocks until the function has a host: immediately when the registry
    /// already maps it to a live (scheduled or running) instance, otherwise
    /// when the next scheduled/running event for it arrives.  Waiters never
    /// miss a host that was announced while they slept, even if the instance
    /// terminated again in between.
    Result<std::string> wait_for_host(
        const std::string& target_function,
        std::chrono::milliseconds timeout = kDefaultWaitTimeout);

    /// true iff the last accepted event for the function is scheduled or
    /// running with no later terminated.
    bool is_running(const std::string& function_name) const;

    /// Applies one event.  Returns false (and bumps rejected_events) when the
    /// event is out of order for its function's lifecycle.
    bool ingest_event(const SchedulingEvent& event);

    std::uint64_t rejected_events() const;

private:
    enum class Lifecycle { none, scheduled, running };

    struct FunctionState {
        Lifecycle lifecycle = Lifecycle::none;
        std::string host;
        // Bumped on every accepted scheduled/running event; lets a waiter
        // that registered before the event observe it even after a
        // subsequent terminated wiped the live state.
        std::uint64_t placement_generation = 0;
        std::string last_placed_host;
    };

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::unordered_map<std::string, FunctionState> functions_;
    std::uint64_t rejected_ = 0;
};

}  // namespace truffle
