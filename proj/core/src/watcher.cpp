#include "truffle/watcher.hpp"

namespace truffle {

Result<std::string> Watcher::wait_for_host(const std::string& target_function,
                                           std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    const auto deadline = std::chrono::steady_clock::now() + timeout;

    {
        auto it = functions_.find(target_function);
        if (it != functions_.end() && it->second.lifecycle != Lifecycle::none) {
            return it->second.host;  // registry hit: already live
        }
    }

    const std::uint64_t entry_generation = functions_[target_function].placement_generation;
    for (;;) {
        auto& state = functions_[target_function];
        if (state.placement_generation > entry_generation) {
            return state.last_placed_host;
        }
        if (std::chrono::steady_clock::now() >= deadline) {
            return {Errc::scheduling_timeout,
                    "no scheduling event for " + target_function + " within timeout"};
        }
        cv_.wait_until(lock, deadline);
    }
}

bool Watcher::is_running(const std::string& function_name) const {
    std::lock_guard lock(mu_);
    auto it = functions_.find(function_name);
    return it != functions_.end() && it->second.lifecycle != Lifecycle::none;
}

bool Watcher::ingest_event(const SchedulingEvent& event) {
    std::lock_guard lock(mu_);
    auto& state = functions_[event.function_name];

    const auto reject = [&] {
        ++rejected_;
        return false;
    };

    switch (event.kind) {
    case EventKind::scheduled:
        if (state.lifecycle != Lifecycle::none || event.host_address.empty()) {
            return reject();
        }
        state.lifecycle = Lifecycle::scheduled;
        state.host = event.host_address;
        ++state.placement_generation;
        state.last_placed_host = event.host_address;
        break;
    case EventKind::running:
        // none → running is legal: we may have subscribed mid-lifecycle.
        if (state.lifecycle == Lifecycle::running || event.host_address.empty()) {
            return reject();
        }
        state.lifecycle = Lifecycle::running;
        state.host = event.host_address;
        ++state.placement_generation;
        state.last_placed_host = event.host_address;
        break;
    case EventKind::terminated:
        if (state.lifecycle == Lifecycle::none) {
            return reject();
        }
        state.lifecycle = Lifecycle::none;
        state.host.clear();
        break;
    }

    cv_.notify_all();
    return true;
}

std::uint64_t Watcher::rejected_events() const {
    std::lock_guard lock(mu_);
    return rejected_;
}

}  // namespace truffle
