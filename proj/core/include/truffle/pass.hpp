#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "truffle/buffer.hpp"
#include "truffle/result.hpp"
#include "truffle/watcher.hpp"

namespace truffle {

/// What happened to one pass attempt.
struct TransferReport {
    enum class Outcome {
        delivered,           ///< payload acked by the peer sidecar
        local_no_transfer,   ///< target landed on this node; nothing to ship
        scheduling_timeout,  ///< never learned the target's host
        payload_unavailable, ///< local payload never materialized
        transfer_failed,     ///< peer rejected or unreachable after retry
    };

    std::string target_function;
    std::string reference_key;
    std::string host;
    Outcome outcome = Outcome::transfer_failed;
    double wait_ms = 0.0;      ///< time spent learning the host
    double transfer_ms = 0.0;  ///< time spent shipping the payload
    std::uint64_t bytes = 0;
    int attempts = 0;
    std::optional<Error> error;

    std::chrono::steady_clock::time_point started_at{};
    std::chrono::steady_clock::time_point transfer_started_at{};
    std::chrono::steady_clock::time_point finished_at{};

    bool delivered() const { return outcome == Outcome::delivered; }
};

std::string_view to_string(TransferReport::Outcome outcome);

/// Sender side of passing a payload to a cold target: learn the host from
/// the watcher while the platform works on starting the function, then ship
/// the bytes into the peer sidecar's buffer through the target's cold-start
/// window.
class ColdStartPass {
public:
    struct Config {
        /// This node's own peer address ("host:port"); a target scheduled
        /// here needs no transfer.
        std::string self_host;
        std::chrono::milliseconds wait_timeout{30'000};
        /// Charged once per shipped payload before the wire write; the
        /// simulation injects the inter-node transfer cost here.  Empty means
        /// free.
        std::function<void(std::uint64_t bytes)> transfer_charge;
    };

    ColdStartPass(Watcher& watcher, Config config)
        : watcher_(watcher), config_(std::move(config)) {}

    /// Wait for the target's host and ship `payload` there.  Retries the peer
    /// transfer once before giving up.
    TransferReport initiate_pass(const std::string& target_function,
                                 const std::string& reference_key, Payload payload);

    /// Same, but the payload is produced only once the target turns out to
    /// live on another node.  The ingress hands in a blocking read of the
    /// local buffer here, so a target scheduled locally keeps its entry.
    /// charge_override, when set, replaces the configured transfer charge for
    /// this one pass (an empty function means ship for free — used for
    /// payloads whose journey was already charged at the storage backend).
    TransferReport initiate_pass_deferred(
        const std::string& target_function, const std::string& reference_key,
        const std::function<Result<Payload>()>& acquire_payload,
        std::optional<std::function<void(std::uint64_t)>> charge_override = std::nullopt);

    /// One POST /truffle/transfer/{key} against a peer sidecar.
    static Result<void> call_target_host_truffle(const std::string& host_address,
                                                 const std::string& reference_key,
                                                 const Payload& payload);

private:
    Watcher& watcher_;
    Config config_;
};

}  // namespace truffle
