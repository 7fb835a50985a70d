#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "truffle/buffer.hpp"
#include "truffle/data_engine.hpp"
#include "truffle/pass.hpp"
#include "truffle/result.hpp"
#include "truffle/storage.hpp"
#include "truffle/trace.hpp"
#include "truffle/watcher.hpp"

namespace truffle {

/// One parsed invocation request as the sidecar sees it.
struct RequestEnvelope {
    std::string target_function;
    StorageDescriptor storage;
    std::optional<Payload> inline_payload;
    std::string buffer_name = "default";
    std::string trace_id;

    /// Shape rules: a valid descriptor, inline payload present iff kind is
    /// direct, and the buffer name must be "default" (the one buffer this
    /// sidecar runs).
    Result<void> validate() const;
};

/// Status + body, relayed to whoever invoked the sidecar.  Failures carry a
/// JSON error body and the matching HTTP status.
struct InvokeResponse {
    int status = 0;
    Payload body;
    std::string content_type = "application/octet-stream";

    static InvokeResponse failure(const Error& err);
};

/// Node-local sidecar entry point: intercepts invocations, forks the
/// prefetch path, forwards a reference key to the platform, ships payloads
/// to cold peers, and passes straight through for hot targets.
///
/// The same handlers back the in-process API and the wire routes:
///   POST /invoke                 — handle_invoke
///   GET  /truffle/buffer/{key}   — serve_buffer_read
///   POST /truffle/transfer/{key} — receive_peer_transfer
class Ingress {
public:
    struct Config {
        std::string listen_addr = "127.0.0.1:0";  ///< host:port, port 0 = ephemeral
        std::string platform_addr;                ///< host:port of the platform
        std::chrono::milliseconds take_timeout{30'000};
        std::chrono::milliseconds platform_timeout{120'000};
        std::chrono::milliseconds pass_wait_timeout{30'000};
        /// Inter-node shipping cost for payloads that ride inline (direct);
        /// payloads fetched from a storage backend were already charged there.
        std::function<void(std::uint64_t bytes)> direct_transfer_charge;
    };

    Ingress(Config config, Buffer& buffer, Watcher& watcher, const DataEngine& engine,
            TraceSink* sink = nullptr);
    ~Ingress();

    Ingress(const Ingress&) = delete;
    Ingress& operator=(const Ingress&) = delete;

    /// The full sidecar brain.  Blocks until the function (and its
    /// downstream) responded; prefetch and pass run concurrently meanwhile.
    /// Takes the envelope by value: large inline payloads should be moved in.
    InvokeResponse handle_invoke(RequestEnvelope envelope);

    /// POST /invoke with key + metadata and no body; relays the platform's
    /// response.  Unreachable → platform_unreachable, overdue →
    /// platform_timeout.
    Result<InvokeResponse> forward_to_platform(const std::string& target_function,
                                               const std::string& reference_key,
                                               const std::string& trace_id);

    /// Blocking read of the node buffer for the co-located function.
    Result<Payload> serve_buffer_read(const std::string& key);

    /// Peer-sidecar deposit; duplicate keys conflict, the first payload wins.
    Result<void> receive_peer_transfer(const std::string& key, Payload payload);

    /// Bind listen_addr and serve the wire routes until stop().
    Result<void> start();
    void stop();

    int port() const;
    /// Address peers reach this sidecar at ("127.0.0.1:<port>").
    std::string self_host() const;

    const Config& config() const { return config_; }

private:
    struct Impl;

    InvokeResponse invoke_cold(RequestEnvelope&& envelope);
    InvokeResponse invoke_passthrough(const RequestEnvelope& envelope);
    ColdStartPass& pass();

    Config config_;
    Buffer& buffer_;
    Watcher& watcher_;
    const DataEngine& engine_;
    TraceSink* sink_;
    std::once_flag pass_once_;
    std::unique_ptr<ColdStartPass> pass_;
    std::unique_ptr<Impl> impl_;
};

}  // namespace truffle
