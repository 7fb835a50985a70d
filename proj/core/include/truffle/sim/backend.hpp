#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include "truffle/buffer.hpp"
#include "truffle/result.hpp"
#include "truffle/sim/clock.hpp"

namespace truffle::sim {

/// Linear latency cost of moving a payload through a storage service:
/// base_ms per request plus per_mb_ms per MiB transferred.
struct BackendLatencyProfile {
    double base_ms = 0.0;
    double per_mb_ms = 0.0;

    double nominal_ms(std::uint64_t bytes) const {
        return base_ms + per_mb_ms * (static_cast<double>(bytes) / (1024.0 * 1024.0));
    }

    Result<void> validate() const {
        if (base_ms < 0.0 || per_mb_ms < 0.0) {
            return {Errc::config_error, "latency profile durations must be >= 0"};
        }
        return {};
    }
};

// Default profiles fitted so a 128 MiB transfer costs the reference
// latencies: direct 1291 ms, kvs 1584 ms, object store 2481 ms.
inline constexpr BackendLatencyProfile kDirectProfile{0.0, 10.0859375};
inline constexpr BackendLatencyProfile kKvsProfile{16.0, 12.25};
inline constexpr BackendLatencyProfile kObjectStoreProfile{34.0, 19.1171875};

/// In-memory key-value service.  Every successful get/put sleeps the
/// profile's scaled cost outside the map lock, so concurrent requests are
/// charged independently, like distinct connections to a real store.
class InMemoryKvs {
public:
    InMemoryKvs(BackendLatencyProfile profile, SimClock clock,
                std::string expected_token = {})
        : profile_(profile), clock_(clock), expected_token_(std::move(expected_token)) {}

    Result<Payload> get(const std::string& key, std::string_view token = {}) const;
    Result<void> put(const std::string& key, Payload value, std::string_view token = {});

    void clear();
    std::size_t size() const;
    const BackendLatencyProfile& profile() const { return profile_; }

private:
    Result<void> check_auth(std::string_view token) const;

    BackendLatencyProfile profile_;
    SimClock clock_;
    std::string expected_token_;
    mutable std::mutex mu_;
    std::map<std::string, Payload> values_;
};

/// In-memory bucket/object service with the same charging discipline.
/// Buckets come into existence on first put; get against a missing bucket
/// and a missing object fail distinctly.
class InMemoryObjectStore {
public:
    InMemoryObjectStore(BackendLatencyProfile profile, SimClock clock,
                        std::string expected_token = {})
        : profile_(profile), clock_(clock), expected_token_(std::move(expected_token)) {}

    Result<Payload> get(const std::string& bucket, const std::string& object_id,
                        std::string_view token = {}) const;
    Result<void> put(const std::string& bucket, const std::string& object_id,
                     Payload value, std::string_view token = {});

    void clear();
    std::size_t size() const;
    const BackendLatencyProfile& profile() const { return profile_; }

private:
    Result<void> check_auth(std::string_view token) const;

    BackendLatencyProfile profile_;
    SimClock clock_;
    std::string expected_token_;
    mutable std::mutex mu_;
    std::map<std::string, std::map<std::string, Payload>> buckets_;
};

/// HTTP front for the in-memory services:
///   GET/PUT /kvs/{key}
///   GET/PUT /os/{bucket}/{object}
/// Credentials travel in the Authorization header, verbatim.
class BackendServer {
public:
    BackendServer(InMemoryKvs* kvs, InMemoryObjectStore* object_store);
    ~BackendServer();

    BackendServer(const BackendServer&) = delete;
    BackendServer& operator=(const BackendServer&) = delete;

    /// Binds 127.0.0.1 on an ephemeral port (or `port` if nonzero) and serves
    /// until stop().
    Result<void> start(int port = 0);
    void stop();

    int port() const;
    std::string endpoint() const;  ///< "127.0.0.1:<port>"

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace truffle::sim
