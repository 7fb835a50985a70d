#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "truffle/result.hpp"

namespace truffle {

/// Byte carrier used on every data path.  std::string keeps us copy-free at
/// the HTTP boundary and is cheap to move everywhere else.
using Payload = std::string;

enum class EntryState { pending, ready, failed };

/// Keyed staging area for function inputs.
///
/// Lifecycle per key: announce() reserves it (pending), put() publishes the
/// bytes (ready) or mark_failed() poisons it (failed), and a single take()
/// consumes it.  take() on a pending key blocks until the entry resolves.
/// Consumed keys leave a tombstone behind so a second reader fails fast with
/// not_found instead of waiting out its timeout.
///
/// All operations are thread-safe; readers and writers share one lock and a
/// single condition variable (entries resolve rarely relative to waits, so
/// broadcast wakeups are fine).
class Buffer {
public:
    static constexpr std::size_t kDefaultCapacityBytes = std::size_t{1} << 30;  // 1 GiB
    static constexpr std::chrono::milliseconds kDefaultTakeTimeout{30'000};

    explicit Buffer(std::size_t capacity_bytes = kDefaultCapacityBytes);

    /// Reserve a key ahead of its bytes.  Duplicate announcements (including
    /// against a live or tombstoned entry) fail with conflict.
    Result<void> announce(const std::string& key);

    /// Publish bytes under a key.  The key may be absent (entry is created
    /// ready in one step) or pending.  Fails with conflict when the key
    /// already resolved or was consumed, and capacity_exceeded when the
    /// payload would push resident bytes past the configured capacity (a
    /// pending entry then stays pending).
    Result<void> put(const std::string& key, Payload payload);

    /// Poison an announced key so readers fail with fetch_failed.  The poison
    /// sticks until the entry is evicted; it is not consumed by take().
    Result<void> mark_failed(const std::string& key, std::string reason);

    /// Consume the bytes for a key, blocking while it is pending or not yet
    /// written.  Exactly one taker wins; later calls observe the tombstone
    /// (not_found).  A key that never resolves fails with timeout.
    Result<Payload> take(const std::string& key,
                         std::chrono::milliseconds timeout = kDefaultTakeTimeout);

    /// Drop entries announced more than max_age ago, whatever their state.
    /// Returns the number of entries removed.
    std::size_t evict_expired(std::chrono::milliseconds max_age);

    /// nullopt when the key is unknown (never announced, or already consumed
    /// and its tombstone pruned).
    std::optional<EntryState> status(const std::string& key) const;

    std::size_t entry_count() const;
    std::size_t resident_bytes() const;
    std::uint64_t rejected_capacity_count() const;

private:
    struct Entry {
        EntryState state = EntryState::pending;
        Payload payload;
        std::string failure_reason;
        std::chrono::steady_clock::time_point announced_at;
    };

    // Call with lock held.
    bool is_tombstoned(const std::string& key) const;
    void add_tombstone(const std::string& key);

    static constexpr std::size_t kMaxTombstones = 4096;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::unordered_map<std::string, Entry> entries_;
    std::deque<std::string> tombstone_fifo_;
    std::unordered_set<std::string> tombstones_;
    std::size_t capacity_bytes_;
    std::size_t resident_bytes_ = 0;
    std::uint64_t rejected_capacity_ = 0;
};

}  // namespace truffle
