#include "truffle/buffer.hpp"

namespace truffle {

Buffer::Buffer(std::size_t capacity_bytes) : capacity_bytes_(capacity_bytes) {}

bool Buffer::is_tombstoned(const std::string& key) const {
    return tombstones_.count(key) != 0;
}

void Buffer::add_tombstone(const std::string& key) {
    tombstones_.insert(key);
    tombstone_fifo_.push_back(key);
    while (tombstone_fifo_.size() > kMaxTombstones) {
        tombstones_.erase(tombstone_fifo_.front());
        tombstone_fifo_.pop_front();
    }
}

Result<void> Buffer::announce(const std::string& key) {
    std::lock_guard lock(mu_);
    if (entries_.count(key) != 0 || is_tombstoned(key)) {
        return {Errc::conflict, "key already announced: " + key};
    }
    Entry entry;
    entry.announced_at = std::chrono::steady_clock::now();
    entries_.emplace(key, std::move(entry));
    return {};
}

Result<void> Buffer::put(const std::string& key, Payload payload) {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        if (is_tombstoned(key)) {
            return {Errc::conflict, "key already consumed: " + key};
        }
        // Unannounced keys are legal: the entry is created ready in one step.
        if (resident_bytes_ + payload.size() > capacity_bytes_) {
            ++rejected_capacity_;
            return {Errc::capacity_exceeded, "buffer full, rejecting " + key};
        }
        Entry entry;
        entry.announced_at = std::chrono::steady_clock::now();
        entry.state = EntryState::ready;
        resident_bytes_ += payload.size();
        entry.payload = std::move(payload);
        entries_.emplace(key, std::move(entry));
        cv_.notify_all();
        return {};
    }
    if (it->second.state != EntryState::pending) {
        return {Errc::conflict, "key already resolved: " + key};
    }
    if (resident_bytes_ + payload.size() > capacity_bytes_) {
        ++rejected_capacity_;
        return {Errc::capacity_exceeded, "buffer full, rejecting " + key};
    }
    resident_bytes_ += payload.size();
    it->second.payload = std::move(payload);
    it->second.state = EntryState::ready;
    cv_.notify_all();
    return {};
}

Result<void> Buffer::mark_failed(const std::string& key, std::string reason) {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        return {Errc::not_found, "key not announced: " + key};
    }
    if (it->second.state != EntryState::pending) {
        return {Errc::conflict, "key already resolved: " + key};
    }
    it->second.state = EntryState::failed;
    it->second.failure_reason = std::move(reason);
    cv_.notify_all();
    return {};
}

Result<Payload> Buffer::take(const std::string& key, std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    const auto deadline = std::chrono::steady_clock::now() + timeout;

    for (;;) {
        auto it = entries_.find(key);
        if (it != entries_.end()) {
            if (it->second.state == EntryState::failed) {
                // Poison is observed, not consumed: every reader sees it.
                return {Errc::fetch_failed, it->second.failure_reason};
            }
            if (it->second.state == EntryState::ready) {
                Payload out = std::move(it->second.payload);
                resident_bytes_ -= out.size();
                entries_.erase(it);
                add_tombstone(key);
                return out;
            }
        } else if (is_tombstoned(key)) {
            return {Errc::not_found, "key already consumed: " + key};
        }
        // Absent or pending: wait for a writer.
        if (std::chrono::steady_clock::now() >= deadline) {
            return {Errc::timeout, "timed out waiting for " + key};
        }
        cv_.wait_until(lock, deadline);
    }
}

std::size_t Buffer::evict_expired(std::chrono::milliseconds max_age) {
    std::lock_guard lock(mu_);
    const auto cutoff = std::chrono::steady_clock::now() - max_age;
    std::size_t evicted = 0;
    for (auto it = entries_.begin(); it != entries_.end();) {
        if (it->second.announced_at < cutoff) {
            resident_bytes_ -= it->second.payload.size();
            it = entries_.erase(it);
            ++evicted;
        } else {
            ++it;
        }
    }
    if (evicted > 0) {
        // Waiters on an evicted pending key recheck and keep waiting until
        // their own deadline.
        cv_.notify_all();
    }
    return evicted;
}

std::optional<EntryState> Buffer::status(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        return std::nullopt;
    }
    return it->second.state;
}

std::size_t Buffer::entry_count() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

std::size_t Buffer::resident_bytes() const {
    std::lock_guard lock(mu_);
    return resident_bytes_;
}

std::uint64_t Buffer::rejected_capacity_count() const {
    std::lock_guard lock(mu_);
    return rejected_capacity_;
}

}  // namespace truffle
