#pragma once

#include <cstdint>
#include <cstring>
#include <string>

#include "truffle/buffer.hpp"

namespace truffle::sim {

/// FNV-1a 64-bit folded over little-endian 8-byte words, trailing bytes
/// folded individually.  Every byte participates, but the multiply runs
/// once per word instead of once per byte — fast enough to fingerprint a
/// 128 MiB payload inside a measured run without denting the timings.
/// Word-folding is not the canonical byte-serial FNV-1a; this is a local
/// verification format, not a wire standard.
inline std::uint64_t fnv1a64w(const void* data, std::size_t size) {
    constexpr std::uint64_t kPrime = 0x100000001b3ull;
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t hash = 0xcbf29ce484222325ull;

    std::size_t i = 0;
    for (; i + sizeof(std::uint64_t) <= size; i += sizeof(std::uint64_t)) {
        std::uint64_t word;
        std::memcpy(&word, bytes + i, sizeof(word));
        hash = (hash ^ word) * kPrime;
    }
    for (; i < size; ++i) {
        hash = (hash ^ bytes[i]) * kPrime;
    }
    return hash;
}

/// Compact deterministic fingerprint of a payload:
/// "fnv1a64w-<16 hex>-<size>".  Functions answer with this instead of
/// echoing megabytes back.
inline std::string payload_digest(const Payload& payload) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::uint64_t hash = fnv1a64w(payload.data(), payload.size());
    std::string hex(16, '0');
    for (int i = 15; i >= 0; --i) {
        hex[static_cast<std::size_t>(i)] = kHex[hash & 0xf];
        hash >>= 4;
    }
    return "fnv1a64w-" + hex + "-" + std::to_string(payload.size());
}

}  // namespace truffle::sim
