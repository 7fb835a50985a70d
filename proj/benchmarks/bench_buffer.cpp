#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <thread>

#include "truffle/buffer.hpp"
#include "truffle/sim/digest.hpp"

using namespace truffle;

namespace {

Payload random_payload(std::size_t size) {
    std::mt19937_64 rng(size ^ 0xb0f5);
    Payload payload(size, '\0');
    std::size_t offset = 0;
    for (; offset + 8 <= size; offset += 8) {
        const std::uint64_t word = rng();
        std::memcpy(payload.data() + offset, &word, 8);
    }
    for (; offset < size; ++offset) {
        payload[offset] = static_cast<char>(rng() & 0xff);
    }
    return payload;
}

}  // namespace

// The publish/consume round trip every staged input pays: reserve a key,
// land the bytes, redeem them once.
static void BM_BufferPublishTake(benchmark::State& state) {
    const auto payload = random_payload(static_cast<std::size_t>(state.range(0)));
    Buffer buffer;
    std::uint64_t sequence = 0;
    for (auto _ : state) {
        const std::string key = "bench/" + std::to_string(sequence++);
        benchmark::DoNotOptimize(buffer.announce(key));
        benchmark::DoNotOptimize(buffer.put(key, payload));
        auto taken = buffer.take(key);
        benchmark::DoNotOptimize(taken);
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) *
                            state.range(0));
}
BENCHMARK(BM_BufferPublishTake)->Range(1 << 10, 1 << 24);

// A reader already parked on the key when the bytes arrive — the shape the
// cold-start overlap produces, where the function beats its input.
static void BM_BufferBlockedTakeWakeup(benchmark::State& state) {
    const auto payload = random_payload(1 << 16);
    Buffer buffer;
    std::uint64_t sequence = 0;
    for (auto _ : state) {
        const std::string key = "bench/" + std::to_string(sequence++);
        benchmark::DoNotOptimize(buffer.announce(key));
        std::thread writer([&buffer, &key, &payload] {
            benchmark::DoNotOptimize(buffer.put(key, payload));
        });
        auto taken = buffer.take(key);
        benchmark::DoNotOptimize(taken);
        writer.join();
    }
}
BENCHMARK(BM_BufferBlockedTakeWakeup);

// The response digest every simulated function computes over its input.
static void BM_PayloadDigest(benchmark::State& state) {
    const auto payload = random_payload(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(sim::payload_digest(payload));
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) *
                            state.range(0));
}
BENCHMARK(BM_PayloadDigest)->Range(1 << 10, std::int64_t{1} << 27);
