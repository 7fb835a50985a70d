#include "truffle/ids.hpp"

#include <cstdint>
#include <random>

namespace truffle {

std::string make_reference_key() {
    thread_local std::mt19937_64 rng = [] {
        std::random_device rd;
        std::seed_seq seq{rd(), rd(), rd(), rd()};
        return std::mt19937_64(seq);
    }();

    static constexpr char kHex[] = "0123456789abcdef";
    std::uint64_t halves[2] = {rng(), rng()};
    std::string out(32, '0');
    for (int h = 0; h < 2; ++h) {
        std::uint64_t v = halves[h];
        for (int i = 15; i >= 0; --i) {
            out[h * 16 + i] = kHex[v & 0xf];
            v >>= 4;
        }
    }
    return out;
}

}  // namespace truffle
