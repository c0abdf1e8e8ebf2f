#pragma once

#include <cstdint>
#include <cmath>

namespace imstab {

// Counter-based random generator (Philox4x32-10). Every draw is a pure
// function of (seed, stream, counter), so parallel workers can consume
// disjoint counter ranges and reproduce the serial results exactly.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : seed_(seed), stream_(stream) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    // Two independent 64-bit words for a given counter.
    void bits128(std::uint64_t counter, std::uint64_t& w0, std::uint64_t& w1) const {
        std::uint32_t c0 = static_cast<std::uint32_t>(counter);
        std::uint32_t c1 = static_cast<std::uint32_t>(counter >> 32);
        std::uint32_t c2 = static_cast<std::uint32_t>(stream_);
        std::uint32_t c3 = static_cast<std::uint32_t>(stream_ >> 32);
        std::uint32_t k0 = static_cast<std::uint32_t>(seed_);
        std::uint32_t k1 = static_cast<std::uint32_t>(seed_ >> 32);
        for (int round = 0; round < 10; ++round) {
            std::uint64_t p0 = std::uint64_t(0xD2511F53u) * c0;
            std::uint64_t p1 = std::uint64_t(0xCD9E8D57u) * c2;
            std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
            std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
            std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
            std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
            c0 = hi1 ^ c1 ^ k0;
            c1 = lo1;
            c2 = hi0 ^ c3 ^ k1;
            c3 = lo0;
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        w0 = (std::uint64_t(c1) << 32) | c0;
        w1 = (std::uint64_t(c3) << 32) | c2;
    }

    std::uint64_t bits(std::uint64_t counter) const {
        std::uint64_t w0, w1;
        bits128(counter, w0, w1);
        return w0;
    }

    // Uniform on [0,1), 53-bit resolution.
    double uniform(std::uint64_t counter) const {
        return to_unit(bits(counter));
    }

    // Standard normal via Box-Muller; one counter per variate.
    double normal(std::uint64_t counter) const {
        std::uint64_t w0, w1;
        bits128(counter, w0, w1);
        double u1 = 1.0 - to_unit(w0);  // (0,1], keeps the log finite
        double u2 = to_unit(w1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    // Fills out[0..d) with iid standard normals at counters base..base+d.
    template <typename Vec>
    void normal_fill(std::uint64_t base, Vec&& out, int d) const {
        for (int i = 0; i < d; ++i) out[i] = normal(base + std::uint64_t(i));
    }

private:
    static double to_unit(std::uint64_t w) {
        return static_cast<double>(w >> 11) * 0x1.0p-53;
    }
    static constexpr double two_pi = 6.283185307179586476925286766559;

    std::uint64_t seed_;
    std::uint64_t stream_;
};

// Stream-id layout: the high bits tag the purpose so different operations
// never share a stream even under the same user seed.
namespace rng_stream {
constexpr std::uint64_t tag(std::uint64_t purpose, std::uint64_t index) {
    return (purpose << 40) ^ index;
}
constexpr std::uint64_t measure_sampling = 1;
constexpr std::uint64_t trajectory       = 2;
constexpr std::uint64_t trajectory_alt   = 3;  // independent-noise mode for the second process
constexpr std::uint64_t monte_carlo      = 4;
constexpr std::uint64_t replicate        = 5;
constexpr std::uint64_t scenario         = 6;
}  // namespace rng_stream

}  // namespace imstab
