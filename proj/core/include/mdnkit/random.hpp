#pragma once

#include <cstdint>
#include <random>

namespace mdnkit {

// Deterministic RNG stream. mt19937_64 output is bit-specified by the
// standard; distributions are implemented here (not via <random> adaptors,
// whose output is implementation-defined) so that identical seeds give
// identical draws on every platform.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; one cached value per pair of draws.
    double normal();

    double normal(double mean, double std) { return mean + std * normal(); }

    // Uniform integer in [0, n) by rejection (no modulo bias).
    std::uint64_t uniform_int(std::uint64_t n);

    // Independent child stream seed; used for per-trajectory / per-member
    // derivation: derive(seed, i) = splitmix64 mix of (seed, i).
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t index);

private:
    std::mt19937_64 gen_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace mdnkit
