#pragma once

// Seeded randomness with fully specified transforms. std::mt19937_64 is
// portable; the standard distributions are not, so the few we need are
// spelled out here and outputs stay identical across standard libraries.

#include <cmath>
#include <cstdint>
#include <random>

#include "hitlist/addr.hpp"

namespace hitlist {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform in [0, n); n must be positive. Rejection keeps it unbiased.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do x = next();
        while (x >= limit);
        return x % n;
    }

    /// Uniform in [lo, hi].
    std::int64_t between(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    bool chance(double p) { return unit() < p; }

    /// Exponential with the given mean, by inversion.
    double exponential(double mean) { return -mean * std::log1p(-unit()); }

    /// 64 random bits with the universal/local bit cleared, the shape of a
    /// privacy-extension interface identifier.
    Iid privacy_iid() { return Iid{next() & ~kUniversalLocalBit}; }

    Mac48 mac() {
        const auto x = next();
        Mac48 m;
        for (int i = 0; i < 6; ++i) m.octets[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(x >> (8 * i));
        return m;
    }

private:
    std::mt19937_64 gen_;
};

} // namespace hitlist
