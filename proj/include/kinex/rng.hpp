#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace kinex {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Small splittable 64-bit generator (SplitMix64 stream).
///
/// Satisfies UniformRandomBitGenerator. `substream(...)` derives an
/// independent generator from a key tuple, so per-agent draws depend only on
/// (seed, step, population, agent) and never on iteration order.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit constexpr Rng(std::uint64_t seed = 0) noexcept : state_(mix64(seed)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform on [lo, hi].
    double uniform(double lo, double hi) noexcept {
        const double v = lo + (hi - lo) * uniform();
        return v > hi ? hi : v;
    }

    /// Uniform integer on [0, n). Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t n) noexcept {
        for (;;) {
            __extension__ using u128 = unsigned __int128;
            const u128 m = static_cast<u128>((*this)()) * n;
            const auto low = static_cast<std::uint64_t>(m);
            if (low >= n || low >= (0 - n) % n) return static_cast<std::uint64_t>(m >> 64);
        }
    }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    /// Independent generator keyed by this generator's current state and `keys`.
    Rng substream(std::initializer_list<std::uint64_t> keys) const noexcept {
        std::uint64_t h = state_;
        for (auto k : keys) h = mix64(h ^ mix64(k));
        Rng out;
        out.state_ = h;
        return out;
    }

private:
    std::uint64_t state_;
};

/// floor(expected) plus one extra event with probability frac(expected).
inline std::uint64_t stochastic_round(double expected, Rng& rng) {
    const double whole = std::floor(expected);
    auto count = static_cast<std::uint64_t>(whole);
    if (rng.bernoulli(expected - whole)) ++count;
    return count;
}

} // namespace kinex
