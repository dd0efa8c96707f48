#pragma once

#include <cmath>
#include <cstdint>

namespace stobas {

namespace detail {

inline uint64_t splitmix64(uint64_t& state) noexcept {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t mix(uint64_t a, uint64_t b) noexcept {
    uint64_t s = a;
    s ^= b + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
    return splitmix64(s);
}

} // namespace detail

/// Counter-seeded deterministic stream. Streams constructed from the same
/// (seed, id...) tuple produce identical sequences on every platform and
/// thread schedule, which is what the reproducibility contracts rely on.
class RngStream {
public:
    explicit RngStream(uint64_t seed) noexcept : state_(detail::mix(seed, 0x5bf0e9c386a7f1a3ULL)) {}

    RngStream(uint64_t seed, uint64_t id) noexcept
        : state_(detail::mix(detail::mix(seed, 0x5bf0e9c386a7f1a3ULL), id)) {}

    RngStream(uint64_t seed, uint64_t id1, uint64_t id2) noexcept
        : state_(detail::mix(detail::mix(detail::mix(seed, 0x5bf0e9c386a7f1a3ULL), id1), id2)) {}

    uint64_t next_u64() noexcept { return detail::splitmix64(state_); }

    /// Uniform double in [0, 1).
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    uint64_t uniform_index(uint64_t n) noexcept {
        // Multiply-shift; bias is < 2^-64 per draw, irrelevant at our sample counts.
        return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    /// Standard normal via Box-Muller, pair-cached.
    double normal() noexcept {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // 1 - u1 in (0, 1] keeps the log argument away from zero.
        double r = std::sqrt(-2.0 * std::log1p(-u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    /// Exponential with the given rate (mean 1/rate).
    double exponential(double rate) noexcept { return -std::log1p(-uniform()) / rate; }

private:
    uint64_t state_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

} // namespace stobas
