#pragma once

// Deterministic pseudo-random generation for reproducible simulations.
//
// The generator is PCG XSH-RR 64/32: 64-bit LCG state, 32-bit permuted
// output, selectable stream. It is implemented in-repo (rather than using
// <random>) so that every data set, index sequence and trajectory in this
// library is a bit-identical function of its seed on every platform and
// standard library. Gaussian variates come from the Box-Muller transform
// with the usual cached spare.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace kbias {

/// splitmix64 finalizer; decent avalanche, used only for seed derivation.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Derives a decorrelated child seed from a master seed and a purpose id
/// (train data, test data, per-scheme index streams, ...).
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t id) {
    return mix64(seed ^ mix64(id));
}

class Pcg32 {
public:
    explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 0) { reseed(seed, stream); }

    void reseed(std::uint64_t seed, std::uint64_t stream = 0) {
        state_ = 0;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += seed;
        next_u32();
        has_spare_ = false;
        spare_ = 0.0;
    }

    std::uint32_t next_u32() {
        const std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        const auto rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    /// Unbiased draw from {0, ..., bound-1} by rejection.
    std::uint32_t next_below(std::uint32_t bound) {
        const std::uint32_t threshold = (-bound) % bound;
        for (;;) {
            const std::uint32_t r = next_u32();
            if (r >= threshold) return r % bound;
        }
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_u01() {
        const std::uint64_t hi = next_u32() >> 5;   // 27 bits
        const std::uint64_t lo = next_u32() >> 6;   // 26 bits
        return (static_cast<double>(hi) * 67108864.0 + static_cast<double>(lo)) /
               9007199254740992.0;
    }

    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_u01(); }

    /// Standard normal via Box-Muller; consumes two uniforms per pair and
    /// caches the second variate.
    double next_gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - next_u01();  // (0, 1], keeps log() finite
        const double u2 = next_u01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_ = 0;
    std::uint64_t inc_ = 1;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Fixed stream ids; every generator owns one so that two generators given
// the same seed still produce unrelated draws.
inline constexpr std::uint64_t kStreamSphere = 1;
inline constexpr std::uint64_t kStreamSine = 2;
inline constexpr std::uint64_t kStreamTauCheck = 3;
inline constexpr std::uint64_t kStreamSynthetic = 4;
inline constexpr std::uint64_t kStreamSgdIndex = 5;

}  // namespace kbias
