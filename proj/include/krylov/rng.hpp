#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace krylov {

/// Reproducible seed for all generators: same seed + same parameters give
/// bit-identical output across runs of the same build.
struct Seed {
    std::uint64_t value = 0;
};

/// SplitMix64 (Vigna / Steele et al.): a counter-based generator whose
/// state is a Weyl sequence with the golden-ratio increment and whose
/// output is a finalizing 64-bit mixer of the counter. Chosen for its
/// fixed, documented algorithm: outputs depend only on (seed, call index).
class SplitMix64 {
public:
    explicit SplitMix64(Seed seed) : state_(seed.value) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform in (0, 1]: 53 mantissa bits, shifted into the open-below
    /// interval so log() in Box–Muller is always defined.
    double next_open_unit() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Uniform in [0, 1).
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

/// Standard Gaussians via the Box–Muller transform over SplitMix64
/// uniforms; pairs are generated together and handed out in order.
class GaussianSource {
public:
    explicit GaussianSource(Seed seed) : rng_(seed) {}

    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = rng_.next_open_unit();
        const double u2 = rng_.next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    SplitMix64 rng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace krylov
