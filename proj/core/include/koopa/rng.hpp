#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace koopa {

/// SplitMix64: 64-bit state, one addition and a finalising mix per draw.
/// Satisfies UniformRandomBitGenerator so it plugs into <random>
/// distributions. `split(stream)` derives an independent generator for a
/// numbered stream (layer init, shuffling, synthetic data, ...).
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) noexcept : state_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    Rng split(std::uint64_t stream) const noexcept {
        Rng mixer(state_ ^ (0xD1B54A32D192ED03ULL * (stream + 1)));
        return Rng(mixer());
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    double normal(double mean = 0.0, double stddev = 1.0) {
        std::normal_distribution<double> dist(mean, stddev);
        return dist(*this);
    }

    std::uint64_t state() const noexcept { return state_; }

private:
    std::uint64_t state_;
};

} // namespace koopa
