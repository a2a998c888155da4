#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include "towgame/vec.hpp"

namespace towgame {

inline constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/**
 * Counter-based stream generator. Output k of stream (seed, stream) is a
 * pure function of (seed, stream, k), so Monte Carlo sample i can be
 * replayed without touching any other sample.
 */
class StreamRng {
public:
    using result_type = std::uint64_t;

    StreamRng(std::uint64_t seed, std::uint64_t stream)
        : key_(splitmix64_mix(seed ^ splitmix64_mix(stream + 0x632be59bd9b4e019ULL))) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return splitmix64_mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Standard normal (Box-Muller, one value per call).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t draws() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Uniform sample from the closed unit ball B_1 in R^Dim: Gaussian
/// direction scaled by U^(1/Dim).
template <int Dim>
Vec<Dim> uniform_in_ball(StreamRng& rng) {
    Vec<Dim> g{};
    double r2 = 0.0;
    do {
        r2 = 0.0;
        for (int d = 0; d < Dim; ++d) {
            g[d] = rng.normal();
            r2 += g[d] * g[d];
        }
    } while (r2 == 0.0);
    const double radius = std::pow(rng.uniform(), 1.0 / Dim);
    return (radius / std::sqrt(r2)) * g;
}

}  // namespace towgame
