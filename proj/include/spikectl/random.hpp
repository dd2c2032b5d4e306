#ifndef SPIKECTL_RANDOM_HPP
#define SPIKECTL_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace spikectl {

/// Seeded random stream used everywhere a simulation needs noise.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The conversions to uniform/normal/Poisson variates are written
/// out here instead of using the <random> distributions, whose algorithms
/// are implementation-defined, so that a seed yields the same run on every
/// toolchain.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal variate (Box-Muller, one value per call).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) {
            u1 = uniform();
        }
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Poisson variate by sequential inversion; intended for small means
    /// (per-timestep spike counts).
    std::uint32_t poisson(double mean) {
        if (mean <= 0.0) {
            return 0;
        }
        const double u = uniform();
        double p = std::exp(-mean);
        double cdf = p;
        std::uint32_t k = 0;
        while (u >= cdf && k < 1000) {
            ++k;
            p *= mean / static_cast<double>(k);
            cdf += p;
        }
        return k;
    }

private:
    std::mt19937_64 engine_;
};

/// Derives an independent stream seed from a base seed and a stream id
/// (splitmix64 finalizer).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace spikectl

#endif  // SPIKECTL_RANDOM_HPP
