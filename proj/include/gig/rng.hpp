#pragma once

#include <cstdint>
#include <cmath>
#include <vector>

namespace gig {

// Splittable counter RNG (SplitMix64). The state advances by the 64-bit
// golden-ratio constant and each output is the Stafford mix13 finalizer of
// the new state. Derived streams come from split(), which seeds a child
// generator with the parent's next output, so a (seed, split sequence) pair
// pins every value the generator will ever produce. Datasets and parameter
// initialisation draw exclusively from this generator; nothing depends on
// the standard library's unspecified distributions.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1), 53 mantissa bits.
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Bounded integer in [0, n) by modulo reduction. The bias is below
    // n / 2^64 and irrelevant for the small n used here.
    std::uint64_t below(std::uint64_t n) { return next() % n; }

    // Standard normal via Box-Muller: sqrt(-2 ln u1) * cos(2 pi u2) with u1
    // clamped away from zero. One pair of uniforms per call, second root
    // discarded, so the draw sequence is position-independent.
    double normal() {
        double u1 = next_double();
        if (u1 < 0x1.0p-53) u1 = 0x1.0p-53;
        double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    double normal(double mu, double sigma) { return mu + sigma * normal(); }

    // Child stream seeded from the parent's next output.
    SplitMix64 split() { return SplitMix64(next()); }

private:
    std::uint64_t state_;
};

// Fisher-Yates shuffle driven by SplitMix64.
template <typename T>
void shuffle(std::vector<T>& v, SplitMix64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace gig
