// Counter-based splittable random streams (splitmix64). Each Monte Carlo
// trial owns the substream derived from (seed, trialIndex), so results do
// not depend on scheduling or worker count.
#pragma once

#include <cstdint>
#include <vector>

namespace wfsim {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : state_(seed) {}

    // Substream for one trial: two finalizer rounds decorrelate adjacent
    // counters even for small seeds.
    static RandomStream substream(std::uint64_t seed, std::uint64_t counter) {
        return RandomStream(mix64(seed ^ mix64(counter ^ 0xA0761D6478BD642FULL)));
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Cumulative-probability inversion over `probs` (need not sum to exactly 1;
    // the last bin absorbs rounding). Zero-width bins are never selected.
    std::size_t pick(const std::vector<double>& probs) {
        double total = 0.0;
        for (double p : probs) total += p;
        const double u = uniform01() * total;
        double cum = 0.0;
        for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
            cum += probs[k];
            if (u < cum && probs[k] > 0.0) return k;
        }
        return probs.size() - 1;
    }

private:
    std::uint64_t state_;
};

} // namespace wfsim
