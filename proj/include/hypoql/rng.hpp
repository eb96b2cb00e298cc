#ifndef HYPOQL_RNG_HPP
#define HYPOQL_RNG_HPP

#include <cstdint>
#include <cmath>

namespace hypoql {

/// Counter-based 64-bit generator (SplitMix64). The state advances by the
/// golden-ratio increment and the output is a bijective hash of the counter,
/// so distinct seeds give statistically independent streams. Normal variates
/// use Box-Muller, which keeps the stream identical across platforms
/// (std::normal_distribution is implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; generates pairs, caches the spare.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0,1] so the log is finite.
        double u1 = 1.0 - uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Golden-ratio hash of a stream index.
inline std::uint64_t golden_hash(std::uint64_t k) {
    std::uint64_t z = (k + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Seed of substream k of `base`: base XOR golden-ratio-hash(k). Used for
/// Monte Carlo replicates and per-stage generators, so streams never overlap
/// without needing jump-ahead support.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t k) {
    return base ^ golden_hash(k);
}

} // namespace hypoql

#endif
