/**
 * @file rng.hpp
 * @brief Deterministic random number generation with splittable streams.
 *
 * All randomized operations in the library derive their draws from these
 * primitives so that results are bit-identical for a given seed, independent
 * of thread count, platform, and standard-library version.
 */

#ifndef ADB_RNG_HPP
#define ADB_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

namespace adb {

/// SplitMix64: fast 64-bit mixer, used both as a stream splitter and as the
/// core generator. Passes BigCrush; one multiply-xor-shift round per draw.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1): 53-bit mantissa resolution.
    double next_double() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    /// Uniform in (0, 1]: never returns zero (safe under log()).
    double next_double_open() {
        return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Unbiased uniform integer in [0, bound) via rejection sampling.
    std::uint64_t next_below(std::uint64_t bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            std::uint64_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

    /// Standard normal draw (Box-Muller, two uniforms per draw, stateless).
    double next_normal() {
        double u1 = next_double_open();
        double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t state_;
};

/// Derive an independent substream seed from (seed, stream ids). Used to give
/// every permutation, model, and subsample its own generator so that results
/// do not depend on evaluation order.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t a,
                                std::uint64_t b = 0, std::uint64_t c = 0) {
    SplitMix64 mixer(seed);
    std::uint64_t s = mixer.next();
    s ^= SplitMix64(a + 0x632BE59BD9B4E019ULL).next();
    s = SplitMix64(s).next();
    s ^= SplitMix64(b + 0x106689D45497FDB5ULL).next();
    s = SplitMix64(s).next();
    s ^= SplitMix64(c + 0x9E3779B97F4A7C15ULL).next();
    return SplitMix64(s).next();
}

}  // namespace adb

#endif  // ADB_RNG_HPP
