#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace qkdsim {

// splitmix64 step; also used as a stateless hash/finalizer for seed derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Derive a decorrelated child seed from a base seed and a stream index.
// Same golden-ratio mixing idiom as the seeding helpers in the wild.
inline std::uint64_t stream_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t s = base ^ (index * 0x9E3779B97F4A7C15ULL);
    return splitmix64(s);
}

inline std::uint64_t stream_seed(std::uint64_t base, std::uint64_t i, std::uint64_t j) {
    return stream_seed(stream_seed(base, i), j);
}

inline std::uint64_t stream_seed(std::uint64_t base, std::uint64_t i, std::uint64_t j,
                                 std::uint64_t k) {
    return stream_seed(stream_seed(base, i, j), k);
}

// xoshiro256** with an explicit Box-Muller transform.
//
// <random> engines would do, but the standard *distributions* are
// implementation-defined, and the simulator guarantees byte-identical
// reruns for a given seed. Hand-rolling the two dozen lines keeps the
// whole random path pinned down.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal deviate (Box-Muller, trigonometric form).
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();  // log(0) guard
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4]{};
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace qkdsim
