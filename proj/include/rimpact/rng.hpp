#pragma once

#include <cmath>
#include <cstdint>

namespace rimpact {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Counter-derived substreams: the state is a hash of (seed, stream), so every
// stream can be generated independently and in any order with identical
// results. Stream 0 with a given seed is the "main" stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        std::uint64_t s1 = seed + 0x9E3779B97F4A7C15ULL;
        const std::uint64_t h1 = splitmix64_next(s1);
        std::uint64_t s2 = stream ^ 0xD1B54A32D192ED03ULL;
        const std::uint64_t h2 = splitmix64_next(s2);
        state_ = h1 ^ (h2 * 0xFF51AFD7ED558CCDULL + 0x2545F4914F6CDD1DULL);
    }

    std::uint64_t next_u64() { return splitmix64_next(state_); }

    // strictly inside (0, 1)
    double uniform01() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 6.283185307179586 * u2;
        spare_ = r * std::sin(th);
        have_spare_ = true;
        return r * std::cos(th);
    }

private:
    std::uint64_t state_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace rimpact
