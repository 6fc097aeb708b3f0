#pragma once

#include <cmath>
#include <cstdint>

namespace midt {

// Deterministic 64-bit generator (splitmix64). All randomness in the project
// flows through this class so datasets, training runs and samples are
// bit-reproducible across platforms. fork(key) derives an independent stream
// from the root seed, so per-record / per-step streams do not depend on
// consumption order.
class Rng {
public:
    explicit Rng(uint64_t seed) : root_(seed), state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n)
    uint64_t uniform_int(uint64_t n) {
        // rejection sampling to avoid modulo bias
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do { x = next_u64(); } while (x >= limit);
        return x % n;
    }

    // standard normal via Box-Muller (explicit formula, not
    // std::normal_distribution, whose output is implementation-defined)
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    Rng fork(uint64_t key) const {
        uint64_t z = root_ ^ (0xD1B54A32D192ED03ULL * (key + 1));
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return Rng(z ^ (z >> 31));
    }

private:
    uint64_t root_;
    uint64_t state_;
};

}  // namespace midt
