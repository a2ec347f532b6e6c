#pragma once

#include <cstdint>

namespace aegn {

// SplitMix64. Used everywhere randomness is needed so that results are
// reproducible across platforms; std::uniform_* distributions are
// implementation-defined and must not appear in library code.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double next_double(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Uniform integer in [0, n). n must be positive.
    uint64_t next_below(uint64_t n) {
        return next_u64() % n;
    }

    // Polarity-style coin flip: returns -1 or +1.
    int next_sign() {
        return (next_u64() & 1) ? 1 : -1;
    }

private:
    uint64_t state_;
};

} // namespace aegn
