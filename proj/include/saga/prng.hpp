#pragma once

#include <cstdint>

namespace saga {

// xoshiro256** (Blackman/Vigna public-domain constants), seeded through
// splitmix64. Integer-only state transitions keep the scalar stream
// bit-identical on every platform; the normal variate below avoids libm
// transcendentals for the same reason.
class Prng {
   public:
    explicit Prng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
    }

    // Independent child stream: mix(seed, stream_index).
    static Prng child(uint64_t seed, uint64_t stream_index) {
        uint64_t x = seed;
        uint64_t a = splitmix64(x);
        return Prng(a ^ splitmix64_once(stream_index + 0x9E3779B97F4A7C15ULL));
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Gaussian approximation: sum of 12 uniforms minus 6 (zero mean, unit
    // variance). Pure arithmetic, so streams stay platform-identical.
    double normal() {
        double s = 0.0;
        for (int i = 0; i < 12; i++) s += uniform();
        return s - 6.0;
    }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) {
        // Rejection sampling on the top bits to avoid modulo bias.
        const uint64_t limit = n * ((~uint64_t{0}) / n);
        uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    static uint64_t splitmix64(uint64_t& x) {
        x += 0x9E3779B97F4A7C15ULL;
        return splitmix64_once(x);
    }

   private:
    static uint64_t splitmix64_once(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t state_[4];
};

}  // namespace saga
