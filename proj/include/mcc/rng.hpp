#pragma once

#include <cmath>
#include <cstdint>

namespace mcc {

/**
 * Counter-based splittable generator (splitmix64 core).
 *
 * Streams are derived from (seed, key...) pairs, so per-view substreams are
 * independent of evaluation order and identical across platforms. All
 * distributions are hand-rolled: the standard library's distribution
 * implementations differ across toolchains.
 */
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    // Child stream for a (seed, key0, key1) tuple.
    static Rng stream(std::uint64_t seed, std::uint64_t key0,
                      std::uint64_t key1 = 0) {
        Rng r(mix(seed + 0x9E3779B97F4A7C15ull * (key0 + 1)) ^
              mix(key1 + 0xD1B54A32D192ED03ull));
        r.next();
        return r;
    }

    std::uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ull;
        return mix(state_);
    }

    // Uniform double in [0, 1).
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }

    // Uniform double in [lo, hi]; returns lo exactly when lo == hi.
    double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

    // Uniform integer in [lo, hi].
    int uniform_int(int lo, int hi) {
        if (hi <= lo) return lo;
        const int span = hi - lo + 1;
        int v = lo + int(uniform() * span);
        return v > hi ? hi : v;
    }

    // Knuth's product-of-uniforms sampler; fine for small means.
    int poisson(double mean) {
        if (!(mean > 0)) return 0;
        const double limit = std::exp(-mean);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }

    bool bernoulli(double p) { return uniform() < p; }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ull;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_;
};

}  // namespace mcc
