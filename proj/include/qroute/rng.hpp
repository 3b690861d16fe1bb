#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace qroute {

// splitmix64, used to expand seeds and derive independent sub-streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256** with hand-rolled transforms so that streams are bit-identical
// across platforms and standard-library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

    void reseed(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
        cached_normal_valid_ = false;
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

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) {
        // Rejection sampling to avoid modulo bias.
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller (deterministic pair caching).
    double normal() {
        if (cached_normal_valid_) {
            cached_normal_valid_ = false;
            return cached_normal_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        cached_normal_ = r * std::sin(theta);
        cached_normal_valid_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Poisson by inversion for small rates, normal approximation above.
    int poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        if (lambda < 30.0) {
            const double limit = std::exp(-lambda);
            double prod = uniform();
            int k = 0;
            while (prod > limit) {
                prod *= uniform();
                ++k;
            }
            return k;
        }
        const double x = normal(lambda, std::sqrt(lambda));
        return x < 0.0 ? 0 : static_cast<int>(std::lround(x));
    }

    // Derives an independent child stream; `tag` distinguishes purposes.
    Rng split(std::uint64_t tag) const {
        std::uint64_t mix = s_[0] ^ rotl(s_[2], 13) ^ (tag * 0x9e3779b97f4a7c15ULL);
        return Rng(splitmix64(mix));
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4] = {};
    double cached_normal_ = 0.0;
    bool cached_normal_valid_ = false;
};

// Stable seed derivation for named sub-streams (episode seeds, per-link noise, ...).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index, std::uint64_t purpose = 0) {
    std::uint64_t s = base ^ (0x6a09e667f3bcc909ULL + purpose * 0x517cc1b727220a95ULL);
    splitmix64(s);
    s ^= index * 0xd1342543de82ef95ULL;
    return splitmix64(s);
}

}  // namespace qroute
