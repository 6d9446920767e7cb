#pragma once

#include <cstdint>
#include <cmath>
#include <utility>
#include <vector>

namespace axmlp {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// xoshiro256++, seeded through splitmix64. Hand-rolled so results are
// identical everywhere regardless of standard-library distribution details.
class Rng {
  public:
    explicit Rng(uint64_t seed = 0) { reseed(seed); }

    void reseed(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& w : s_)
            w = splitmix64(sm);
        cached_valid_ = false;
    }

    // Independent stream keyed by (seed, a, b): used for per-individual GA
    // streams so parallel scheduling cannot affect results.
    static Rng stream(uint64_t seed, uint64_t a, uint64_t b = 0) {
        uint64_t sm = seed;
        uint64_t mixed = splitmix64(sm) ^ (a * 0x9e3779b97f4a7c15ull) ^ (b * 0xc2b2ae3d27d4eb4full);
        return Rng(mixed);
    }

    uint64_t next_u64() {
        auto rotl = [](uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
        uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Unbiased bounded draw (Lemire).
    uint64_t below(uint64_t n) {
        if (n <= 1)
            return 0;
        __uint128_t m = (__uint128_t)next_u64() * n;
        uint64_t lo = (uint64_t)m;
        if (lo < n) {
            uint64_t threshold = (0 - n) % n;
            while (lo < threshold) {
                m = (__uint128_t)next_u64() * n;
                lo = (uint64_t)m;
            }
        }
        return (uint64_t)(m >> 64);
    }

    double real01() { return (next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return real01() < p; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * real01(); }

    double normal() {
        if (cached_valid_) {
            cached_valid_ = false;
            return cached_;
        }
        double u1 = real01(), u2 = real01();
        while (u1 <= 0.0)
            u1 = real01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        cached_valid_ = true;
        return r * std::cos(a);
    }

    template <typename T> void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = (size_t)below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    uint64_t s_[4];
    double cached_ = 0.0;
    bool cached_valid_ = false;
};

} // namespace axmlp
