#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace signidd {

// All randomness in the project flows through this wrapper. The mt19937_64
// engine is fully specified by the standard, and the uniform/normal draws
// below avoid std::*_distribution (whose algorithms are implementation
// defined), so a given seed produces the same stream on every platform.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; the second value of each pair is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi) {
        const int span = hi - lo + 1;
        int v = lo + static_cast<int>(uniform() * static_cast<double>(span));
        return v > hi ? hi : v;
    }

    uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Stateless mixing hash, used wherever a quantity must be a pure function of
// small integer keys (e.g. synthetic motif parameters).
inline uint64_t mix_hash(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t mix_hash(uint64_t a, uint64_t b) { return mix_hash(a * 0x9e3779b97f4a7c15ull + b + 1); }
inline uint64_t mix_hash(uint64_t a, uint64_t b, uint64_t c) { return mix_hash(mix_hash(a, b), c); }

// Hash mapped to [0, 1).
inline double hash_unit(uint64_t key) { return static_cast<double>(mix_hash(key) >> 11) * 0x1.0p-53; }

}  // namespace signidd
