#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace wavelit {

// Counter-based deterministic RNG. The whole state is (key, counter), so a
// stream can be checkpointed and resumed bit-exactly by persisting two
// integers. Every source of randomness in the project derives a named
// sub-stream from one master seed.
struct Rng {
    std::uint64_t key = 0;
    std::uint64_t counter = 0;

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t hash_name(std::string_view name) {
        std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
        for (unsigned char c : name) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    static Rng stream(std::uint64_t seed, std::string_view name) {
        return Rng{mix(seed ^ hash_name(name)), 0};
    }

    std::uint64_t next_u64() {
        return mix(key + counter++ * 0x9e3779b97f4a7c15ULL);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller without the cached second value, so the draw count per call
    // is fixed and the stream stays resumable.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Index in [0, n).
    std::uint64_t below(std::uint64_t n) {
        return next_u64() % n;
    }
};

}  // namespace wavelit
