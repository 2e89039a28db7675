#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace tsattack {

// Seed derivation and random number generation.
//
// Every random consumer in the toolkit gets its own stream, derived from a
// master seed plus a stable text label. Adding a new consumer (new label)
// never changes the numbers an existing consumer sees. The raw engine is
// std::mt19937_64, whose output sequence is pinned by the standard; the
// float/int mappings below are hand-rolled so results do not depend on the
// standard library's distribution implementations.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Stable (master, label) -> sub-seed map. FNV-1a over the label, mixed with
// the master seed through splitmix64.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return splitmix64(master ^ splitmix64(h));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform index in [0, n). Consumes exactly one engine draw; the modulo
    // bias is negligible for the small n used here.
    std::uint64_t below(std::uint64_t n) { return next() % n; }

    // Standard normal via Box-Muller (no rejection, so the draw count per
    // value is fixed).
    double normal(double mean = 0.0, double sigma = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + sigma * spare_;
        }
        double u1 = 1.0 - uniform01();  // (0, 1]
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return mean + sigma * r * std::cos(a);
    }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace tsattack
