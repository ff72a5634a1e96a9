#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace occmil {

// splitmix64 stream. Every stochastic choice in the engine draws from one of
// these, so a run is a pure function of its seeds.
struct Prng {
    std::uint64_t state = 0;

    Prng() = default;
    explicit Prng(std::uint64_t seed) : state(seed) {}

    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ull;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t next() {
        state += kGamma;
        return mix(state);
    }

    // Substream keyed by tag; independent of this stream's own draw position.
    Prng derive(std::uint64_t tag) const {
        return Prng(mix((state ^ tag) + kGamma));
    }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; consumes exactly two draws per call.
    double gauss() {
        const double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = static_cast<double>(next() >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::size_t below(std::size_t n) {
        return static_cast<std::size_t>(next() % n);
    }

    // Fisher-Yates, high index down.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }
};

}  // namespace occmil
