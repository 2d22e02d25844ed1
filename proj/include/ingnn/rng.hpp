#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace ingnn {

// SplitMix64 generator. Every random draw in the project goes through this
// class instead of <random> distributions, so that a given seed produces the
// same stream on every platform and compiler.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [0, bound). Unbiased via modulo rejection.
    std::uint64_t next_below(std::uint64_t bound) {
        const std::uint64_t max = ~std::uint64_t{0};
        std::uint64_t x, r;
        do {
            x = next_u64();
            r = x % bound;
        } while (x - r > max - (bound - 1));
        return r;
    }

    std::size_t next_index(std::size_t bound) {
        return static_cast<std::size_t>(next_below(static_cast<std::uint64_t>(bound)));
    }

    // Standard normal via Box-Muller; the second value of each pair is cached.
    double next_normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = 1.0 - next_double();  // (0, 1]
        double u2 = next_double();
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 6.283185307179586476925286766559 * u2;
        cached_ = radius * std::sin(angle);
        have_cached_ = true;
        return radius * std::cos(angle);
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = next_index(i);
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t state_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

// Derives an independent stream seed from a master seed and a stream tag.
// Used wherever one run needs several decorrelated sources (init, dropout,
// splits, data generation), and to give every run of a multi-run suite its
// own seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    Rng mixer(master ^ (0x517cc1b727220a95ULL * (stream + 1)));
    return mixer.next_u64();
}

namespace stream {
inline constexpr std::uint64_t param_init = 1;
inline constexpr std::uint64_t dropout = 2;
inline constexpr std::uint64_t split = 3;
inline constexpr std::uint64_t synth_graph = 4;
inline constexpr std::uint64_t synth_features = 5;
inline constexpr std::uint64_t monte_carlo = 6;
}  // namespace stream

}  // namespace ingnn
