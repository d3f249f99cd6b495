#ifndef PANELBN_RANDOM_HPP
#define PANELBN_RANDOM_HPP

#include <cstdint>
#include <cmath>
#include <limits>
#include <random>
#include <utility>

namespace panelbn {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for stream `index` of a run rooted at `master`. Streams are derived
/// rather than shared so that parallel work is schedule independent.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t master, std::uint64_t index) {
    return Rng(derive_seed(master, index));
}

// std::normal_distribution is implementation-defined; this keeps samples
// reproducible across standard libraries.
inline double standard_normal(Rng& rng) {
    constexpr double two_pi = 6.283185307179586476925286766559;
    const double scale = 0x1.0p-53;
    double u1;
    do {
        u1 = static_cast<double>(rng() >> 11) * scale;
    } while (u1 <= 0.0);
    double u2 = static_cast<double>(rng() >> 11) * scale;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, bound) by rejection; bound > 0.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return r % bound;
}

template <typename It>
void shuffle(It first, It last, Rng& rng) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
        auto j = uniform_index(rng, i);
        std::swap(first[i - 1], first[j]);
    }
}

}  // namespace panelbn

#endif  // PANELBN_RANDOM_HPP
