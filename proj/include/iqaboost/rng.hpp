#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string_view>
#include <vector>

namespace iqaboost {

// Counter-based generator (splitmix64). Every stream is a pure function of
// its seed, so experiment runs replay bit-for-bit on any platform.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double next_double(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform integer in [0, n) by rejection; n must be > 0.
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t limit = n * (UINT64_MAX / n);
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    // Standard normal via Box-Muller (two uniforms per pair, cached spare).
    double next_gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace detail

// Order-sensitive combination of seed material into one 64-bit value.
inline std::uint64_t hash64(std::uint64_t a) { return detail::mix64(a + 0x9E3779B97F4A7C15ULL); }

inline std::uint64_t hash64(std::uint64_t a, std::uint64_t b) {
    return detail::mix64(hash64(a) ^ (b + 0x9E3779B97F4A7C15ULL));
}

inline std::uint64_t hash64(std::uint64_t a, std::string_view s) {
    return hash64(a, detail::fnv1a64(s));
}

inline std::uint64_t hash64(std::uint64_t a, std::string_view s, std::uint64_t b) {
    return hash64(hash64(a, s), b);
}

// Seeded in-place Fisher-Yates shuffle of 0..n-1 index vectors.
template <typename T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed) {
    SplitMix64 rng(seed);
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace iqaboost
