#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace embaudit {

// SplitMix64 finalizer, used to derive independent per-iteration streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Stream seed for iteration k of a run seeded with `seed`. Iterations are
// order-insensitive: stream i never depends on stream j.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t iteration) {
    return seed ^ splitmix64(iteration);
}

// mt19937_64 engine with hand-rolled distributions. The engine's output
// sequence is pinned by the standard; the std:: distributions are not, so
// every draw below is implemented directly to keep results identical across
// standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Unbiased integer in [0, m), m > 0. Rejection sampling.
    std::uint64_t below(std::uint64_t m) {
        const std::uint64_t min = (0 - m) % m;  // 2^64 mod m
        std::uint64_t r = eng_();
        while (r < min) r = eng_();
        return r % m;
    }

    // Uniform double in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller; caches the spare draw.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] so log(u1) is finite.
        const double u1 = (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.28318530717958647692 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// First k of a Fisher-Yates shuffle of [0, n); returned sorted ascending.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng);

// In-place Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::swap(v[i - 1], v[rng.below(i)]);
    }
}

}  // namespace embaudit
