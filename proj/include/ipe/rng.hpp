// rng.hpp — keyed counter-based random streams.
//
// Every stochastic task owns a stream derived from (seed, stream id).
// Streams are independent of execution order and thread count, so a run
// is reproducible bit-for-bit from its seed alone. All distributions are
// implemented here rather than via <random>, whose distributions are not
// portable across standard libraries.

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>

namespace ipe {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0, std::uint64_t substream = 0)
        : state_(splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ substream)) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    bool bernoulli(double p) { return u01() < p; }

    // Index into a cumulative weight table (last entry = total weight).
    int discrete_cdf(std::span<const double> cdf) {
        const double u = u01() * cdf.back();
        int lo = 0, hi = static_cast<int>(cdf.size()) - 1;
        while (lo < hi) {
            const int mid = (lo + hi) / 2;
            if (cdf[static_cast<size_t>(mid)] <= u) lo = mid + 1; else hi = mid;
        }
        return lo;
    }

    // Knuth multiplication method; fine for the small means used here.
    int poisson(double lambda) {
        if (lambda < 0.0) throw std::invalid_argument("poisson: negative mean");
        if (lambda == 0.0) return 0;
        const double l = std::exp(-lambda);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= u01();
        } while (p > l);
        return k - 1;
    }

private:
    std::uint64_t state_;
};

} // namespace ipe
