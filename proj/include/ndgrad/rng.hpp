#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ndgrad {

// Deterministic random source. The mt19937_64 engine is fully specified by
// the standard; every distribution transform below is hand-rolled so that a
// (seed, stream) pair produces the same draw sequence on every platform and
// standard library. std::*_distribution is never used.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next_u64();

    // Uniform on [0, 1) with 53 random bits.
    double uniform();
    // Uniform on [lo, hi).
    double uniform(double lo, double hi);
    // Uniform integer in [0, n). n must be positive.
    std::size_t uniform_index(std::size_t n);

    // Standard normal via Box-Muller; the spare value is cached.
    double normal();

    // Gamma(alpha, 1) via Marsaglia-Tsang squeeze for alpha >= 1 and the
    // boost U^(1/alpha) reduction for alpha < 1.
    double gamma(double alpha);

    // Beta(a, b) from two gamma draws.
    double beta(double a, double b);

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_normal_ = false;
    double spare_normal_ = 0.0;
};

}  // namespace ndgrad
