#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace topomap {

/// The single seedable generator behind every stochastic step.
///
/// Wraps std::mt19937_64, whose output sequence is fixed by the standard.
/// The derived draws (uniform reals, bounded integers, normals, shuffles)
/// are implemented here instead of through <random> distributions, whose
/// algorithms differ between standard libraries. A seed therefore replays
/// bit-identically on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::size_t index(std::size_t n);

    /// Standard normal via the Box-Muller transform.
    double normal();

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(items[i - 1], items[j]);
        }
    }

    /// k distinct elements of `pool`, returned in ascending order.
    std::vector<std::size_t> sample(std::span<const std::size_t> pool, std::size_t k);

private:
    std::mt19937_64 engine_;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace topomap
