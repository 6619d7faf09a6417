#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace trapscan {

// Pairwise-tree summation: deterministic for a fixed input order and more
// accurate than a running sum on long inputs.
inline double pairwise_sum(std::span<const double> xs) {
    const std::size_t n = xs.size();
    if (n <= 16) {
        double acc = 0.0;
        for (double x : xs) acc += x;
        return acc;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

inline double mean_of(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    return pairwise_sum(xs) / static_cast<double>(xs.size());
}

inline double population_std(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    const double m = mean_of(xs);
    std::vector<double> sq(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double d = xs[i] - m;
        sq[i] = d * d;
    }
    return std::sqrt(mean_of(sq));
}

}  // namespace trapscan
