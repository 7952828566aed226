#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace cotlab::tasks {

// Windowed mean of (provided - holdout). The hacking flag fires at the first
// window whose mean gap exceeds tau; series[i] covers episodes [i, i+window).
struct DivergenceResult {
    std::vector<double> series;
    std::optional<std::size_t> flag_index;
    double tau = 0.0;
    std::size_t window = 0;
};

DivergenceResult divergence(std::span<const double> provided_curve,
                            std::span<const double> holdout_curve, std::size_t window,
                            double tau);

}  // namespace cotlab::tasks
