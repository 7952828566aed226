#include "cotlab/tasks/divergence.hpp"

#include <string>

#include "cotlab/errors.hpp"

namespace cotlab::tasks {

DivergenceResult divergence(std::span<const double> provided_curve,
                            std::span<const double> holdout_curve, std::size_t window,
                            double tau) {
    if (provided_curve.size() != holdout_curve.size()) {
        throw ShapeError("divergence: curve lengths differ (" +
                         std::to_string(provided_curve.size()) + " vs " +
                         std::to_string(holdout_curve.size()) + ")");
    }
    if (window == 0 || provided_curve.size() < window) {
        throw ShapeError("divergence: curves must be at least one window long");
    }
    DivergenceResult res;
    res.tau = tau;
    res.window = window;
    const std::size_t n = provided_curve.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < window; ++i) acc += provided_curve[i] - holdout_curve[i];
    res.series.reserve(n - window + 1);
    for (std::size_t i = 0;; ++i) {
        const double mean = acc / static_cast<double>(window);
        res.series.push_back(mean);
        if (!res.flag_index && mean > tau) res.flag_index = i;
        if (i + window >= n) break;
        acc += (provided_curve[i + window] - holdout_curve[i + window]) -
               (provided_curve[i] - holdout_curve[i]);
    }
    return res;
}

}  // namespace cotlab::tasks
