#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "cotlab/numcore/tape.hpp"

namespace cotlab::testutil {

// Central finite differences against the analytic gradient. `f` must build a
// fresh record internally and return (loss value, analytic gradient of the
// flat parameter vector). Returns the max relative error with denominator
// floored at 1 so near-zero gradients are compared absolutely.
inline double gradcheck(const std::function<double(const std::vector<double>&)>& eval,
                        const std::vector<double>& at, const std::vector<double>& analytic,
                        double h = 1e-5) {
    double worst = 0.0;
    std::vector<double> p = at;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double keep = p[i];
        p[i] = keep + h;
        const double fp = eval(p);
        p[i] = keep - h;
        const double fm = eval(p);
        p[i] = keep;
        const double fd = (fp - fm) / (2.0 * h);
        const double denom = std::max({std::fabs(fd), std::fabs(analytic[i]), 1.0});
        worst = std::max(worst, std::fabs(fd - analytic[i]) / denom);
    }
    return worst;
}

}  // namespace cotlab::testutil
