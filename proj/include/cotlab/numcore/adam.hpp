#pragma once

#include <cstdint>
#include <vector>

#include "cotlab/numcore/tensor.hpp"

namespace cotlab::numcore {

// First/second moment buffers for one flat parameter vector.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled (AdamW)
};

// Standard bias-corrected Adam update, in place. Deterministic given inputs.
void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& state,
               const AdamConfig& cfg);

}  // namespace cotlab::numcore
