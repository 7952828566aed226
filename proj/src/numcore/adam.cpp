#include "cotlab/numcore/adam.hpp"

#include <cmath>
#include <string>

#include "cotlab/errors.hpp"

namespace cotlab::numcore {

void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& state,
               const AdamConfig& cfg) {
    if (grads.size() != params.size()) {
        throw ShapeError("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                         std::to_string(params.size()) + " parameters");
    }
    if (state.m.empty()) state.m.assign(params.size(), 0.0);
    if (state.v.empty()) state.v.assign(params.size(), 0.0);
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw ShapeError("adam_step: optimizer state does not match parameter count");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    const double decay = 1.0 - cfg.lr * cfg.weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (cfg.weight_decay != 0.0) params[i] *= decay;
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

}  // namespace cotlab::numcore
