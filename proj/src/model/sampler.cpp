#include "cotlab/model/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cotlab/errors.hpp"

namespace cotlab::model {

int sample(std::span<const double> logits, double temperature, numcore::Rng& rng) {
    if (logits.empty()) throw ShapeError("sample: empty logit vector");
    if (temperature < 0.0) throw ConfigError("sample: temperature must be >= 0");
    if (temperature == 0.0) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < logits.size(); ++i) {
            if (logits[i] > logits[best]) best = i;
        }
        return static_cast<int>(best);
    }
    const double inv_t = 1.0 / temperature;
    double mx = logits[0] * inv_t;
    for (double v : logits) mx = std::max(mx, v * inv_t);
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] * inv_t - mx);
        sum += p[i];
    }
    const double r = rng.uniform() * sum;
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (r < acc) return static_cast<int>(i);
    }
    return static_cast<int>(p.size()) - 1;
}

double logprob_of(std::span<const double> logits, int token) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    return logits[static_cast<std::size_t>(token)] - mx - std::log(sum);
}

}  // namespace cotlab::model
