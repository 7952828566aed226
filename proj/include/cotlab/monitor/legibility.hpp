#pragma once

#include <vector>

#include "cotlab/model/weights.hpp"
#include "cotlab/tasks/task.hpp"

namespace cotlab::monitor {

// Mean per-token log-likelihood of an inner CoT under a frozen reference
// model, conditioned on the prompt (and the <think> opener).
double cot_loglik(const model::ModelWeights& reference, const std::vector<int>& prompt,
                  const std::vector<int>& inner_cot);

// Monotone (logistic) transform of cot_loglik into [0,1]. The midpoint is
// calibrated between the canonical-corpus mean and a uniform-random-token
// baseline, so canonical CoTs land above 0.5 and token noise below. An empty
// CoT scores exactly 0.5 (no evidence).
class LegibilityScorer {
public:
    LegibilityScorer(double midpoint, double scale) : midpoint_(midpoint), scale_(scale) {}

    static LegibilityScorer calibrate(const model::ModelWeights& reference,
                                      const std::vector<tasks::TaskInstance>& corpus,
                                      std::uint64_t seed = 17);

    double legibility_reward(const std::vector<int>& prompt, const std::vector<int>& inner_cot,
                             const model::ModelWeights& reference) const;

    double midpoint() const { return midpoint_; }
    double scale() const { return scale_; }

private:
    double midpoint_;
    double scale_;
};

}  // namespace cotlab::monitor
