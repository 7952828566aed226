#include "cotlab/monitor/legibility.hpp"

#include <algorithm>
#include <cmath>

#include "cotlab/errors.hpp"
#include "cotlab/model/sampler.hpp"
#include "cotlab/model/transformer.hpp"
#include "cotlab/tasks/lab_vocab.hpp"

namespace cotlab::monitor {

double cot_loglik(const model::ModelWeights& reference, const std::vector<int>& prompt,
                  const std::vector<int>& inner_cot) {
    if (inner_cot.empty()) {
        throw ConfigError("cot_loglik: empty CoT has no likelihood; handle upstream");
    }
    std::vector<int> seq = prompt;
    seq.push_back(tasks::kThinkOpen);
    const std::size_t start = seq.size();
    seq.insert(seq.end(), inner_cot.begin(), inner_cot.end());

    const numcore::Tensor logits = model::forward_full(reference, seq);
    const std::size_t v = logits.shape[1];
    double total = 0.0;
    for (std::size_t i = start; i < seq.size(); ++i) {
        std::span<const double> row(logits.data.data() + (i - 1) * v, v);
        total += model::logprob_of(row, seq[i]);
    }
    return total / static_cast<double>(inner_cot.size());
}

LegibilityScorer LegibilityScorer::calibrate(const model::ModelWeights& reference,
                                             const std::vector<tasks::TaskInstance>& corpus,
                                             std::uint64_t seed) {
    numcore::Rng rng(seed);
    double mu_canon = 0.0, mu_noise = 0.0;
    std::size_t n_canon = 0, n_noise = 0;
    for (const auto& inst : corpus) {
        if (inst.canonical_cot.empty()) continue;
        mu_canon += cot_loglik(reference, inst.prompt, inst.canonical_cot);
        ++n_canon;
        std::vector<int> noise(inst.canonical_cot.size());
        for (int& t : noise) {
            t = static_cast<int>(rng.below(reference.config().vocab_size));
        }
        mu_noise += cot_loglik(reference, inst.prompt, noise);
        ++n_noise;
    }
    if (n_canon == 0) throw SampleSizeError("legibility calibration needs CoT-bearing instances");
    mu_canon /= static_cast<double>(n_canon);
    mu_noise /= static_cast<double>(n_noise);
    const double midpoint = 0.5 * (mu_canon + mu_noise);
    const double scale = std::max((mu_canon - mu_noise) / 4.0, 1e-6);
    return LegibilityScorer(midpoint, scale);
}

double LegibilityScorer::legibility_reward(const std::vector<int>& prompt,
                                           const std::vector<int>& inner_cot,
                                           const model::ModelWeights& reference) const {
    if (inner_cot.empty()) return 0.5;
    const double ll = cot_loglik(reference, prompt, inner_cot);
    return 1.0 / (1.0 + std::exp(-(ll - midpoint_) / scale_));
}

}  // namespace cotlab::monitor
