#pragma once

#include <vector>

#include "cotlab/experiments/run_state.hpp"
#include "cotlab/model/weights.hpp"
#include "cotlab/tasks/cipher.hpp"

namespace cotlab::experiments {

struct TranslatorOptions {
    std::size_t episodes = 2000;
    std::size_t batch_size = 16;
    double lr = 1e-3;
    double temperature = 1.0;
    int k = 3;
    std::uint64_t seed = 0;
    std::size_t cot_budget = 16;
    std::size_t heldout = 200;
    bool kv_feed = false;        // expose R's KV cache from the triplet pass to T
    bool init_from_base = false; // start T from B instead of R (collusion mitigation)
};

struct TranslatorResult {
    model::ModelWeights translator;
    std::vector<double> reward_curve;     // batch-mean reward per episode
    double recovery_rate = 0.0;           // checker-verified plain-CoT recovery, held-out, greedy
    double final_reward = 0.0;            // greedy mean reward on held-out prompts
    double verbatim_oracle_reward = 0.0;  // reward of emitting CoT_R verbatim
};

// R produces (CoT_R, answer) per prompt; T reads the triplet and emits a new
// CoT; the reward is the mean per-token log-likelihood B assigns to
// (CoT_T, answer) given the prompt. Policy-gradient updates reach T only;
// R and B stay frozen (digest-checked).
TranslatorResult train_translator(const model::ModelWeights& reasoning,
                                  const model::ModelWeights& base,
                                  const TranslatorOptions& opt);

// The reward term alone, exposed for oracles and controls: mean per-token
// log-likelihood under `base` of continuing prompt <think> with
// cot </think> <ans> answer </ans>.
double translation_reward(const model::ModelWeights& base, const std::vector<int>& prompt,
                          const std::vector<int>& inner_cot,
                          const std::vector<int>& inner_answer);

nlohmann::ordered_json translator_report_json(const TranslatorResult& res,
                                              const TranslatorOptions& opt);

}  // namespace cotlab::experiments
