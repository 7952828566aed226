#pragma once

#include <functional>
#include <vector>

#include "cotlab/model/transformer.hpp"
#include "cotlab/numcore/adam.hpp"
#include "cotlab/tasks/task.hpp"

namespace cotlab::train {

// Which target positions carry loss. Prompt positions never do.
enum class LossSpan { CotAndAnswer, AnswerOnly };

struct SftOptions {
    std::size_t batch_size = 16;
    double lr = 1e-3;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    // Optional stepwise control (used by steps-to-criterion measurements):
    // eval_hook is called every eval_every optimizer steps and stops the run
    // when it returns true. max_steps caps the total optimizer steps.
    std::size_t eval_every = 0;
    std::function<bool(std::size_t)> eval_hook;
    std::size_t max_steps = 0;
};

struct SftResult {
    std::vector<double> step_loss;
    std::vector<double> epoch_mean;
    std::size_t steps = 0;
    bool stopped_by_hook = false;
};

// Cross-entropy on the selected spans, mean per target token, Adam updates.
// Deterministic given (weights, corpus, options).
SftResult sft(model::ModelWeights& w, const std::vector<tasks::TaskInstance>& corpus,
              std::size_t epochs, const SftOptions& opt = {});

SftResult sft_sequences(model::ModelWeights& w, const std::vector<model::TokenSequence>& seqs,
                        LossSpan span, std::size_t epochs, const SftOptions& opt = {});

// Single-example loss builder, exposed so tests can inspect logit gradients.
numcore::Tensor sft_example_loss(numcore::Tape& tape, const model::ModelWeights& w,
                                 const model::TokenSequence& seq, LossSpan span,
                                 numcore::Tensor* logits_out = nullptr);

// prompt <ans> answer </ans> <eos> with an empty CoT span.
model::TokenSequence assemble_answer_only(const std::vector<int>& prompt,
                                          const std::vector<int>& inner_answer);

// Runs fn(0..n-1), possibly in parallel; results must be written to
// per-index slots so the outcome is independent of scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Flat gradient vector in parameter order, read from a record whose forward
// bound one leaf per parameter on a fresh tape.
std::vector<double> flat_param_grads(numcore::Tape& tape, const model::ModelWeights& w);

}  // namespace cotlab::train
