#include "cotlab/train/sft.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cotlab/tasks/lab_vocab.hpp"

namespace cotlab::train {

using model::ModelWeights;
using model::TokenSequence;
using numcore::Tape;
using numcore::Tensor;

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(n); ++i) fn(static_cast<std::size_t>(i));
#else
    for (std::size_t i = 0; i < n; ++i) fn(i);
#endif
}

model::TokenSequence assemble_answer_only(const std::vector<int>& prompt,
                                          const std::vector<int>& inner_answer) {
    TokenSequence seq;
    seq.tokens = prompt;
    seq.prompt_end = prompt.size();
    seq.cot_end = prompt.size();  // no CoT span at all
    seq.tokens.push_back(tasks::kAnsOpen);
    seq.tokens.insert(seq.tokens.end(), inner_answer.begin(), inner_answer.end());
    seq.tokens.push_back(tasks::kAnsClose);
    seq.tokens.push_back(tasks::kEos);
    seq.validate();
    return seq;
}

std::vector<double> flat_param_grads(Tape& tape, const ModelWeights& w) {
    // Forward passes bind one leaf per parameter, in parameter order, on a
    // fresh record — so leaves occupy nodes 0..param_count-1.
    std::vector<double> g;
    g.reserve(w.scalar_count());
    for (std::size_t p = 0; p < w.param_count(); ++p) {
        const auto& leaf_grad = tape.grad_ref(static_cast<int>(p));
        g.insert(g.end(), leaf_grad.begin(), leaf_grad.end());
    }
    return g;
}

Tensor sft_example_loss(Tape& tape, const ModelWeights& w, const TokenSequence& seq,
                        LossSpan span, Tensor* logits_out) {
    const std::size_t start = span == LossSpan::CotAndAnswer ? seq.prompt_end : seq.cot_end;
    const std::size_t n = seq.tokens.size();
    if (start == 0 || start >= n) {
        throw ShapeError("sft example has no supervised positions");
    }
    Tensor logits = model::forward_full(w, seq.tokens, &tape);
    if (logits_out) *logits_out = logits;

    std::vector<int> rows, targets;
    for (std::size_t i = start; i < n; ++i) {
        rows.push_back(static_cast<int>(i - 1));  // row i-1 predicts token i
        targets.push_back(seq.tokens[i]);
    }
    const double inv = 1.0 / static_cast<double>(targets.size());
    std::vector<double> weights(targets.size(), inv);
    return nll_weighted(gather_rows(logits, rows), targets, weights);
}

namespace {

SftResult run_sft(ModelWeights& w, const std::vector<TokenSequence>& seqs, LossSpan span,
                  std::size_t epochs, const SftOptions& opt) {
    if (seqs.empty()) throw ConfigError("sft: corpus must be nonempty");
    SftResult res;
    if (epochs == 0) return res;

    numcore::AdamState adam;
    numcore::AdamConfig acfg;
    acfg.lr = opt.lr;
    acfg.weight_decay = opt.weight_decay;
    std::vector<double> flat = w.flatten();

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        std::vector<std::size_t> order(seqs.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        numcore::Rng shuffle_rng = numcore::Rng::derive(opt.seed, 0x5f37 + epoch);
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);
        }

        double epoch_sum = 0.0;
        std::size_t epoch_batches = 0;
        for (std::size_t off = 0; off < order.size(); off += opt.batch_size) {
            const std::size_t bs = std::min(opt.batch_size, order.size() - off);
            std::vector<std::vector<double>> grads(bs);
            std::vector<double> losses(bs);
            parallel_for(bs, [&](std::size_t bi) {
                Tape tape;
                Tensor loss = sft_example_loss(tape, w, seqs[order[off + bi]], span, nullptr);
                losses[bi] = loss.value();
                tape.backward(loss);
                grads[bi] = flat_param_grads(tape, w);
            });

            std::vector<double> grad(flat.size(), 0.0);
            double batch_loss = 0.0;
            for (std::size_t bi = 0; bi < bs; ++bi) {
                for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += grads[bi][j];
                batch_loss += losses[bi];
            }
            const double inv = 1.0 / static_cast<double>(bs);
            for (double& g : grad) g *= inv;
            batch_loss *= inv;

            adam_step(flat, grad, adam, acfg);
            w.unflatten(flat);
            res.step_loss.push_back(batch_loss);
            epoch_sum += batch_loss;
            ++epoch_batches;
            ++res.steps;

            if (opt.eval_every && res.steps % opt.eval_every == 0 && opt.eval_hook) {
                if (opt.eval_hook(res.steps)) {
                    res.stopped_by_hook = true;
                    res.epoch_mean.push_back(epoch_sum / static_cast<double>(epoch_batches));
                    return res;
                }
            }
            if (opt.max_steps && res.steps >= opt.max_steps) {
                res.epoch_mean.push_back(epoch_sum / static_cast<double>(epoch_batches));
                return res;
            }
        }
        res.epoch_mean.push_back(epoch_sum / static_cast<double>(epoch_batches));
    }
    return res;
}

}  // namespace

SftResult sft_sequences(ModelWeights& w, const std::vector<TokenSequence>& seqs, LossSpan span,
                        std::size_t epochs, const SftOptions& opt) {
    return run_sft(w, seqs, span, epochs, opt);
}

SftResult sft(ModelWeights& w, const std::vector<tasks::TaskInstance>& corpus, std::size_t epochs,
              const SftOptions& opt) {
    std::vector<TokenSequence> seqs;
    seqs.reserve(corpus.size());
    for (const auto& inst : corpus) seqs.push_back(tasks::assemble_sequence(inst));
    return run_sft(w, seqs, LossSpan::CotAndAnswer, epochs, opt);
}

}  // namespace cotlab::train
