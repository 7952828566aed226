#include "cotlab/experiments/translator.hpp"

#include <cmath>

#include "cotlab/model/sampler.hpp"
#include "cotlab/model/transformer.hpp"
#include "cotlab/tasks/arithmetic.hpp"
#include "cotlab/tasks/lab_vocab.hpp"
#include "cotlab/train/reinforce.hpp"
#include "cotlab/trustedkv/trusted_forward.hpp"

namespace cotlab::experiments {

using model::GenerationTrace;
using model::KVCacheSet;
using model::ModelWeights;
using numcore::Rng;
using numcore::Tape;
using numcore::Tensor;
using namespace tasks;

double translation_reward(const ModelWeights& base, const std::vector<int>& prompt,
                          const std::vector<int>& inner_cot,
                          const std::vector<int>& inner_answer) {
    std::vector<int> seq = prompt;
    seq.push_back(kThinkOpen);
    const std::size_t scored_from = seq.size();
    seq.insert(seq.end(), inner_cot.begin(), inner_cot.end());
    seq.push_back(kThinkClose);
    seq.push_back(kAnsOpen);
    seq.insert(seq.end(), inner_answer.begin(), inner_answer.end());
    seq.push_back(kAnsClose);
    if (seq.size() > base.config().max_seq_len) {
        seq.resize(base.config().max_seq_len);
    }
    const Tensor logits = model::forward_full(base, seq);
    const std::size_t v = logits.shape[1];
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = scored_from; i < seq.size(); ++i) {
        std::span<const double> row(logits.data.data() + (i - 1) * v, v);
        total += model::logprob_of(row, seq[i]);
        ++count;
    }
    return count ? total / static_cast<double>(count) : 0.0;
}

namespace {

struct Triplet {
    TaskInstance instance;
    std::vector<int> cot_r;      // R's inner CoT
    std::vector<int> answer_r;   // R's inner answer
    std::vector<int> ctx;        // prompt <think> cot_r </think> <ans> answer </ans> <think>
};

Triplet make_triplet(const ModelWeights& reasoning, const TaskInstance& inst) {
    Triplet t;
    t.instance = inst;
    model::GenerateOptions opt;
    opt.delims = lab_delims();
    opt.temperature = 0.0;
    opt.stop_tokens = {kEos};
    opt.max_new = reasoning.config().max_seq_len / 2;
    Rng rng(0);
    GenerationTrace tr = model::generate(reasoning, inst.prompt, opt, rng);
    t.cot_r = tr.seq.inner_cot(opt.delims);
    t.answer_r = tr.seq.inner_answer(opt.delims, kEos);

    t.ctx = inst.prompt;
    t.ctx.push_back(kThinkOpen);
    t.ctx.insert(t.ctx.end(), t.cot_r.begin(), t.cot_r.end());
    t.ctx.push_back(kThinkClose);
    t.ctx.push_back(kAnsOpen);
    t.ctx.insert(t.ctx.end(), t.answer_r.begin(), t.answer_r.end());
    t.ctx.push_back(kAnsClose);
    t.ctx.push_back(kThinkOpen);
    return t;
}

struct TranslationRollout {
    std::vector<int> seq;        // ctx + generated
    std::vector<int> cot_t;      // generated inner CoT
    train::GradSegment segment;
    double reward = 0.0;
};

// T generates CoT_T from the triplet context; with kv_feed the context
// positions carry R's k/v instead of T's own.
TranslationRollout rollout_translation(const ModelWeights& translator,
                                       const ModelWeights& reasoning, const ModelWeights& base,
                                       const Triplet& trip, const TranslatorOptions& opt,
                                       double temperature, Rng& rng) {
    TranslationRollout out;
    const model::ModelConfig& cfg = translator.config();
    const std::size_t budget =
        std::min<std::size_t>(opt.cot_budget, cfg.max_seq_len - trip.ctx.size());

    std::vector<int> tokens = trip.ctx;
    KVCacheSet cache(cfg);
    std::vector<double> logits;
    if (opt.kv_feed) {
        // Prefix: R's cache over the triplet (all but the final <think>,
        // which T processes itself so its own query stack starts there).
        KVCacheSet r_cache = trustedkv::collect_kv(reasoning, trip.ctx);
        cache = trustedkv::cache_prefix(r_cache, trip.ctx.size() - 1);
        logits = model::forward_incremental(translator, tokens.back(), cache);
    } else {
        for (int t : tokens) logits = model::forward_incremental(translator, t, cache);
    }

    train::GradSegment seg;
    for (std::size_t i = 0; i < budget; ++i) {
        const int next = model::sample(logits, temperature, rng);
        const double lp = model::logprob_of(logits, next);
        tokens.push_back(next);
        seg.rows.push_back(static_cast<int>(tokens.size() - 2));
        seg.targets.push_back(next);
        seg.rollout_logprobs.push_back(lp);
        if (next == kThinkClose || next == kEos) break;
        out.cot_t.push_back(next);
        if (tokens.size() >= cfg.max_seq_len) break;
        logits = model::forward_incremental(translator, next, cache);
    }
    seg.seq = tokens;
    out.seq = tokens;
    out.segment = std::move(seg);
    out.reward = translation_reward(base, trip.instance.prompt, out.cot_t, trip.answer_r);
    return out;
}

std::vector<double> translator_grad(const ModelWeights& translator, const TranslationRollout& ro,
                                    std::size_t prefix_len, bool kv_feed,
                                    const ModelWeights& reasoning, double scale) {
    if (ro.segment.rows.empty()) return std::vector<double>(translator.scalar_count(), 0.0);
    Tape tape;
    Tensor logits;
    if (kv_feed) {
        KVCacheSet r_cache = trustedkv::collect_kv(
            reasoning, std::span<const int>(ro.seq.data(), prefix_len));
        logits = trustedkv::prefix_forward_full(translator, r_cache, prefix_len, ro.seq, &tape);
    } else {
        logits = model::forward_full(translator, ro.seq, &tape);
    }
    std::vector<double> weights(ro.segment.targets.size(), scale);
    Tensor loss = numcore::nll_weighted(numcore::gather_rows(logits, ro.segment.rows),
                                        ro.segment.targets, weights);
    tape.backward(loss);
    return train::flat_param_grads(tape, translator);
}

}  // namespace

TranslatorResult train_translator(const ModelWeights& reasoning, const ModelWeights& base,
                                  const TranslatorOptions& opt) {
    if (!(reasoning.config() == base.config())) {
        throw CompatibilityError("translator setup: R and B must share one model config");
    }
    const std::uint64_t digest_r = reasoning.digest();
    const std::uint64_t digest_b = base.digest();

    TranslatorResult res{opt.init_from_base ? base : reasoning, {}, 0.0, 0.0, 0.0};
    res.translator.set_frozen(false);

    numcore::AdamState adam;
    numcore::AdamConfig acfg;
    acfg.lr = opt.lr;
    std::vector<double> flat = res.translator.flatten();
    train::Baseline baseline;

    std::size_t done = 0;
    while (done < opt.episodes) {
        const std::size_t bs = std::min(opt.batch_size, opt.episodes - done);
        std::vector<TranslationRollout> rollouts(bs);
        std::vector<std::size_t> prefix_lens(bs);
        train::parallel_for(bs, [&](std::size_t bi) {
            Rng rng = Rng::derive(opt.seed, done + bi);
            TaskInstance inst = gen_arithmetic(opt.k, 1, rng)[0];
            Triplet trip = make_triplet(reasoning, inst);
            prefix_lens[bi] = trip.ctx.size() - 1;
            rollouts[bi] =
                rollout_translation(res.translator, reasoning, base, trip, opt, opt.temperature,
                                    rng);
        });

        double batch_mean = 0.0;
        for (const auto& ro : rollouts) batch_mean += ro.reward;
        batch_mean /= static_cast<double>(bs);
        const double b = baseline.advantage_pre_update(batch_mean);

        std::vector<std::vector<double>> grads(bs);
        train::parallel_for(bs, [&](std::size_t bi) {
            const double adv = rollouts[bi].reward - b;
            if (adv != 0.0) {
                grads[bi] = translator_grad(res.translator, rollouts[bi], prefix_lens[bi],
                                            opt.kv_feed, reasoning, adv / static_cast<double>(bs));
            }
        });
        baseline.update(batch_mean);

        std::vector<double> grad(flat.size(), 0.0);
        for (std::size_t bi = 0; bi < bs; ++bi) {
            if (grads[bi].empty()) continue;
            for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += grads[bi][j];
        }
        adam_step(flat, grad, adam, acfg);
        res.translator.unflatten(flat);
        for (const auto& ro : rollouts) res.reward_curve.push_back(ro.reward);
        done += bs;
    }

    // Held-out evaluation: greedy translations, checker-verified recovery,
    // and the verbatim-copy oracle reference.
    Rng hrng = Rng::derive(opt.seed, 0x7E57);
    const auto heldout = gen_arithmetic(opt.k, opt.heldout, hrng);
    std::vector<int> recovered(heldout.size(), 0);
    std::vector<double> rewards(heldout.size(), 0.0), oracle(heldout.size(), 0.0);
    train::parallel_for(heldout.size(), [&](std::size_t i) {
        Triplet trip = make_triplet(reasoning, heldout[i]);
        Rng rng(0);
        TranslationRollout ro = rollout_translation(res.translator, reasoning, base, trip, opt,
                                                    /*temperature=*/0.0, rng);
        recovered[i] = cot_checker(ro.cot_t, heldout[i]) ? 1 : 0;
        rewards[i] = ro.reward;
        oracle[i] = translation_reward(base, heldout[i].prompt, trip.cot_r, trip.answer_r);
    });
    double rec = 0.0;
    for (int r : recovered) rec += r;
    res.recovery_rate = rec / static_cast<double>(heldout.size());
    res.final_reward = mean_of(rewards);
    res.verbatim_oracle_reward = mean_of(oracle);

    if (reasoning.digest() != digest_r || base.digest() != digest_b) {
        throw FrozenViolationError("translator training touched R or B");
    }
    return res;
}

nlohmann::ordered_json translator_report_json(const TranslatorResult& res,
                                              const TranslatorOptions& opt) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["report"] = "translator";
    j["episodes"] = opt.episodes;
    j["kv_feed"] = opt.kv_feed;
    j["init_from_base"] = opt.init_from_base;
    j["recovery_rate"] = res.recovery_rate;
    j["final_reward"] = res.final_reward;
    j["verbatim_oracle_reward"] = res.verbatim_oracle_reward;
    return j;
}

}  // namespace cotlab::experiments
