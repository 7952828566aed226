#include "cotlab/train/mind_mask.hpp"

#include <cmath>

#include "cotlab/tasks/divergence.hpp"
#include "cotlab/tasks/lab_vocab.hpp"

namespace cotlab::train {

using model::GenerationTrace;
using numcore::Rng;

namespace {

GradSegment trace_segment(const GenerationTrace& trace, std::size_t prompt_len) {
    GradSegment seg;
    seg.seq = trace.seq.tokens;
    for (std::size_t i = 0; i < trace.generated_count(); ++i) {
        const std::size_t pos = prompt_len + i;
        seg.rows.push_back(static_cast<int>(pos - 1));
        seg.targets.push_back(trace.seq.tokens[pos]);
        seg.rollout_logprobs.push_back(trace.logprobs[i]);
    }
    return seg;
}

}  // namespace

MindMaskResult mind_mask_train(MindMaskSetup& setup, const RewardSpec& spec,
                               const ReinforceOptions& opt) {
    using namespace tasks;
    spec.validate();
    const monitor::PatternMonitor mon =
        opt.monitor ? *opt.monitor : monitor::PatternMonitor::lab_default();
    const std::uint64_t para_digest = setup.paraphraser.digest();

    numcore::AdamState adam_mind, adam_mask;
    numcore::AdamConfig acfg;
    acfg.lr = opt.lr;
    std::vector<double> flat_mind = setup.mind.flatten();
    std::vector<double> flat_mask = setup.mask.flatten();
    Baseline baseline;
    baseline.decay = opt.baseline_decay;
    TrainingCurves curves;

    std::size_t done = 0;
    while (done < opt.episodes) {
        const std::size_t bs = std::min(opt.batch_size, opt.episodes - done);
        std::vector<EpisodeRecord> records(bs);
        parallel_for(bs, [&](std::size_t bi) {
            Rng rng = Rng::derive(opt.seed, done + bi);
            EpisodeTask task = make_episode_task(opt.domain, opt.arithmetic_k, rng);
            EpisodeRecord rec;
            rec.prompt = task.instance.prompt;

            model::GenerateOptions mopt;
            mopt.delims = lab_delims();
            mopt.temperature = opt.temperature;
            mopt.max_new = opt.max_new;
            mopt.stop_tokens = {kThinkClose, kEos};
            GenerationTrace mind_trace = model::generate(setup.mind, rec.prompt, mopt, rng);
            rec.segments.push_back(trace_segment(mind_trace, rec.prompt.size()));

            const std::vector<int> raw_cot = mind_trace.seq.inner_cot(mopt.delims);
            const std::vector<int> para = setup.paraphraser.paraphrase(raw_cot, rng.next_u64());
            std::vector<int> ctx = rec.prompt;
            ctx.push_back(kThinkOpen);
            ctx.insert(ctx.end(), para.begin(), para.end());
            ctx.push_back(kThinkClose);
            const std::size_t max_seq = setup.mask.config().max_seq_len;
            if (ctx.size() >= max_seq) ctx.resize(max_seq - 1);

            model::GenerateOptions aopt;
            aopt.delims = mopt.delims;
            aopt.temperature = opt.temperature;
            aopt.stop_tokens = {kEos};
            aopt.max_new = std::min<std::size_t>(opt.max_new, max_seq - ctx.size());
            GenerationTrace mask_trace = model::generate(setup.mask, ctx, aopt, rng);
            rec.segments.push_back(trace_segment(mask_trace, ctx.size()));

            rec.effective_cot = para;
            rec.inner_answer = mask_trace.seq.inner_answer(mopt.delims, kEos);
            grade_answer(rec, task);
            fill_reward_terms(rec, spec, mon, opt);
            records[bi] = std::move(rec);
        });

        std::vector<double> returns(bs);
        double batch_mean = 0.0;
        for (std::size_t bi = 0; bi < bs; ++bi) {
            returns[bi] =
                episode_return(records[bi], spec, spec.monitor_penalty_weight,
                               opt.legibility_weight);
            if (!std::isfinite(returns[bi])) {
                throw NonFiniteError("mind_mask_train: non-finite return");
            }
            batch_mean += returns[bi];
        }
        batch_mean /= static_cast<double>(bs);
        const double base = baseline.advantage_pre_update(batch_mean);

        std::vector<std::vector<double>> gmind(bs), gmask(bs);
        parallel_for(bs, [&](std::size_t bi) {
            const double scale = (returns[bi] - base) / static_cast<double>(bs);
            if (scale == 0.0) return;
            EpisodeRecord mind_only, mask_only;
            mind_only.segments.push_back(records[bi].segments[0]);
            mask_only.segments.push_back(records[bi].segments[1]);
            gmind[bi] = policy_grad(setup.mind, mind_only, scale);
            gmask[bi] = policy_grad(setup.mask, mask_only, scale);
        });
        baseline.update(batch_mean);

        std::vector<double> grad_mind(flat_mind.size(), 0.0), grad_mask(flat_mask.size(), 0.0);
        for (std::size_t bi = 0; bi < bs; ++bi) {
            if (!gmind[bi].empty()) {
                for (std::size_t j = 0; j < grad_mind.size(); ++j) grad_mind[j] += gmind[bi][j];
            }
            if (!gmask[bi].empty()) {
                for (std::size_t j = 0; j < grad_mask.size(); ++j) grad_mask[j] += gmask[bi][j];
            }
        }
        adam_step(flat_mind, grad_mind, adam_mind, acfg);
        adam_step(flat_mask, grad_mask, adam_mask, acfg);
        setup.mind.unflatten(flat_mind);
        setup.mask.unflatten(flat_mask);

        for (std::size_t bi = 0; bi < bs; ++bi) {
            const EpisodeRecord& r = records[bi];
            curves.append(returns[bi], r.provided, r.holdout, r.flagged ? 1.0 : 0.0, r.cot_len,
                          r.kl_sum);
        }
        done += bs;

        if (setup.paraphraser.digest() != para_digest) {
            throw FrozenViolationError("mind_mask_train: paraphraser changed during training");
        }
    }

    curves.validate();
    MindMaskResult result;
    if (curves.size() >= opt.divergence_window) {
        result.divergence_flag_episode =
            tasks::divergence(curves.provided, curves.holdout, opt.divergence_window,
                              opt.divergence_tau)
                .flag_index;
    }
    result.curves = std::move(curves);
    return result;
}

}  // namespace cotlab::train
