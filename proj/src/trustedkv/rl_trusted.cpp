#include "cotlab/trustedkv/rl_trusted.hpp"

#include "cotlab/tasks/lab_vocab.hpp"
#include "cotlab/train/sft.hpp"

namespace cotlab::trustedkv {

using model::GenerationTrace;
using model::ModelWeights;
using numcore::Rng;
using numcore::Tape;
using numcore::Tensor;

train::ReinforceResult rl_with_trusted_kv(const ModelWeights& trusted, ModelWeights& untrusted,
                                          const train::RewardSpec& spec,
                                          const train::ReinforceOptions& opt,
                                          CurrentKvPolicy policy) {
    using namespace tasks;
    if (!trusted.frozen()) {
        throw FrozenViolationError("rl_with_trusted_kv: the trusted model must be frozen");
    }
    if (opt.paraphraser) {
        throw ConfigError("rl_with_trusted_kv: in-loop paraphrasing is not part of this trainer");
    }
    const std::uint64_t trusted_digest = trusted.digest();
    const monitor::PatternMonitor mon =
        opt.monitor ? *opt.monitor : monitor::PatternMonitor::lab_default();

    train::RlCallbacks cb;
    cb.rollout = [&](std::size_t, Rng& rng) {
        train::EpisodeTask task = train::make_episode_task(opt.domain, opt.arithmetic_k, rng);
        train::EpisodeRecord rec;
        rec.prompt = task.instance.prompt;

        DualGenState state(&trusted, &untrusted, rng, policy);
        model::GenerateOptions gopt;
        gopt.delims = lab_delims();
        gopt.temperature = opt.temperature;
        gopt.max_new = opt.max_new;
        gopt.stop_tokens = {kEos};
        GenerationTrace trace = generate_trusted_kv(state, rec.prompt, gopt);

        train::GradSegment seg;
        seg.seq = trace.seq.tokens;
        for (std::size_t i = 0; i < trace.generated_count(); ++i) {
            const std::size_t pos = rec.prompt.size() + i;
            seg.rows.push_back(static_cast<int>(pos - 1));
            seg.targets.push_back(trace.seq.tokens[pos]);
            seg.rollout_logprobs.push_back(trace.logprobs[i]);
        }
        rec.segments.push_back(std::move(seg));
        rec.effective_cot = trace.seq.inner_cot(gopt.delims);
        rec.inner_answer = trace.seq.inner_answer(gopt.delims, kEos);
        train::grade_answer(rec, task);
        train::fill_reward_terms(rec, spec, mon, opt);
        return rec;
    };
    cb.grad = [&](const train::EpisodeRecord& rec, double scale) {
        std::vector<double> total(untrusted.scalar_count(), 0.0);
        for (const train::GradSegment& seg : rec.segments) {
            if (seg.rows.empty()) continue;
            model::KVCacheSet trusted_kv = collect_kv(trusted, seg.seq);
            Tape tape;
            Tensor logits = trusted_forward_full(untrusted, trusted_kv, seg.seq, policy, &tape);
            std::vector<double> weights(seg.targets.size(), scale);
            Tensor loss =
                numcore::nll_weighted(numcore::gather_rows(logits, seg.rows), seg.targets,
                                      weights);
            tape.backward(loss);
            std::vector<double> g = train::flat_param_grads(tape, untrusted);
            for (std::size_t i = 0; i < total.size(); ++i) total[i] += g[i];
        }
        return total;
    };

    train::ReinforceResult result = train::rl_core(untrusted, spec, opt, cb, nullptr);

    if (trusted.digest() != trusted_digest) {
        throw FrozenViolationError("rl_with_trusted_kv: trusted weights changed during training");
    }
    return result;
}

}  // namespace cotlab::trustedkv
