#include "cotlab/train/steering.hpp"

#include "cotlab/model/sampler.hpp"
#include "cotlab/tasks/lab_vocab.hpp"

namespace cotlab::train {

using model::GenerationTrace;
using numcore::Rng;

EpisodeRecord steering_rollout(const SteeringSetup& setup, const RewardSpec& spec,
                               const ReinforceOptions& opt, const monitor::PatternMonitor& mon,
                               Rng& rng) {
    using namespace tasks;
    EpisodeTask task = make_episode_task(opt.domain, opt.arithmetic_k, rng);
    EpisodeRecord rec;
    rec.prompt = task.instance.prompt;
    const model::SpanDelims delims = lab_delims();
    const std::size_t max_seq = setup.optimized.config().max_seq_len;

    const std::size_t switch_step = rng.below(setup.max_switch_steps + 1);

    // Phase A: the optimized planner writes CoT steps up to the switch
    // boundary (a separator emission), or until the CoT closes on its own.
    std::vector<int> tokens = rec.prompt;
    GradSegment seg;
    std::vector<int> generated;
    if (switch_step > 0) {
        model::KVCacheSet cache(setup.optimized.config());
        std::vector<double> logits;
        for (int t : tokens) logits = model::forward_incremental(setup.optimized, t, cache);
        std::size_t seps = 0;
        while (generated.size() < opt.max_new && tokens.size() < max_seq) {
            const int next = model::sample(logits, opt.temperature, rng);
            const double lp = model::logprob_of(logits, next);
            tokens.push_back(next);
            generated.push_back(next);
            seg.rows.push_back(static_cast<int>(tokens.size() - 2));
            seg.targets.push_back(next);
            seg.rollout_logprobs.push_back(lp);
            if (next == kEos || next == kThinkClose) break;
            if (next == kSep || next == kSepAlt) {
                ++seps;
                if (seps >= switch_step) break;
            }
            if (tokens.size() < max_seq) {
                logits = model::forward_incremental(setup.optimized, next, cache);
            }
        }
    }

    // Gradient gate: weight 1 only on the last step the optimized planner
    // wrote (its tokens since the previous boundary, boundary included).
    seg.weights.assign(generated.size(), 0.0);
    if (!generated.empty()) {
        const auto is_sep = [](int t) { return t == kSep || t == kSepAlt; };
        const std::size_t e = generated.size() - 1;
        std::size_t begin = 0;
        if (is_sep(generated[e])) {
            for (std::size_t i = e; i-- > 0;) {
                if (is_sep(generated[i])) {
                    begin = i + 1;
                    break;
                }
            }
        } else {
            for (std::size_t i = e + 1; i-- > 0;) {
                if (is_sep(generated[i])) {
                    begin = i + 1;
                    break;
                }
            }
        }
        for (std::size_t i = begin; i <= e; ++i) seg.weights[i] = 1.0;
    }
    seg.seq = tokens;

    // Phase B: the frozen planner completes the CoT and the answer.
    const bool ended = !generated.empty() && (generated.back() == kEos);
    if (!ended && tokens.size() < max_seq) {
        model::GenerateOptions fopt;
        fopt.delims = delims;
        fopt.temperature = opt.temperature;
        fopt.stop_tokens = {kEos};
        fopt.max_new = std::min<std::size_t>(opt.max_new, max_seq - tokens.size());
        GenerationTrace frozen_trace = model::generate(setup.frozen_planner, tokens, fopt, rng);
        tokens = frozen_trace.seq.tokens;
    }

    model::TokenSequence full = model::mark_spans(tokens, rec.prompt.size(), delims);
    rec.effective_cot = full.inner_cot(delims);
    rec.inner_answer = full.inner_answer(delims, kEos);
    if (!seg.rows.empty()) rec.segments.push_back(std::move(seg));
    grade_answer(rec, task);
    fill_reward_terms(rec, spec, mon, opt);
    return rec;
}

SteeringResult steering_train(SteeringSetup& setup, const RewardSpec& spec,
                              const ReinforceOptions& opt) {
    spec.validate();
    const monitor::PatternMonitor mon =
        opt.monitor ? *opt.monitor : monitor::PatternMonitor::lab_default();
    const std::uint64_t frozen_digest = setup.frozen_planner.digest();

    RlCallbacks cb;
    cb.rollout = [&](std::size_t, Rng& rng) {
        return steering_rollout(setup, spec, opt, mon, rng);
    };
    cb.grad = [&](const EpisodeRecord& rec, double scale) {
        return policy_grad(setup.optimized, rec, scale);
    };
    ReinforceResult core = rl_core(setup.optimized, spec, opt, cb, nullptr);

    if (setup.frozen_planner.digest() != frozen_digest) {
        throw FrozenViolationError("steering_train: frozen planner changed during training");
    }
    SteeringResult result;
    result.curves = std::move(core.curves);
    result.divergence_flag_episode = core.divergence_flag_episode;
    return result;
}

}  // namespace cotlab::train
