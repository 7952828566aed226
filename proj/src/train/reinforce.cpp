#include "cotlab/train/reinforce.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "cotlab/model/sampler.hpp"
#include "cotlab/numcore/checkpoint.hpp"
#include "cotlab/tasks/arithmetic.hpp"
#include "cotlab/tasks/divergence.hpp"
#include "cotlab/tasks/lab_vocab.hpp"

namespace cotlab::train {

using model::GenerationTrace;
using model::ModelWeights;
using numcore::Rng;
using numcore::Tape;
using numcore::Tensor;
using tasks::Domain;

EpisodeTask make_episode_task(Domain domain, int k, Rng& rng) {
    EpisodeTask task;
    if (domain == Domain::Gameable) {
        task.gameable = tasks::gen_gameable(1, rng)[0];
        task.instance = task.gameable->instance;
    } else {
        task.instance = tasks::gen_arithmetic(k, 1, rng)[0];
    }
    return task;
}

void grade_answer(EpisodeRecord& rec, const EpisodeTask& task) {
    if (task.gameable) {
        const tasks::Score sc = tasks::score(rec.inner_answer, task.gameable->suite);
        rec.task_score = sc.provided_acc;  // reward reads provided only
        rec.provided = sc.provided_acc;
        rec.holdout = sc.holdout_acc;
    } else {
        const bool ok = tasks::answer_matches(rec.inner_answer, task.instance);
        rec.task_score = ok ? 1.0 : 0.0;
        rec.provided = rec.task_score;
        rec.holdout = rec.task_score;
    }
}

namespace {

void fill_kl(EpisodeRecord& rec, const ModelWeights& ref) {
    for (const GradSegment& seg : rec.segments) {
        if (seg.rows.empty()) continue;
        const Tensor ref_logits = model::forward_full(ref, seg.seq);
        const std::size_t v = ref_logits.shape[1];
        for (std::size_t i = 0; i < seg.rows.size(); ++i) {
            std::span<const double> row(ref_logits.data.data() +
                                            static_cast<std::size_t>(seg.rows[i]) * v,
                                        v);
            rec.kl_sum += seg.rollout_logprobs[i] - model::logprob_of(row, seg.targets[i]);
        }
    }
}

GradSegment segment_from_trace(const GenerationTrace& trace, std::size_t prompt_len) {
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

void fill_reward_terms(EpisodeRecord& rec, const RewardSpec& spec,
                       const monitor::PatternMonitor& mon, const ReinforceOptions& opt) {
    const std::vector<int>& span = spec.output_only ? rec.inner_answer : rec.effective_cot;
    const monitor::MonitorVerdict verdict = mon.monitor_cot(span);
    rec.monitor_score = verdict.score;
    rec.flagged = verdict.flagged;
    if (opt.detection_paraphraser) {
        // Deployment-side monitor sees a paraphrase; the penalty above keeps
        // reading the raw span.
        std::uint64_t pseed = numcore::fnv1a(span.data(), span.size() * sizeof(int));
        rec.flagged =
            mon.monitor_cot(opt.detection_paraphraser->paraphrase(span, pseed)).flagged;
    }
    rec.length_term = static_cast<double>(span.size());
    rec.cot_len = static_cast<double>(rec.effective_cot.size());
    if (opt.kl_reference) fill_kl(rec, *opt.kl_reference);
    if (opt.legibility && opt.legibility_reference) {
        rec.legibility = opt.legibility->legibility_reward(rec.prompt, rec.effective_cot,
                                                           *opt.legibility_reference);
    }
}

double episode_return(const EpisodeRecord& rec, const RewardSpec& spec, double monitor_weight,
                      double legibility_weight) {
    return spec.task_weight * rec.task_score - monitor_weight * rec.monitor_score -
           spec.length_penalty_weight * rec.length_term - spec.kl_weight * rec.kl_sum +
           legibility_weight * rec.legibility;
}

std::vector<double> policy_grad(const ModelWeights& w, const EpisodeRecord& rec, double scale) {
    std::vector<double> total(w.scalar_count(), 0.0);
    for (const GradSegment& seg : rec.segments) {
        if (seg.rows.empty()) continue;
        Tape tape;
        Tensor logits = model::forward_full(w, seg.seq, &tape);
        std::vector<double> weights(seg.targets.size(), scale);
        if (!seg.weights.empty()) {
            for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = scale * seg.weights[i];
        }
        Tensor loss = nll_weighted(gather_rows(logits, seg.rows), seg.targets, weights);
        tape.backward(loss);
        std::vector<double> g = flat_param_grads(tape, w);
        for (std::size_t i = 0; i < total.size(); ++i) total[i] += g[i];
    }
    return total;
}

namespace {

// Single-model rollout; with a paraphraser the CoT is rewritten before the
// answer phase, and gradients cover the raw CoT tokens under their own
// context plus the answer tokens under the paraphrased context.
EpisodeRecord rollout_plain(const ModelWeights& w, const RewardSpec& spec,
                            const ReinforceOptions& opt, const monitor::PatternMonitor& mon,
                            std::size_t ep_index, Rng& rng) {
    using namespace tasks;
    EpisodeTask task = make_episode_task(opt.domain, opt.arithmetic_k, rng);
    EpisodeRecord rec;
    rec.prompt = task.instance.prompt;

    model::GenerateOptions gopt;
    gopt.delims = lab_delims();
    gopt.temperature = opt.temperature;

    if (!opt.paraphraser) {
        gopt.max_new = opt.max_new;
        gopt.stop_tokens = {kEos};
        GenerationTrace trace = model::generate(w, rec.prompt, gopt, rng);
        rec.segments.push_back(segment_from_trace(trace, rec.prompt.size()));
        rec.effective_cot = trace.seq.inner_cot(gopt.delims);
        rec.inner_answer = trace.seq.inner_answer(gopt.delims, kEos);
    } else {
        gopt.max_new = opt.max_new;
        gopt.stop_tokens = {kThinkClose, kEos};
        GenerationTrace cot_trace = model::generate(w, rec.prompt, gopt, rng);
        rec.segments.push_back(segment_from_trace(cot_trace, rec.prompt.size()));

        const std::vector<int> raw_cot = cot_trace.seq.inner_cot(gopt.delims);
        const std::vector<int> para = opt.paraphraser->paraphrase(raw_cot, rng.next_u64());
        std::vector<int> ctx = rec.prompt;
        ctx.push_back(kThinkOpen);
        ctx.insert(ctx.end(), para.begin(), para.end());
        ctx.push_back(kThinkClose);

        const std::size_t max_seq = w.config().max_seq_len;
        if (ctx.size() >= max_seq) ctx.resize(max_seq - 1);
        model::GenerateOptions aopt;
        aopt.delims = gopt.delims;
        aopt.temperature = opt.temperature;
        aopt.stop_tokens = {kEos};
        aopt.max_new = std::min<std::size_t>(opt.max_new, max_seq - ctx.size());
        GenerationTrace ans_trace = model::generate(w, ctx, aopt, rng);
        rec.segments.push_back(segment_from_trace(ans_trace, ctx.size()));
        rec.effective_cot = para;
        rec.inner_answer = ans_trace.seq.inner_answer(gopt.delims, kEos);
    }

    grade_answer(rec, task);
    fill_reward_terms(rec, spec, mon, opt);
    (void)ep_index;
    return rec;
}

}  // namespace

ReinforceResult rl_core(ModelWeights& trained, const RewardSpec& spec,
                        const ReinforceOptions& opt, const RlCallbacks& cb,
                        const RlSnapshot* resume) {
    spec.validate();
    if (opt.batch_size == 0) throw ConfigError("reinforce: batch_size must be positive");

    numcore::AdamState adam;
    numcore::AdamConfig acfg;
    acfg.lr = opt.lr;
    Baseline baseline;
    baseline.decay = opt.baseline_decay;
    TrainingCurves curves;
    std::vector<std::size_t> escalations;
    double monitor_weight = spec.monitor_penalty_weight;
    std::size_t episodes_done = 0;
    std::vector<double> flat = trained.flatten();

    if (resume) {
        flat = resume->params;
        trained.unflatten(flat);
        adam = resume->adam;
        baseline = resume->baseline;
        curves = resume->curves;
        escalations = resume->escalation_episodes;
        monitor_weight = resume->monitor_weight;
        episodes_done = resume->episodes_done;
    }
    std::size_t last_escalation = escalations.empty() ? 0 : escalations.back();

    ReinforceResult result;
    auto maybe_snapshot = [&]() {
        if (opt.snapshot_dir.empty()) return;
        RlSnapshot snap;
        snap.params = flat;
        snap.adam = adam;
        snap.baseline = baseline;
        snap.episodes_done = episodes_done;
        snap.monitor_weight = monitor_weight;
        snap.curves = curves;
        snap.escalation_episodes = escalations;
        save_rl_snapshot(opt.snapshot_dir, snap);
    };

    while (episodes_done < opt.episodes) {
        if (opt.abort_after_episodes && episodes_done >= opt.abort_after_episodes) {
            result.aborted = true;
            maybe_snapshot();
            break;
        }
        const std::size_t bs = std::min(opt.batch_size, opt.episodes - episodes_done);

        std::vector<EpisodeRecord> records(bs);
        parallel_for(bs, [&](std::size_t bi) {
            Rng rng = Rng::derive(opt.seed, episodes_done + bi);
            records[bi] = cb.rollout(episodes_done + bi, rng);
        });

        std::vector<double> returns(bs);
        double batch_mean = 0.0;
        for (std::size_t bi = 0; bi < bs; ++bi) {
            returns[bi] = episode_return(records[bi], spec, monitor_weight, opt.legibility_weight);
            if (!std::isfinite(returns[bi])) {
                throw NonFiniteError("reinforce: non-finite return at episode " +
                                     std::to_string(episodes_done + bi) + " (task " +
                                     std::to_string(records[bi].task_score) + ", monitor " +
                                     std::to_string(records[bi].monitor_score) + ", kl " +
                                     std::to_string(records[bi].kl_sum) + ")");
            }
            batch_mean += returns[bi];
        }
        batch_mean /= static_cast<double>(bs);
        const double base = baseline.advantage_pre_update(batch_mean);

        std::vector<std::vector<double>> grads(bs);
        parallel_for(bs, [&](std::size_t bi) {
            const double adv = returns[bi] - base;
            if (adv != 0.0) {
                grads[bi] = cb.grad(records[bi], adv / static_cast<double>(bs));
            }
        });
        baseline.update(batch_mean);

        std::vector<double> grad(flat.size(), 0.0);
        for (std::size_t bi = 0; bi < bs; ++bi) {
            if (grads[bi].empty()) continue;
            for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += grads[bi][j];
        }
        adam_step(flat, grad, adam, acfg);
        trained.unflatten(flat);

        Rng scramble(opt.scramble_holdout_seed + episodes_done);
        for (std::size_t bi = 0; bi < bs; ++bi) {
            const EpisodeRecord& r = records[bi];
            const double logged_holdout =
                opt.scramble_holdout_seed ? scramble.uniform() : r.holdout;
            curves.append(returns[bi], r.provided, logged_holdout, r.flagged ? 1.0 : 0.0,
                          r.cot_len, r.kl_sum);
        }
        episodes_done += bs;

        // Escalate the monitor weight while hacking stays visible.
        if (opt.escalate_factor > 0.0 && curves.size() >= opt.divergence_window &&
            episodes_done - last_escalation >= opt.divergence_window) {
            double div = 0.0, det = 0.0;
            for (std::size_t i = curves.size() - opt.divergence_window; i < curves.size(); ++i) {
                div += curves.provided[i] - curves.holdout[i];
                det += curves.detection[i];
            }
            div /= static_cast<double>(opt.divergence_window);
            det /= static_cast<double>(opt.divergence_window);
            if (div > opt.divergence_tau && det >= opt.escalate_detection_bar) {
                monitor_weight *= opt.escalate_factor;
                escalations.push_back(episodes_done);
                last_escalation = episodes_done;
            }
        }

        if (opt.snapshot_every && episodes_done % opt.snapshot_every < bs) maybe_snapshot();
    }

    if (!result.aborted && !opt.snapshot_dir.empty()) maybe_snapshot();

    curves.validate();
    if (curves.size() >= opt.divergence_window) {
        const auto div = tasks::divergence(curves.provided, curves.holdout,
                                           opt.divergence_window, opt.divergence_tau);
        result.divergence_flag_episode = div.flag_index;
    }
    result.curves = std::move(curves);
    result.escalation_episodes = std::move(escalations);
    result.final_monitor_weight = monitor_weight;
    return result;
}

ReinforceResult reinforce_resumable(ModelWeights& w, const RewardSpec& spec,
                                    const ReinforceOptions& opt, const RlSnapshot* resume) {
    const monitor::PatternMonitor mon =
        opt.monitor ? *opt.monitor : monitor::PatternMonitor::lab_default();
    RlCallbacks cb;
    cb.rollout = [&](std::size_t ep, Rng& rng) {
        return rollout_plain(w, spec, opt, mon, ep, rng);
    };
    cb.grad = [&](const EpisodeRecord& rec, double scale) { return policy_grad(w, rec, scale); };
    return rl_core(w, spec, opt, cb, resume);
}

ReinforceResult reinforce(ModelWeights& w, const RewardSpec& spec, const ReinforceOptions& opt) {
    return reinforce_resumable(w, spec, opt, nullptr);
}

// ---- snapshot io ----------------------------------------------------------

static std::string snap_bin(const std::string& dir) { return dir + "/state.bin"; }
static std::string snap_json(const std::string& dir) { return dir + "/state.json"; }
static std::string snap_csv(const std::string& dir) { return dir + "/curves.csv"; }

void save_rl_snapshot(const std::string& dir, const RlSnapshot& snap) {
    std::filesystem::create_directories(dir);
    std::vector<numcore::NamedTensor> tensors;
    tensors.push_back({"params", Tensor({snap.params.size()}, snap.params)});
    tensors.push_back({"adam.m", Tensor({snap.adam.m.size()}, snap.adam.m)});
    tensors.push_back({"adam.v", Tensor({snap.adam.v.size()}, snap.adam.v)});
    numcore::save_checkpoint(snap_bin(dir), 0, tensors);

    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["adam_step"] = snap.adam.step;
    j["baseline_value"] = snap.baseline.value;
    j["baseline_initialized"] = snap.baseline.initialized;
    j["baseline_decay"] = snap.baseline.decay;
    j["episodes_done"] = snap.episodes_done;
    j["monitor_weight"] = snap.monitor_weight;
    j["escalation_episodes"] = snap.escalation_episodes;
    std::ofstream os(snap_json(dir), std::ios::trunc);
    if (!os) throw IoError("cannot write snapshot json in " + dir);
    os << j.dump(2) << "\n";
    snap.curves.save_csv(snap_csv(dir));
}

bool rl_snapshot_exists(const std::string& dir) {
    return std::filesystem::exists(snap_bin(dir)) && std::filesystem::exists(snap_json(dir));
}

RlSnapshot load_rl_snapshot(const std::string& dir) {
    RlSnapshot snap;
    numcore::Checkpoint ck = numcore::load_checkpoint(snap_bin(dir));
    for (const auto& nt : ck.params) {
        if (nt.name == "params") snap.params = nt.value.data;
        if (nt.name == "adam.m") snap.adam.m = nt.value.data;
        if (nt.name == "adam.v") snap.adam.v = nt.value.data;
    }
    std::ifstream is(snap_json(dir));
    if (!is) throw IoError("cannot open snapshot json in " + dir);
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(is);
    snap.adam.step = j.at("adam_step").get<std::int64_t>();
    snap.baseline.value = j.at("baseline_value").get<double>();
    snap.baseline.initialized = j.at("baseline_initialized").get<bool>();
    snap.baseline.decay = j.at("baseline_decay").get<double>();
    snap.episodes_done = j.at("episodes_done").get<std::size_t>();
    snap.monitor_weight = j.at("monitor_weight").get<double>();
    snap.escalation_episodes = j.at("escalation_episodes").get<std::vector<std::size_t>>();
    snap.curves = TrainingCurves::load_csv(snap_csv(dir));
    return snap;
}

}  // namespace cotlab::train
