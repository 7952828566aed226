#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cotlab/model/transformer.hpp"
#include "cotlab/monitor/legibility.hpp"
#include "cotlab/monitor/paraphraser.hpp"
#include "cotlab/monitor/pattern_monitor.hpp"
#include "cotlab/numcore/adam.hpp"
#include "cotlab/tasks/gameable.hpp"
#include "cotlab/train/reward.hpp"
#include "cotlab/train/sft.hpp"

namespace cotlab::train {

struct ReinforceOptions {
    std::size_t episodes = 2000;
    std::size_t batch_size = 16;
    double lr = 1e-3;
    double temperature = 1.0;
    std::size_t max_new = 24;
    double baseline_decay = 0.9;
    std::uint64_t seed = 0;

    tasks::Domain domain = tasks::Domain::Gameable;
    int arithmetic_k = 3;

    const monitor::PatternMonitor* monitor = nullptr;  // defaults to the lab monitor
    const model::ModelWeights* kl_reference = nullptr;
    const monitor::LegibilityScorer* legibility = nullptr;
    const model::ModelWeights* legibility_reference = nullptr;
    double legibility_weight = 0.0;
    const monitor::Paraphraser* paraphraser = nullptr;  // rewrite the CoT before the answer
    // Deploy-time monitoring variant: the logged detection flag is computed
    // on a paraphrase of the CoT while the training penalty still reads the
    // raw span.
    const monitor::Paraphraser* detection_paraphraser = nullptr;

    // Monitor-weight escalation when hacking is visible (divergence flagged
    // while the detection rate stays at or above the bar).
    double escalate_factor = 0.0;  // 0 disables
    double escalate_detection_bar = 0.5;
    std::size_t divergence_window = 50;
    double divergence_tau = 0.2;

    // Test hook: log garbage holdout numbers. Weight updates must be
    // bitwise unaffected — holdout is measurement only.
    std::uint64_t scramble_holdout_seed = 0;

    std::string snapshot_dir;
    std::size_t snapshot_every = 0;
    std::size_t abort_after_episodes = 0;  // test hook for resume equivalence
};

struct ReinforceResult {
    TrainingCurves curves;
    std::optional<std::size_t> divergence_flag_episode;
    std::vector<std::size_t> escalation_episodes;
    double final_monitor_weight = 0.0;
    bool aborted = false;
};

// One differentiable piece of an episode: `rows[i]` is the logit row that
// predicts `targets[i]` inside `seq`. When `weights` is set it gates each
// position (the steering trainer zeroes everything but the last pre-switch
// step); empty means every position carries weight 1.
struct GradSegment {
    std::vector<int> seq;
    std::vector<int> rows;
    std::vector<int> targets;
    std::vector<double> rollout_logprobs;  // chosen-token log-probs at rollout time
    std::vector<double> weights;
};

struct EpisodeRecord {
    std::vector<GradSegment> segments;
    std::vector<int> prompt;
    std::vector<int> effective_cot;  // inner CoT the answer attends to (post-paraphrase)
    std::vector<int> inner_answer;
    double task_score = 0.0;
    double provided = 0.0;
    double holdout = 0.0;
    double monitor_score = 0.0;
    bool flagged = false;
    double length_term = 0.0;  // span length the length penalty reads
    double cot_len = 0.0;      // logged CoT length
    double kl_sum = 0.0;
    double legibility = 0.5;
};

// Episode-level REINFORCE with a moving-average baseline; holdout accuracy
// is logged but never contributes to the return or the gradient.
ReinforceResult reinforce(model::ModelWeights& w, const RewardSpec& spec,
                          const ReinforceOptions& opt);

// ---- shared plumbing for the multi-model trainers ------------------------

// Samples a task for an episode stream (fresh instance per index).
struct EpisodeTask {
    tasks::TaskInstance instance;
    std::optional<tasks::GameableEpisode> gameable;
};
EpisodeTask make_episode_task(tasks::Domain domain, int k, numcore::Rng& rng);

// Grades an answer and fills the task/provided/holdout fields.
void grade_answer(EpisodeRecord& rec, const EpisodeTask& task);

// Monitor/length/KL/legibility components given the effective spans.
void fill_reward_terms(EpisodeRecord& rec, const RewardSpec& spec,
                       const monitor::PatternMonitor& mon, const ReinforceOptions& opt);

double episode_return(const EpisodeRecord& rec, const RewardSpec& spec, double monitor_weight,
                      double legibility_weight);

// Flat parameter gradient of scale * sum(-logp) over the record's segments.
std::vector<double> policy_grad(const model::ModelWeights& w, const EpisodeRecord& rec,
                                double scale);

// Moving-average baseline shared by all RL loops.
struct Baseline {
    double value = 0.0;
    bool initialized = false;
    double decay = 0.9;

    double advantage_pre_update(double batch_mean) {
        if (!initialized) {
            value = batch_mean;
            initialized = true;
        }
        return value;
    }
    void update(double batch_mean) { value = decay * value + (1.0 - decay) * batch_mean; }
};

// RL state snapshot for resumable drivers: parameters, optimizer moments,
// baseline, episode counter, escalated monitor weight, curve prefix.
struct RlSnapshot {
    std::vector<double> params;
    numcore::AdamState adam;
    Baseline baseline;
    std::size_t episodes_done = 0;
    double monitor_weight = 0.0;
    TrainingCurves curves;
    std::vector<std::size_t> escalation_episodes;
};

void save_rl_snapshot(const std::string& dir, const RlSnapshot& snap);
RlSnapshot load_rl_snapshot(const std::string& dir);
bool rl_snapshot_exists(const std::string& dir);

// Resume-aware variant: restores from `resume` when given.
ReinforceResult reinforce_resumable(model::ModelWeights& w, const RewardSpec& spec,
                                    const ReinforceOptions& opt, const RlSnapshot* resume);

// Generic episode loop shared with the trusted-KV trainer: batched rollouts,
// moving-average baseline, deterministic in-order gradient reduction, Adam,
// curves, escalation and snapshots. `trained` receives the updates.
struct RlCallbacks {
    std::function<EpisodeRecord(std::size_t, numcore::Rng&)> rollout;
    std::function<std::vector<double>(const EpisodeRecord&, double)> grad;
};
ReinforceResult rl_core(model::ModelWeights& trained, const RewardSpec& spec,
                        const ReinforceOptions& opt, const RlCallbacks& cb,
                        const RlSnapshot* resume);

}  // namespace cotlab::train
