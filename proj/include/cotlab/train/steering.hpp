#pragma once

#include "cotlab/train/reinforce.hpp"

namespace cotlab::train {

// Incremental steering: the optimized planner writes CoT steps until a
// uniformly random switch boundary, the frozen planner completes the CoT and
// the answer. Gradient flows only through the last step the optimized
// planner wrote before the handoff.
struct SteeringSetup {
    model::ModelWeights optimized;
    model::ModelWeights frozen_planner;
    std::size_t max_switch_steps = 6;  // switch step drawn uniformly from {0..max}
};

struct SteeringResult {
    TrainingCurves curves;
    std::optional<std::size_t> divergence_flag_episode;
};

SteeringResult steering_train(SteeringSetup& setup, const RewardSpec& spec,
                              const ReinforceOptions& opt);

// Rollout helper exposed for tests: generates one steering episode and
// returns the record whose single segment carries per-position weights that
// are 1 exactly on the last pre-switch step.
EpisodeRecord steering_rollout(const SteeringSetup& setup, const RewardSpec& spec,
                               const ReinforceOptions& opt, const monitor::PatternMonitor& mon,
                               numcore::Rng& rng);

}  // namespace cotlab::train
