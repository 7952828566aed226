#pragma once

#include "cotlab/monitor/paraphraser.hpp"
#include "cotlab/train/reinforce.hpp"

namespace cotlab::train {

// Mind reads the question and writes the CoT; the frozen paraphraser
// rewrites it; the mask reads the question plus one paraphrase and writes
// the answer. Mind and mask both update from the answer reward.
struct MindMaskSetup {
    model::ModelWeights mind;
    model::ModelWeights mask;
    monitor::Paraphraser paraphraser;
};

struct MindMaskResult {
    TrainingCurves curves;
    std::optional<std::size_t> divergence_flag_episode;
};

MindMaskResult mind_mask_train(MindMaskSetup& setup, const RewardSpec& spec,
                               const ReinforceOptions& opt);

}  // namespace cotlab::train
