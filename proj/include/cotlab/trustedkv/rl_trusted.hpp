#pragma once

#include "cotlab/train/reinforce.hpp"
#include "cotlab/trustedkv/dualgen.hpp"

namespace cotlab::trustedkv {

// Policy-gradient fine-tuning where every rollout is produced by
// generate_trusted_kv and the teacher-forced recompute attends over the
// trusted model's caches. Only the untrusted weights receive optimizer
// steps; the trusted digest is checked before and after.
train::ReinforceResult rl_with_trusted_kv(const model::ModelWeights& trusted,
                                          model::ModelWeights& untrusted,
                                          const train::RewardSpec& spec,
                                          const train::ReinforceOptions& opt,
                                          CurrentKvPolicy policy = CurrentKvPolicy::OwnCurrent);

}  // namespace cotlab::trustedkv
