#pragma once

#include "cotlab/train/sft.hpp"

namespace cotlab::train {

// Fine-tunes on (prompt, answer) pairs with the CoT removed entirely;
// cross-entropy covers the answer span only. The corpus answers are the
// instances' CoT-derived reference answers.
SftResult distill(model::ModelWeights& w, const std::vector<tasks::TaskInstance>& corpus,
                  std::size_t epochs, const SftOptions& opt = {});

}  // namespace cotlab::train
