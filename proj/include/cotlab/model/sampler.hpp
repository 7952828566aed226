#pragma once

#include <span>

#include "cotlab/numcore/rng.hpp"

namespace cotlab::model {

// Temperature 0 is argmax with lowest-index tie-break; otherwise a
// categorical draw from softmax(logits / temperature).
int sample(std::span<const double> logits, double temperature, numcore::Rng& rng);

// log softmax(logits)[token] at temperature 1.
double logprob_of(std::span<const double> logits, int token);

}  // namespace cotlab::model
