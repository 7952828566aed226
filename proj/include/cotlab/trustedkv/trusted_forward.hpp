#pragma once

#include <span>
#include <vector>

#include "cotlab/model/kvcache.hpp"
#include "cotlab/model/transformer.hpp"
#include "cotlab/model/weights.hpp"
#include "cotlab/numcore/tape.hpp"

namespace cotlab::trustedkv {

// Where the current position's key/value comes from during the untrusted
// pass. The mechanism prescribes trusted k/v for all *past* positions; for
// the position being generated the source is a policy knob (default: the
// untrusted model's own, since causal attention produces it inside the
// current forward pass anyway).
enum class CurrentKvPolicy { OwnCurrent, TrustedCurrent };

// Single-position untrusted forward attending over an external cache.
// `ext` must already hold the trusted k/v for position `pos` (the trusted
// pass runs first); entries 0..pos-1 are the attended past. The untrusted
// model's own k/v for this position is appended to `own_shadow` when given
// and is otherwise discarded — nothing ever reads it back.
std::vector<double> forward_over_external(const model::ModelWeights& untrusted, int token,
                                          const model::KVCacheSet& ext, std::size_t pos,
                                          CurrentKvPolicy policy,
                                          model::KVCacheSet* own_shadow);

// Differentiable full-sequence analogue used for training: logits[T, V]
// where attention row t reads trusted k/v (constants) for s < t and the
// policy-selected source at s = t. Gradients flow only into `untrusted`.
numcore::Tensor trusted_forward_full(const model::ModelWeights& untrusted,
                                     const model::KVCacheSet& trusted_kv,
                                     std::span<const int> tokens, CurrentKvPolicy policy,
                                     numcore::Tape* tape);

// Runs `weights` over `tokens` and returns the populated cache.
model::KVCacheSet collect_kv(const model::ModelWeights& weights, std::span<const int> tokens);

// Differentiable forward where the first `prefix_len` positions' k/v come
// from an external cache (constants) and all later positions use the model's
// own. Feeding another model's cache for a processed context is how the
// translator's kv-feed variation grants access to that model's latent state.
numcore::Tensor prefix_forward_full(const model::ModelWeights& w,
                                    const model::KVCacheSet& ext, std::size_t prefix_len,
                                    std::span<const int> tokens, numcore::Tape* tape);

// Seeds a fresh cache with the first `prefix_len` rows of `src`.
model::KVCacheSet cache_prefix(const model::KVCacheSet& src, std::size_t prefix_len);

}  // namespace cotlab::trustedkv
