#pragma once

#include <span>
#include <vector>

#include "cotlab/model/kvcache.hpp"
#include "cotlab/model/trace.hpp"
#include "cotlab/model/weights.hpp"
#include "cotlab/numcore/rng.hpp"
#include "cotlab/numcore/tape.hpp"

namespace cotlab::model {

// Pre-norm decoder block: x + attn(ln1(x)), then x + mlp(ln2(x)), GELU MLP,
// learned (or sinusoidal) positional embeddings added to token embeddings.

// Full-sequence causal forward. When `tape` is set, the pass is recorded and
// the returned logits are differentiable w.r.t. every parameter.
numcore::Tensor forward_full(const ModelWeights& w, std::span<const int> tokens,
                             numcore::Tape* tape = nullptr);

// Single-position forward over the cache; appends this position's k/v for
// every layer and head. Matches forward_full on the concatenated sequence
// bit for bit (shared kernels, same accumulation order).
std::vector<double> forward_incremental(const ModelWeights& w, int token, KVCacheSet& cache);

struct GenerateOptions {
    std::size_t max_new = 0;
    std::vector<int> stop_tokens;
    double temperature = 1.0;
    bool record_logits = false;
    SpanDelims delims;
};

// KV-cached autoregression from a nonempty prompt. Trace log-probs are the
// temperature-1 log-softmax of the raw logits at each chosen token.
GenerationTrace generate(const ModelWeights& w, std::span<const int> prompt,
                         const GenerateOptions& opt, numcore::Rng& rng);

}  // namespace cotlab::model
