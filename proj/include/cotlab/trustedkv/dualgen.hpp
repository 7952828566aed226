#pragma once

#include <vector>

#include "cotlab/model/transformer.hpp"
#include "cotlab/trustedkv/trusted_forward.hpp"

namespace cotlab::trustedkv {

// Dual-model generation state. The trusted cache is the only cache consulted
// for past positions; it is produced exclusively by trusted-model forward
// passes. The untrusted model's per-position k/v is written to a shadow
// buffer that nothing reads back — it exists so probes can demonstrate the
// severance rather than assume it.
struct DualGenState {
    const model::ModelWeights* trusted = nullptr;
    model::ModelWeights* untrusted = nullptr;
    model::KVCacheSet trusted_cache;
    model::KVCacheSet untrusted_shadow;
    std::size_t position = 0;
    numcore::Rng rng;
    CurrentKvPolicy policy = CurrentKvPolicy::OwnCurrent;

    DualGenState() = default;
    DualGenState(const model::ModelWeights* trusted_w, model::ModelWeights* untrusted_w,
                 numcore::Rng paired_rng, CurrentKvPolicy pol = CurrentKvPolicy::OwnCurrent);
};

struct CacheProbe {
    enum class Target { TrustedCache, UntrustedShadow };
    std::size_t layer = 0;
    std::size_t head = 0;
    std::size_t position = 0;
    std::vector<double> delta;  // length d_head, added to both k and v rows
    Target target = Target::TrustedCache;
};

// Advances both models one position in lockstep over `token`: the trusted
// model appends its k/v, the untrusted model produces the logits that select
// the next token. Returns the untrusted logits.
std::vector<double> dual_step(DualGenState& state, int token);

// KV-cached autoregression under the substitution. The trace's producer tag
// records that every emitted token came from the untrusted model while every
// consulted cache entry came from the trusted one.
model::GenerationTrace generate_trusted_kv(DualGenState& state, std::span<const int> prompt,
                                           const model::GenerateOptions& opt);

// Additively perturbs the target buffer at one (layer, head, position);
// everything else is untouched.
void apply_probe(DualGenState& state, const CacheProbe& probe);

// One JSON object per step: {position, token, producer, cache_len[, logit_digest]}.
void dump_trace_jsonl(const model::GenerationTrace& trace, const std::string& path,
                      bool include_logit_digest = false);

}  // namespace cotlab::trustedkv
