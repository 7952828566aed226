#include "cotlab/trustedkv/dualgen.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "cotlab/model/sampler.hpp"
#include "cotlab/numcore/digest.hpp"

namespace cotlab::trustedkv {

using model::GenerationTrace;
using model::KVCacheSet;
using model::ModelWeights;

DualGenState::DualGenState(const ModelWeights* trusted_w, ModelWeights* untrusted_w,
                           numcore::Rng paired_rng, CurrentKvPolicy pol)
    : trusted(trusted_w),
      untrusted(untrusted_w),
      trusted_cache(trusted_w->config()),
      untrusted_shadow(trusted_w->config()),
      rng(paired_rng),
      policy(pol) {
    if (!(trusted->config() == untrusted->config())) {
        throw CompatibilityError("trusted and untrusted models must share one model config");
    }
    if (!trusted->frozen()) {
        throw FrozenViolationError("the trusted model must be frozen");
    }
}

std::vector<double> dual_step(DualGenState& state, int token) {
    // Trusted pass first: appends trusted k/v for this position.
    model::forward_incremental(*state.trusted, token, state.trusted_cache);
    // Untrusted pass over the trusted cache; own k/v goes to the shadow only.
    std::vector<double> logits =
        forward_over_external(*state.untrusted, token, state.trusted_cache, state.position,
                              state.policy, &state.untrusted_shadow);
    state.position += 1;
    return logits;
}

GenerationTrace generate_trusted_kv(DualGenState& state, std::span<const int> prompt,
                                    const model::GenerateOptions& opt) {
    if (prompt.empty()) throw LengthError("generate_trusted_kv: prompt must be nonempty");
    const model::ModelConfig& cfg = state.trusted->config();
    if (state.position + prompt.size() + opt.max_new > cfg.max_seq_len) {
        throw LengthError("generate_trusted_kv: prompt plus budget exceeds max_seq_len");
    }

    GenerationTrace trace;
    trace.producer = "untrusted";
    std::vector<double> logits;
    for (int tok : prompt) logits = dual_step(state, tok);

    std::vector<int> tokens(prompt.begin(), prompt.end());
    for (std::size_t i = 0; i < opt.max_new; ++i) {
        trace.step_rng_counters.push_back(state.rng.counter());
        const int next = model::sample(logits, opt.temperature, state.rng);
        trace.logprobs.push_back(model::logprob_of(logits, next));
        if (opt.record_logits) trace.logit_snapshots.push_back(logits);
        tokens.push_back(next);
        trace.cache_len.push_back(state.trusted_cache.length());
        const bool stop =
            std::find(opt.stop_tokens.begin(), opt.stop_tokens.end(), next) !=
            opt.stop_tokens.end();
        if (stop || tokens.size() >= cfg.max_seq_len) break;
        logits = dual_step(state, next);
    }

    trace.seq = model::mark_spans(std::move(tokens), prompt.size(), opt.delims);
    trace.validate();
    return trace;
}

void apply_probe(DualGenState& state, const CacheProbe& probe) {
    KVCacheSet& target = probe.target == CacheProbe::Target::TrustedCache
                             ? state.trusted_cache
                             : state.untrusted_shadow;
    const model::ModelConfig& cfg = state.trusted->config();
    if (probe.layer >= cfg.n_layers || probe.head >= cfg.n_heads) {
        throw IndexError("probe layer/head outside the model");
    }
    if (probe.position >= target.length()) {
        throw IndexError("probe position " + std::to_string(probe.position) +
                         " is not cached yet (length " + std::to_string(target.length()) + ")");
    }
    if (probe.delta.size() != cfg.d_head()) {
        throw ShapeError("probe delta must have d_head entries");
    }
    double* k = target.mutable_key_row(probe.layer, probe.head, probe.position);
    double* v = target.mutable_value_row(probe.layer, probe.head, probe.position);
    for (std::size_t j = 0; j < probe.delta.size(); ++j) {
        k[j] += probe.delta[j];
        v[j] += probe.delta[j];
    }
}

void dump_trace_jsonl(const GenerationTrace& trace, const std::string& path,
                      bool include_logit_digest) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open trace dump for writing: " + path);
    const std::size_t base = trace.seq.tokens.size() - trace.generated_count();
    for (std::size_t i = 0; i < trace.generated_count(); ++i) {
        nlohmann::ordered_json j;
        j["position"] = base + i;
        j["token"] = trace.seq.tokens[base + i];
        j["producer"] = trace.producer;
        j["cache_len"] = i < trace.cache_len.size() ? trace.cache_len[i] : 0;
        if (include_logit_digest && i < trace.logit_snapshots.size()) {
            j["logit_digest"] = numcore::hex64(numcore::fnv1a(trace.logit_snapshots[i]));
        }
        os << j.dump() << "\n";
    }
}

}  // namespace cotlab::trustedkv
