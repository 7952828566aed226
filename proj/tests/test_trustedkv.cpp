#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cotlab/model/sampler.hpp"
#include "cotlab/model/transformer.hpp"
#include "cotlab/tasks/lab_vocab.hpp"
#include "cotlab/trustedkv/dualgen.hpp"

using namespace cotlab;
using namespace cotlab::trustedkv;
using model::GenerateOptions;
using model::GenerationTrace;
using model::ModelConfig;
using model::ModelWeights;
using numcore::Rng;

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_model = 16;
    cfg.vocab_size = 40;
    cfg.max_seq_len = 48;
    return cfg;
}

// Teacher-forced replay: feeds `tokens` through dual_step and collects the
// untrusted logits per position.
std::vector<std::vector<double>> replay(DualGenState& state, const std::vector<int>& tokens) {
    std::vector<std::vector<double>> logits;
    for (int t : tokens) logits.push_back(dual_step(state, t));
    return logits;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::fabs(a[i] - b[i]));
    return worst;
}

}  // namespace

TEST_CASE("equal weights: trusted-KV generation matches standard generation") {
    for (CurrentKvPolicy policy : {CurrentKvPolicy::OwnCurrent, CurrentKvPolicy::TrustedCurrent}) {
        Rng wrng(21);
        ModelWeights trusted(small_config(), wrng);
        trusted.set_frozen(true);
        ModelWeights untrusted = trusted;
        untrusted.set_frozen(false);

        GenerateOptions opt;
        opt.max_new = 14;
        opt.temperature = 1.0;
        opt.record_logits = true;

        Rng gen_rng(77);
        GenerationTrace standard = model::generate(trusted, std::vector<int>{3, 5, 7}, opt, gen_rng);

        DualGenState state(&trusted, &untrusted, Rng(77), policy);
        GenerationTrace dual = generate_trusted_kv(state, std::vector<int>{3, 5, 7}, opt);

        CHECK(dual.seq.tokens == standard.seq.tokens);
        REQUIRE(dual.logit_snapshots.size() == standard.logit_snapshots.size());
        for (std::size_t i = 0; i < dual.logit_snapshots.size(); ++i) {
            CHECK(max_abs_diff(dual.logit_snapshots[i], standard.logit_snapshots[i]) < 1e-12);
        }
        CHECK(dual.producer == "untrusted");
    }
}

TEST_CASE("max_new 0 leaves a prompt-only trace with prompt-length cache") {
    Rng wrng(22);
    ModelWeights trusted(small_config(), wrng);
    trusted.set_frozen(true);
    ModelWeights untrusted = trusted;
    untrusted.set_frozen(false);

    DualGenState state(&trusted, &untrusted, Rng(5));
    GenerateOptions opt;
    opt.max_new = 0;
    GenerationTrace tr = generate_trusted_kv(state, std::vector<int>{1, 2, 3, 4}, opt);
    CHECK(tr.seq.tokens == std::vector<int>{1, 2, 3, 4});
    CHECK(state.trusted_cache.length() == 4);
    CHECK(state.untrusted_shadow.length() == 4);
}

TEST_CASE("state construction errors") {
    Rng wrng(23);
    ModelWeights trusted(small_config(), wrng);
    ModelWeights untrusted = trusted;

    // not frozen
    CHECK_THROWS_AS(DualGenState(&trusted, &untrusted, Rng(1)), FrozenViolationError);

    trusted.set_frozen(true);
    ModelConfig other = small_config();
    other.n_heads = 1;
    Rng wrng2(24);
    ModelWeights mismatched(other, wrng2);
    CHECK_THROWS_AS(DualGenState(&trusted, &mismatched, Rng(1)), CompatibilityError);
}

TEST_CASE("probes: trusted cache matters, discarded untrusted k/v never does") {
    Rng wrng(31);
    ModelWeights trusted(small_config(), wrng);
    trusted.set_frozen(true);
    Rng wrng2(32);
    ModelWeights untrusted(small_config(), wrng2);  // different weights; generic case

    std::vector<int> tokens = {2, 9, 4, 11, 6, 3, 8, 1, 5, 7};
    const std::size_t probe_pos = 3;

    DualGenState clean(&trusted, &untrusted, Rng(1));
    auto clean_logits = replay(clean, tokens);

    SUBCASE("zero perturbation changes nothing") {
        DualGenState probed(&trusted, &untrusted, Rng(1));
        replay(probed, {tokens.begin(), tokens.begin() + probe_pos + 1});
        CacheProbe probe{0, 0, probe_pos, std::vector<double>(small_config().d_head(), 0.0),
                         CacheProbe::Target::TrustedCache};
        apply_probe(probed, probe);
        std::vector<int> rest(tokens.begin() + probe_pos + 1, tokens.end());
        auto probed_logits = replay(probed, rest);
        for (std::size_t i = 0; i < probed_logits.size(); ++i) {
            CHECK(max_abs_diff(probed_logits[i], clean_logits[probe_pos + 1 + i]) == 0.0);
        }
    }

    SUBCASE("perturbing the trusted cache changes downstream logits") {
        Rng prng(55);
        DualGenState probed(&trusted, &untrusted, Rng(1));
        replay(probed, {tokens.begin(), tokens.begin() + probe_pos + 1});
        std::vector<double> delta(small_config().d_head());
        for (double& v : delta) v = prng.gauss(0.0, 1e-2);
        apply_probe(probed, {1, 1, probe_pos, delta, CacheProbe::Target::TrustedCache});
        std::vector<int> rest(tokens.begin() + probe_pos + 1, tokens.end());
        auto probed_logits = replay(probed, rest);
        double worst = 0.0;
        for (std::size_t i = 0; i < probed_logits.size(); ++i) {
            worst = std::max(worst, max_abs_diff(probed_logits[i], clean_logits[probe_pos + 1 + i]));
        }
        CHECK(worst > 1e-8);
    }

    SUBCASE("perturbing the untrusted shadow changes nothing: the path is severed") {
        Rng prng(56);
        for (std::size_t layer = 0; layer < 2; ++layer) {
            DualGenState probed(&trusted, &untrusted, Rng(1));
            replay(probed, {tokens.begin(), tokens.begin() + probe_pos + 1});
            std::vector<double> delta(small_config().d_head());
            for (double& v : delta) v = prng.gauss(0.0, 1.0);  // even large deltas
            apply_probe(probed, {layer, 0, probe_pos, delta, CacheProbe::Target::UntrustedShadow});
            std::vector<int> rest(tokens.begin() + probe_pos + 1, tokens.end());
            auto probed_logits = replay(probed, rest);
            for (std::size_t i = 0; i < probed_logits.size(); ++i) {
                CHECK(max_abs_diff(probed_logits[i], clean_logits[probe_pos + 1 + i]) < 1e-12);
            }
        }
    }

    SUBCASE("probe position must already be cached") {
        DualGenState probed(&trusted, &untrusted, Rng(1));
        replay(probed, {tokens.begin(), tokens.begin() + 2});
        CacheProbe probe{0, 0, 5, std::vector<double>(small_config().d_head(), 0.1),
                         CacheProbe::Target::TrustedCache};
        CHECK_THROWS_AS(apply_probe(probed, probe), IndexError);
    }
}

TEST_CASE("latent bypass: different emitted tokens diverge the trusted cache downstream") {
    Rng wrng(41);
    ModelWeights trusted(small_config(), wrng);
    trusted.set_frozen(true);
    ModelWeights untrusted_a = trusted;
    untrusted_a.set_frozen(false);
    ModelWeights untrusted_b = trusted;
    untrusted_b.set_frozen(false);
    // bias one output token heavily so the two untrusted models pick
    // different tokens at the first generated step
    untrusted_b.mutable_param(untrusted_b.index_of("unemb.b")).data[17] += 25.0;

    GenerateOptions opt;
    opt.max_new = 10;
    opt.temperature = 0.0;

    DualGenState sa(&trusted, &untrusted_a, Rng(1));
    GenerationTrace ta = generate_trusted_kv(sa, std::vector<int>{3, 4}, opt);
    DualGenState sb(&trusted, &untrusted_b, Rng(1));
    GenerationTrace tb = generate_trusted_kv(sb, std::vector<int>{3, 4}, opt);

    REQUIRE(ta.seq.tokens != tb.seq.tokens);
    std::size_t diverge_at = 0;
    while (diverge_at < std::min(ta.seq.tokens.size(), tb.seq.tokens.size()) &&
           ta.seq.tokens[diverge_at] == tb.seq.tokens[diverge_at]) {
        ++diverge_at;
    }
    // trusted caches agree strictly before the divergence and differ after
    const std::size_t dh = small_config().d_head();
    for (std::size_t pos = 0; pos < diverge_at; ++pos) {
        for (std::size_t j = 0; j < dh; ++j) {
            CHECK(sa.trusted_cache.key_row(0, 0, pos)[j] == sb.trusted_cache.key_row(0, 0, pos)[j]);
        }
    }
    bool differs_after = false;
    const std::size_t upto = std::min(sa.trusted_cache.length(), sb.trusted_cache.length());
    for (std::size_t pos = diverge_at; pos < upto && !differs_after; ++pos) {
        for (std::size_t j = 0; j < dh && !differs_after; ++j) {
            differs_after = sa.trusted_cache.key_row(0, 0, pos)[j] !=
                            sb.trusted_cache.key_row(0, 0, pos)[j];
        }
    }
    CHECK(differs_after);
}

TEST_CASE("trusted_forward_full matches the generation-time untrusted logits") {
    for (CurrentKvPolicy policy : {CurrentKvPolicy::OwnCurrent, CurrentKvPolicy::TrustedCurrent}) {
        Rng wrng(51);
        ModelWeights trusted(small_config(), wrng);
        trusted.set_frozen(true);
        Rng wrng2(52);
        ModelWeights untrusted(small_config(), wrng2);

        std::vector<int> tokens = {1, 8, 2, 9, 3, 10, 4};
        DualGenState state(&trusted, &untrusted, Rng(1), policy);
        auto step_logits = replay(state, tokens);

        model::KVCacheSet trusted_kv = collect_kv(trusted, tokens);
        numcore::Tensor full = trusted_forward_full(untrusted, trusted_kv, tokens, policy, nullptr);
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            std::vector<double> row(full.data.data() + t * small_config().vocab_size,
                                    full.data.data() + (t + 1) * small_config().vocab_size);
            CHECK(max_abs_diff(row, step_logits[t]) < 1e-10);
        }
    }
}

TEST_CASE("trace dump is one JSON object per generated step") {
    Rng wrng(61);
    ModelWeights trusted(small_config(), wrng);
    trusted.set_frozen(true);
    ModelWeights untrusted = trusted;
    untrusted.set_frozen(false);
    DualGenState state(&trusted, &untrusted, Rng(3));
    GenerateOptions opt;
    opt.max_new = 6;
    opt.record_logits = true;
    GenerationTrace tr = generate_trusted_kv(state, std::vector<int>{2, 3}, opt);

    const std::string path = std::filesystem::temp_directory_path() / "cotlab_trace.jsonl";
    dump_trace_jsonl(tr, path, true);
    std::ifstream is(path);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(is, line)) {
        CHECK(line.find("\"producer\":\"untrusted\"") != std::string::npos);
        ++lines;
    }
    CHECK(lines == tr.generated_count());
    std::filesystem::remove(path);
}
