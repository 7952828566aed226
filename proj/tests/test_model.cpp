#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cotlab/model/sampler.hpp"
#include "cotlab/model/transformer.hpp"
#include "cotlab/model/vocab.hpp"
#include "cotlab/tasks/lab_vocab.hpp"

using namespace cotlab;
using namespace cotlab::model;
using numcore::Rng;
using numcore::Tensor;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_model = 16;
    cfg.vocab_size = 30;
    cfg.max_seq_len = 40;
    return cfg;
}

std::vector<int> random_tokens(std::size_t len, std::size_t vocab, Rng& rng) {
    std::vector<int> t(len);
    for (int& v : t) v = static_cast<int>(rng.below(vocab));
    return t;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::fabs(a[i] - b[i]));
    }
    return worst;
}

}  // namespace

TEST_CASE("forward_full shapes and causality") {
    Rng rng(1);
    ModelWeights w(tiny_config(), rng);

    std::vector<int> one = {5};
    Tensor logits = forward_full(w, one);
    CHECK(logits.shape == std::vector<std::size_t>{1, 30});

    Rng rng2(2);
    std::vector<int> tokens = random_tokens(10, 30, rng2);
    Tensor base = forward_full(w, tokens);
    auto permuted = tokens;
    std::swap(permuted[7], permuted[9]);
    permuted[8] = (permuted[8] + 3) % 30;
    Tensor mod = forward_full(w, permuted);
    for (std::size_t t = 0; t < 7; ++t) {
        for (std::size_t v = 0; v < 30; ++v) {
            CHECK(base.at(t, v) == mod.at(t, v));
        }
    }
}

TEST_CASE("forward_full rejects overlength input") {
    Rng rng(1);
    ModelWeights w(tiny_config(), rng);
    std::vector<int> tokens(41, 1);
    CHECK_THROWS_AS(forward_full(w, tokens), LengthError);
}

TEST_CASE("incremental forward equals full forward") {
    Rng rng(3);
    ModelWeights w(tiny_config(), rng);

    SUBCASE("single token against empty cache") {
        KVCacheSet cache(tiny_config());
        auto inc = forward_incremental(w, 4, cache);
        Tensor full = forward_full(w, std::vector<int>{4});
        CHECK(max_abs_diff(inc, std::span(full.data)) == 0.0);
        CHECK(cache.length() == 1);
    }

    SUBCASE("replay of a 16-token sequence") {
        Rng trng(4);
        std::vector<int> tokens = random_tokens(16, 30, trng);
        Tensor full = forward_full(w, tokens);
        KVCacheSet cache(tiny_config());
        double worst = 0.0;
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            auto inc = forward_incremental(w, tokens[t], cache);
            worst = std::max(worst,
                             max_abs_diff(inc, std::span(full.data.data() + t * 30, 30)));
        }
        CHECK(worst < 1e-10);
    }

    SUBCASE("cache at max_seq_len raises a length error") {
        ModelConfig cfg = tiny_config();
        cfg.max_seq_len = 3;
        Rng r(9);
        ModelWeights w3(cfg, r);
        KVCacheSet cache(cfg);
        forward_incremental(w3, 1, cache);
        forward_incremental(w3, 2, cache);
        forward_incremental(w3, 3, cache);
        CHECK_THROWS_AS(forward_incremental(w3, 4, cache), LengthError);
    }

    SUBCASE("config mismatch raises a compatibility error") {
        ModelConfig other = tiny_config();
        other.n_heads = 1;
        KVCacheSet cache(other);
        CHECK_THROWS_AS(forward_incremental(w, 1, cache), CompatibilityError);
    }
}

TEST_CASE("incremental/full equivalence across random sequences") {
    Rng rng(31);
    ModelWeights w(tiny_config(), rng);
    for (int it = 0; it < 10; ++it) {
        Rng trng(100 + it);
        const std::size_t len = 1 + trng.below(32);
        std::vector<int> tokens = random_tokens(len, 30, trng);
        Tensor full = forward_full(w, tokens);
        KVCacheSet cache(tiny_config());
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            auto inc = forward_incremental(w, tokens[t], cache);
            CHECK(max_abs_diff(inc, std::span(full.data.data() + t * 30, 30)) < 1e-10);
        }
    }
}

TEST_CASE("sampler behavior") {
    Rng rng(5);
    std::vector<double> logits = {9, 1, 1};
    CHECK(sample(logits, 0.0, rng) == 0);

    std::vector<double> tie = {2, 7, 7};
    CHECK(sample(tie, 0.0, rng) == 1);  // lowest index wins

    std::vector<double> equal = {0.5, 0.5, 0.5};
    Rng a(77), b(77);
    for (int i = 0; i < 20; ++i) CHECK(sample(equal, 1.0, a) == sample(equal, 1.0, b));

    // 1e5 draws from logits [0, ln 3]: expected ratio 1:3
    std::vector<double> skew = {0.0, std::log(3.0)};
    Rng s(123);
    int count1 = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) count1 += sample(skew, 1.0, s);
    const double p = 0.75;
    const double sigma = std::sqrt(p * (1 - p) * n);
    CHECK(std::fabs(count1 - p * n) < 3.0 * sigma);

    CHECK_THROWS_AS(sample(logits, -1.0, rng), ConfigError);
}

TEST_CASE("generate traces") {
    Rng rng(6);
    ModelConfig cfg = tiny_config();
    ModelWeights w(cfg, rng);
    std::vector<int> prompt = {1, 2, 3};

    GenerateOptions opt;
    opt.max_new = 0;
    Rng g1(10);
    GenerationTrace t0 = generate(w, prompt, opt, g1);
    CHECK(t0.seq.tokens == prompt);
    CHECK(t0.generated_count() == 0);

    opt.max_new = 12;
    opt.temperature = 0.0;
    Rng g2(10), g3(10);
    GenerationTrace a = generate(w, prompt, opt, g2);
    GenerationTrace b = generate(w, prompt, opt, g3);
    CHECK(a.seq.tokens == b.seq.tokens);

    // recomputation oracle: trace log-probs match log-softmax of full logits
    opt.temperature = 1.0;
    Rng g4(11);
    GenerationTrace tr = generate(w, prompt, opt, g4);
    for (std::size_t i = 0; i < tr.generated_count(); ++i) {
        const std::size_t pos = prompt.size() + i;
        std::vector<int> prefix(tr.seq.tokens.begin(),
                                tr.seq.tokens.begin() + static_cast<long>(pos));
        Tensor full = forward_full(w, prefix);
        std::span<const double> row(full.data.data() + (pos - 1) * cfg.vocab_size,
                                    cfg.vocab_size);
        const double lp = logprob_of(row, tr.seq.tokens[pos]);
        CHECK(std::fabs(lp - tr.logprobs[i]) < 1e-10);
    }

    CHECK_THROWS_AS(generate(w, std::vector<int>{}, opt, g4), LengthError);
}

TEST_CASE("weights digest determinism, frozen flag, checkpoint round trip") {
    Rng r1(42), r2(42), r3(43);
    ModelWeights a(tiny_config(), r1);
    ModelWeights b(tiny_config(), r2);
    ModelWeights c(tiny_config(), r3);
    CHECK(a.digest() == b.digest());
    CHECK(a.digest() != c.digest());

    a.set_frozen(true);
    CHECK_THROWS_AS(a.mutable_param(0), FrozenViolationError);
    CHECK_THROWS_AS(a.unflatten(a.flatten()), FrozenViolationError);
    a.set_frozen(false);

    const std::string path = std::filesystem::temp_directory_path() / "cotlab_model_ck.bin";
    a.save(path, 777);
    ModelWeights loaded = ModelWeights::load(path, tiny_config());
    CHECK(loaded.digest() == a.digest());
    std::filesystem::remove(path);
}

TEST_CASE("vocabulary file round trip") {
    const auto& v = tasks::lab_vocab();
    CHECK(v.size() == tasks::kVocabSize);
    CHECK(v.id("v07") == tasks::value_token(7));
    const std::string path = std::filesystem::temp_directory_path() / "cotlab_vocab.txt";
    v.save(path);
    Vocab loaded = Vocab::load(path);
    CHECK(loaded.tokens == v.tokens);
    std::filesystem::remove(path);
}

TEST_CASE("span marking") {
    using namespace tasks;
    std::vector<int> toks = {kBos, value_token(3), kEquals, kThinkOpen, value_token(7),
                             kThinkClose, kAnsOpen, value_token(7), kAnsClose, kEos};
    TokenSequence seq = mark_spans(toks, 3, lab_delims());
    CHECK(seq.prompt_end == 3);
    CHECK(seq.cot_end == 6);
    CHECK(seq.inner_cot(lab_delims()) == std::vector<int>{value_token(7)});
    CHECK(seq.inner_answer(lab_delims(), kEos) == std::vector<int>{value_token(7)});
}
