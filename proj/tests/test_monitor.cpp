#include <doctest.h>

#include <filesystem>

#include "cotlab/monitor/legibility.hpp"
#include "cotlab/monitor/paraphraser.hpp"
#include "cotlab/monitor/pattern_monitor.hpp"
#include "cotlab/monitor/taxonomy.hpp"
#include "cotlab/tasks/arithmetic.hpp"
#include "cotlab/tasks/cipher.hpp"
#include "cotlab/tasks/gameable.hpp"
#include "cotlab/tasks/lab_vocab.hpp"

using namespace cotlab;
using namespace cotlab::monitor;
using namespace cotlab::tasks;
using numcore::Rng;

TEST_CASE("pattern monitor verdicts") {
    PatternMonitor mon = PatternMonitor::lab_default();

    SUBCASE("empty CoT is clean") {
        auto v = mon.monitor_cot({});
        CHECK(!v.flagged);
        CHECK(v.score == 0.0);
    }

    SUBCASE("hack-talk CoT is flagged") {
        Rng rng(1);
        auto ep = gen_gameable(1, rng)[0];
        auto v = mon.monitor_cot(ep.hack_cot());
        CHECK(v.flagged);
        CHECK(v.score >= mon.threshold());
    }

    SUBCASE("cipher-A blinds the monitor to the same CoT") {
        Rng rng(2);
        auto ep = gen_gameable(1, rng)[0];
        const CipherSpec a = CipherSpec::cipher_a();
        auto encoded = apply_cipher(ep.hack_cot(), a, CipherDirection::Encode);
        auto v = mon.monitor_cot(encoded);
        CHECK(!v.flagged);
        CHECK(v.score == 0.0);
    }

    SUBCASE("determinism") {
        std::vector<int> cot = {kCopy, kProvided, kMatch, value_token(3)};
        auto v1 = mon.monitor_cot(cot);
        auto v2 = mon.monitor_cot(cot);
        CHECK(v1.flagged == v2.flagged);
        CHECK(v1.score == v2.score);
        CHECK(v1.matched_patterns == v2.matched_patterns);
    }

    SUBCASE("honest canonical CoT is clean") {
        Rng rng(3);
        auto ep = gen_gameable(1, rng)[0];
        CHECK(!mon.monitor_cot(ep.instance.canonical_cot).flagged);
    }

    SUBCASE("spec file round trip") {
        const std::string path = std::filesystem::temp_directory_path() / "cotlab_monitor.json";
        mon.save(path);
        PatternMonitor loaded = PatternMonitor::load(path);
        CHECK(loaded.digest() == mon.digest());
        std::filesystem::remove(path);
    }
}

TEST_CASE("paraphraser semantics and scrambling") {
    const Paraphraser para = Paraphraser::lab_default();
    const Paraphraser ident = Paraphraser::identity();

    SUBCASE("empty input") { CHECK(para.paraphrase({}, 1).empty()); }

    SUBCASE("identity paraphraser is the identity") {
        std::vector<int> cot = {value_token(4), kSepAlt, kStep, value_token(9)};
        CHECK(ident.paraphrase(cot, 5) == cot);
    }

    SUBCASE("deterministic per seed") {
        std::vector<int> cot = {value_token(1), kSep, value_token(2), kSep, value_token(3)};
        CHECK(para.paraphrase(cot, 42) == para.paraphrase(cot, 42));
    }

    SUBCASE("canonical CoTs still pass the checker") {
        Rng rng(11);
        int failures = 0;
        auto insts = gen_arithmetic(3, 100, rng);
        for (std::size_t i = 0; i < insts.size(); ++i) {
            auto out = para.paraphrase(insts[i].canonical_cot, 1000 + i);
            if (!cot_checker(out, insts[i])) ++failures;
        }
        CHECK(failures <= 5);  // spec bound; construction gives 0
    }

    SUBCASE("ciphered CoTs are corrupted by paraphrase round trips") {
        const CipherSpec a = CipherSpec::cipher_a();
        Rng rng(12);
        int corrupted = 0;
        const int total = 100;
        for (int i = 0; i < total; ++i) {
            const int k = 3 + static_cast<int>(rng.below(3));
            auto inst = gen_arithmetic(k, 1, rng)[0];
            const auto& x = inst.canonical_cot;
            auto round = a.decode(para.paraphrase(a.encode(x), 5000 + i));
            if (round != x) ++corrupted;
        }
        CHECK(corrupted >= 90);
    }

    SUBCASE("digest is stable") {
        CHECK(para.digest() == Paraphraser::lab_default().digest());
        CHECK(para.digest() != ident.digest());
    }
}

TEST_CASE("legibility scorer structure") {
    LegibilityScorer sc(/*midpoint=*/-2.0, /*scale=*/0.5);
    Rng rng(21);
    model::ModelConfig cfg;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.d_model = 16;
    cfg.vocab_size = kVocabSize;
    cfg.max_seq_len = 48;
    model::ModelWeights ref(cfg, rng);

    TaskInstance inst = make_arithmetic({12, 34, 56});
    CHECK(sc.legibility_reward(inst.prompt, {}, ref) == 0.5);
    const double r = sc.legibility_reward(inst.prompt, inst.canonical_cot, ref);
    CHECK(r > 0.0);
    CHECK(r < 1.0);
}

TEST_CASE("classify_encoding forced labels") {
    Rng rng(31);
    model::ModelConfig cfg;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.d_model = 16;
    cfg.vocab_size = kVocabSize;
    cfg.max_seq_len = 48;
    model::ModelWeights ref(cfg, rng);
    PatternMonitor mon = PatternMonitor::lab_default();

    auto corpus = gen_arithmetic(3, 30, rng);
    TaxonomyOptions opt;
    opt.nll_anomaly_threshold = calibrate_nll_anomaly_threshold(ref, corpus);

    auto make_traces = [&](const std::vector<int>& cot) {
        std::vector<model::GenerationTrace> traces;
        for (int i = 0; i < 20; ++i) {
            auto inst = corpus[static_cast<std::size_t>(i)];
            model::GenerationTrace tr;
            tr.seq = assemble_sequence(inst.prompt, cot.empty() ? inst.canonical_cot : cot,
                                       inst.answer);
            traces.push_back(std::move(tr));
        }
        return traces;
    };

    SUBCASE("canonical, no divergence: none") {
        auto rep = classify_encoding(make_traces({}), ref, mon, opt, {});
        CHECK(rep.label == TaxonomyLabel::None);
        CHECK(!rep.q1_anomalous);
    }

    SUBCASE("clean CoTs with divergence: steganography") {
        TaxonomyEvidence ev;
        ev.divergence_present = true;
        auto rep = classify_encoding(make_traces({}), ref, mon, opt, ev);
        CHECK(rep.label == TaxonomyLabel::Steganography);
    }

    SUBCASE("flagged CoTs with translator recovery: linguistic drift") {
        TaxonomyEvidence ev;
        ev.translator_recovery_rate = 0.95;
        auto rep = classify_encoding(make_traces({kCopy, kProvided, kMatch}), ref, mon, opt, ev);
        CHECK(rep.q1_anomalous);
        CHECK(rep.label == TaxonomyLabel::LinguisticDrift);
    }

    SUBCASE("flagged CoTs without recovery: alien reasoning") {
        TaxonomyEvidence ev;
        ev.translator_recovery_rate = 0.1;
        auto rep = classify_encoding(make_traces({kCopy, kProvided, kMatch}), ref, mon, opt, ev);
        CHECK(rep.label == TaxonomyLabel::AlienReasoning);
    }

    SUBCASE("too few traces") {
        auto traces = make_traces({});
        traces.resize(5);
        CHECK_THROWS_AS(classify_encoding(traces, ref, mon, opt, {}), SampleSizeError);
    }
}
