#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cotlab/model/sampler.hpp"
#include "cotlab/tasks/arithmetic.hpp"
#include "cotlab/tasks/lab_vocab.hpp"
#include "cotlab/train/distill.hpp"
#include "cotlab/train/mind_mask.hpp"
#include "cotlab/train/reinforce.hpp"
#include "cotlab/train/sft.hpp"
#include "cotlab/train/steering.hpp"
#include "cotlab/trustedkv/rl_trusted.hpp"

using namespace cotlab;
using namespace cotlab::train;
using namespace cotlab::tasks;
using model::ModelConfig;
using model::ModelWeights;
using numcore::Rng;

namespace {

ModelConfig lab_config(std::size_t d_model = 24, std::size_t layers = 2) {
    ModelConfig cfg;
    cfg.n_layers = layers;
    cfg.n_heads = 2;
    cfg.d_model = d_model;
    cfg.vocab_size = kVocabSize;
    cfg.max_seq_len = 64;
    return cfg;
}

}  // namespace

TEST_CASE("sft: zero epochs, memorization, prompt masking, decreasing loss") {
    Rng rng(1);
    ModelWeights w(lab_config(), rng);
    Rng crng(2);
    auto corpus = gen_arithmetic(3, 10, crng);

    SUBCASE("0 epochs leaves weights unchanged") {
        const std::uint64_t before = w.digest();
        SftResult res = sft(w, corpus, 0);
        CHECK(w.digest() == before);
        CHECK(res.steps == 0);
    }

    SUBCASE("memorizes a 10-instance corpus to per-token loss < 0.05") {
        SftOptions opt;
        opt.batch_size = 10;
        opt.lr = 3e-3;
        SftResult res = sft(w, corpus, 300, opt);
        REQUIRE(!res.step_loss.empty());
        CHECK(res.step_loss.back() < 0.05);
        // epoch means decrease overall
        CHECK(res.epoch_mean.back() < res.epoch_mean.front());
    }

    SUBCASE("prompt-span logit gradients are exactly zero") {
        numcore::Tape tape;
        numcore::Tensor logits;
        model::TokenSequence seq = assemble_sequence(corpus[0]);
        numcore::Tensor loss = sft_example_loss(tape, w, seq, LossSpan::CotAndAnswer, &logits);
        tape.backward(loss);
        const auto& glogits = tape.grad(logits);
        const std::size_t v = kVocabSize;
        // rows 0 .. prompt_end-2 predict prompt tokens, all masked
        for (std::size_t r = 0; r + 1 < seq.prompt_end; ++r) {
            for (std::size_t j = 0; j < v; ++j) {
                CHECK(glogits[r * v + j] == 0.0);
            }
        }
    }
}

TEST_CASE("distill: answer-only loss, zero epochs unchanged") {
    Rng rng(3);
    ModelWeights w(lab_config(16, 1), rng);
    Rng crng(4);
    auto corpus = gen_arithmetic(1, 8, crng);

    const std::uint64_t before = w.digest();
    distill(w, corpus, 0);
    CHECK(w.digest() == before);

    model::TokenSequence seq = assemble_answer_only(corpus[0].prompt, corpus[0].answer);
    CHECK(seq.cot_end == seq.prompt_end);  // no CoT span at all
    numcore::Tape tape;
    numcore::Tensor logits;
    numcore::Tensor loss = sft_example_loss(tape, w, seq, LossSpan::AnswerOnly, &logits);
    tape.backward(loss);
    const auto& g = tape.grad(logits);
    for (std::size_t r = 0; r + 1 < seq.prompt_end; ++r) {
        for (std::size_t j = 0; j < kVocabSize; ++j) CHECK(g[r * kVocabSize + j] == 0.0);
    }

    SftResult res = distill(w, corpus, 40);
    CHECK(res.step_loss.back() < res.step_loss.front());
}

TEST_CASE("reinforce mechanics") {
    RewardSpec spec;
    spec.task_weight = 1.0;

    ReinforceOptions opt;
    opt.episodes = 48;
    opt.batch_size = 8;
    opt.max_new = 16;
    opt.seed = 11;
    opt.domain = Domain::Arithmetic;
    opt.arithmetic_k = 1;
    opt.divergence_window = 16;

    SUBCASE("0 episodes leaves weights unchanged") {
        Rng rng(5);
        ModelWeights w(lab_config(16, 1), rng);
        const std::uint64_t before = w.digest();
        ReinforceOptions o = opt;
        o.episodes = 0;
        reinforce(w, spec, o);
        CHECK(w.digest() == before);
    }

    SUBCASE("deterministic: same seed, same curves, same weights") {
        Rng r1(6), r2(6);
        ModelWeights w1(lab_config(16, 1), r1);
        ModelWeights w2(lab_config(16, 1), r2);
        ReinforceResult a = reinforce(w1, spec, opt);
        ReinforceResult b = reinforce(w2, spec, opt);
        CHECK(w1.digest() == w2.digest());
        CHECK(a.curves.reward == b.curves.reward);
        CHECK(a.curves.provided == b.curves.provided);
    }

    SUBCASE("holdout isolation: scrambled holdout logging never touches weights") {
        Rng r1(7), r2(7);
        ModelWeights w1(lab_config(16, 1), r1);
        ModelWeights w2(lab_config(16, 1), r2);
        ReinforceOptions scrambled = opt;
        scrambled.scramble_holdout_seed = 999;
        ReinforceResult a = reinforce(w1, spec, opt);
        ReinforceResult b = reinforce(w2, spec, scrambled);
        CHECK(w1.digest() == w2.digest());
        CHECK(a.curves.holdout != b.curves.holdout);
        CHECK(a.curves.reward == b.curves.reward);
    }

    SUBCASE("snapshot and resume reproduce the uninterrupted run") {
        const std::string dir =
            (std::filesystem::temp_directory_path() / "cotlab_rl_snap").string();
        std::filesystem::remove_all(dir);

        Rng r1(8), r2(8);
        ModelWeights w_full(lab_config(16, 1), r1);
        ReinforceResult full = reinforce(w_full, spec, opt);

        ModelWeights w_part(lab_config(16, 1), r2);
        ReinforceOptions part = opt;
        part.snapshot_dir = dir;
        part.abort_after_episodes = 24;
        ReinforceResult aborted = reinforce(w_part, spec, part);
        CHECK(aborted.aborted);
        REQUIRE(rl_snapshot_exists(dir));

        RlSnapshot snap = load_rl_snapshot(dir);
        CHECK(snap.episodes_done == 24);
        ReinforceOptions cont = opt;
        cont.snapshot_dir = dir;
        ReinforceResult resumed = reinforce_resumable(w_part, spec, cont, &snap);

        CHECK(w_part.digest() == w_full.digest());
        CHECK(resumed.curves.reward == full.curves.reward);
        CHECK(resumed.curves.holdout == full.curves.holdout);
        std::filesystem::remove_all(dir);
    }
}

TEST_CASE("steering: switch at 0 gives zero gradient; only the last step is gated on") {
    Rng rng(9);
    SteeringSetup setup{ModelWeights(lab_config(16, 1), rng), ModelWeights(lab_config(16, 1), rng),
                        4};
    setup.frozen_planner.set_frozen(true);
    RewardSpec spec;
    ReinforceOptions opt;
    opt.domain = Domain::Arithmetic;
    opt.arithmetic_k = 3;
    opt.max_new = 20;
    opt.seed = 3;
    const monitor::PatternMonitor mon = monitor::PatternMonitor::lab_default();

    SUBCASE("switch at step 0") {
        SteeringSetup s0{setup.optimized, setup.frozen_planner, 0};
        s0.frozen_planner.set_frozen(true);
        Rng err(12);
        EpisodeRecord rec = steering_rollout(s0, spec, opt, mon, err);
        CHECK(rec.segments.empty());  // no optimized tokens, no update signal
        std::vector<double> g = policy_grad(s0.optimized, rec, 1.0);
        for (double v : g) CHECK(v == 0.0);
    }

    SUBCASE("weights gate: zero on all but the last pre-switch step") {
        bool found_multi_step = false;
        for (std::uint64_t seed = 0; seed < 40 && !found_multi_step; ++seed) {
            Rng r(seed);
            EpisodeRecord rec = steering_rollout(setup, spec, opt, mon, r);
            if (rec.segments.empty()) continue;
            const GradSegment& seg = rec.segments[0];
            REQUIRE(seg.weights.size() == seg.targets.size());
            // gated positions form one contiguous suffix block
            std::size_t first_on = seg.weights.size();
            for (std::size_t i = 0; i < seg.weights.size(); ++i) {
                if (seg.weights[i] == 1.0) {
                    first_on = i;
                    break;
                }
            }
            REQUIRE(first_on < seg.weights.size());
            for (std::size_t i = 0; i < seg.weights.size(); ++i) {
                CHECK(seg.weights[i] == (i >= first_on ? 1.0 : 0.0));
            }
            if (first_on > 0) {
                found_multi_step = true;
                // assert on the record: logit-gradient rows of gated-off
                // positions are exactly zero
                numcore::Tape tape;
                numcore::Tensor logits = model::forward_full(setup.optimized, seg.seq, &tape);
                std::vector<double> w2(seg.targets.size(), 0.0);
                for (std::size_t i = 0; i < w2.size(); ++i) w2[i] = seg.weights[i];
                numcore::Tensor loss =
                    numcore::nll_weighted(numcore::gather_rows(logits, seg.rows), seg.targets, w2);
                tape.backward(loss);
                const auto& gl = tape.grad(logits);
                for (std::size_t i = 0; i < first_on; ++i) {
                    const std::size_t row = static_cast<std::size_t>(seg.rows[i]);
                    for (std::size_t j = 0; j < kVocabSize; ++j) {
                        CHECK(gl[row * kVocabSize + j] == 0.0);
                    }
                }
            }
        }
        CHECK(found_multi_step);
    }

    SUBCASE("frozen planner digest constant across training") {
        const std::uint64_t before = setup.frozen_planner.digest();
        ReinforceOptions small = opt;
        small.episodes = 16;
        small.batch_size = 8;
        steering_train(setup, spec, small);
        CHECK(setup.frozen_planner.digest() == before);
    }
}

TEST_CASE("mind+mask: paraphraser frozen, identity config runs") {
    Rng rng(13);
    MindMaskSetup setup{ModelWeights(lab_config(16, 1), rng), ModelWeights(lab_config(16, 1), rng),
                        monitor::Paraphraser::lab_default()};
    RewardSpec spec;
    spec.length_penalty_weight = 0.01;  // return variance so updates are nonzero
    ReinforceOptions opt;
    opt.domain = Domain::Arithmetic;
    opt.arithmetic_k = 2;
    opt.episodes = 16;
    opt.batch_size = 8;
    opt.max_new = 16;
    opt.seed = 21;

    const std::uint64_t para_digest = setup.paraphraser.digest();
    const std::uint64_t mind_before = setup.mind.digest();
    const std::uint64_t mask_before = setup.mask.digest();
    MindMaskResult res = mind_mask_train(setup, spec, opt);
    CHECK(setup.paraphraser.digest() == para_digest);
    CHECK(setup.mind.digest() != mind_before);  // both nets actually trained
    CHECK(setup.mask.digest() != mask_before);
    CHECK(res.curves.size() == 16);

    MindMaskSetup ident{setup.mind, setup.mask, monitor::Paraphraser::identity()};
    MindMaskResult res2 = mind_mask_train(ident, spec, opt);
    CHECK(res2.curves.size() == 16);
}

TEST_CASE("trusted-KV RL: frozen contract and determinism") {
    Rng rng(14);
    ModelWeights trusted(lab_config(16, 1), rng);
    trusted.set_frozen(true);
    ModelWeights untrusted = trusted;
    untrusted.set_frozen(false);

    RewardSpec spec;
    spec.length_penalty_weight = 0.01;
    ReinforceOptions opt;
    opt.domain = Domain::Arithmetic;
    opt.arithmetic_k = 1;
    opt.episodes = 16;
    opt.batch_size = 8;
    opt.max_new = 12;
    opt.seed = 31;

    SUBCASE("0 episodes: untrusted unchanged") {
        ReinforceOptions o = opt;
        o.episodes = 0;
        const std::uint64_t before = untrusted.digest();
        trustedkv::rl_with_trusted_kv(trusted, untrusted, spec, o);
        CHECK(untrusted.digest() == before);
    }

    SUBCASE("trusted digest unchanged after training; untrusted moves") {
        const std::uint64_t tbefore = trusted.digest();
        const std::uint64_t ubefore = untrusted.digest();
        trustedkv::rl_with_trusted_kv(trusted, untrusted, spec, opt);
        CHECK(trusted.digest() == tbefore);
        CHECK(untrusted.digest() != ubefore);
    }

    SUBCASE("unfrozen trusted model is rejected") {
        ModelWeights not_frozen = trusted;
        not_frozen.set_frozen(false);
        CHECK_THROWS_AS(trustedkv::rl_with_trusted_kv(not_frozen, untrusted, spec, opt),
                        FrozenViolationError);
    }
}
