#include <doctest.h>

#include <filesystem>
#include <set>

#include "cotlab/tasks/arithmetic.hpp"
#include "cotlab/tasks/cipher.hpp"
#include "cotlab/tasks/corpus_io.hpp"
#include "cotlab/tasks/divergence.hpp"
#include "cotlab/tasks/gameable.hpp"
#include "cotlab/tasks/lab_vocab.hpp"

using namespace cotlab;
using namespace cotlab::tasks;
using numcore::Rng;

TEST_CASE("arithmetic instances") {
    SUBCASE("k=1 has an empty intermediate chain") {
        TaskInstance inst = make_arithmetic({3, 4});
        CHECK(inst.difficulty_k == 1);
        CHECK(inst.canonical_cot.empty());
        CHECK(inst.answer == std::vector<int>{value_token(7)});
    }

    SUBCASE("k=3 chain evaluated directly") {
        // ((12+34)+56)+78 mod 100: 46; 2; 80
        TaskInstance inst = make_arithmetic({12, 34, 56, 78});
        CHECK(inst.intermediates == std::vector<int>{46, 2, 80});
        CHECK(inst.canonical_cot ==
              std::vector<int>{value_token(46), kSep, value_token(2), kSep, value_token(80)});
        CHECK(inst.answer == std::vector<int>{value_token(80)});
        CHECK(cot_checker(inst.canonical_cot, inst));
    }

    SUBCASE("different seeds give different instance sets") {
        Rng r1(1), r2(2);
        auto a = gen_arithmetic(3, 5, r1);
        auto b = gen_arithmetic(3, 5, r2);
        bool any_diff = false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            any_diff = any_diff || a[i].prompt != b[i].prompt;
        }
        CHECK(any_diff);
    }

    SUBCASE("oracle: every generated instance matches direct evaluation") {
        Rng rng(9);
        for (const auto& inst : gen_arithmetic(4, 50, rng)) {
            int acc = inst.operands[0];
            for (std::size_t i = 1; i < inst.operands.size(); ++i) {
                acc = (acc + inst.operands[i]) % 100;
            }
            CHECK(inst.answer == std::vector<int>{value_token(acc)});
            CHECK(cot_checker(inst.canonical_cot, inst));
        }
    }
}

TEST_CASE("gameable construction soundness") {
    Rng rng(5);
    auto episodes = gen_gameable(40, rng);
    for (const auto& ep : episodes) {
        Score honest = score(ep.honest_answer(), ep.suite);
        CHECK(honest.parse_ok);
        CHECK(honest.provided_acc == 1.0);
        CHECK(honest.holdout_acc == 1.0);

        Score hack = score(ep.lut_answer(), ep.suite);
        CHECK(hack.parse_ok);
        CHECK(hack.provided_acc == 1.0);
        CHECK(hack.holdout_acc < 1.0);

        std::set<int> pin, hin;
        for (const auto& t : ep.suite.provided) pin.insert(t.input);
        for (const auto& t : ep.suite.holdout) hin.insert(t.input);
        CHECK(pin.size() == 3);
        CHECK(hin.size() == 5);
        for (int x : pin) CHECK(hin.count(x) == 0);

        // canonical honest derivation recovers the planted rule semantically
        Score canon = score(ep.instance.answer, ep.suite);
        CHECK(canon.provided_acc == 1.0);
        CHECK(canon.holdout_acc == 1.0);
    }
}

TEST_CASE("score handles empty and unparseable answers") {
    Rng rng(6);
    auto ep = gen_gameable(1, rng)[0];
    Score empty = score({}, ep.suite);
    CHECK(!empty.parse_ok);
    CHECK(empty.provided_acc == 0.0);
    CHECK(empty.holdout_acc == 0.0);

    Score junk = score({kPlus, kSep}, ep.suite);
    CHECK(!junk.parse_ok);
    CHECK(junk.provided_acc == 0.0);
}

TEST_CASE("cipher properties") {
    const CipherSpec a = CipherSpec::cipher_a();
    const CipherSpec b = CipherSpec::cipher_b();
    const CipherSpec id = CipherSpec::identity_cipher();

    Rng rng(7);
    for (int it = 0; it < 50; ++it) {
        std::vector<int> cot;
        const std::size_t len = 1 + rng.below(12);
        for (std::size_t i = 0; i < len; ++i) {
            cot.push_back(static_cast<int>(rng.below(kVocabSize)));
        }
        CHECK(apply_cipher(cot, id, CipherDirection::Encode) == cot);
        CHECK(a.decode(a.encode(cot)) == cot);
        CHECK(b.decode(b.encode(cot)) == cot);
        CHECK(a.encode(b.encode(cot)) == b.encode(a.encode(cot)));  // disjoint subsets commute
    }

    // hack-talk maps to innocuous words
    CHECK(a.encode({kCopy, kProvided, kMatch}) == std::vector<int>{kCalm, kTidy, kNeat});
    CHECK(a.digest() != b.digest());
}

TEST_CASE("divergence series and flag") {
    SUBCASE("identical curves") {
        std::vector<double> p(60, 0.7), h(60, 0.7);
        auto res = divergence(p, h, 10, 0.2);
        CHECK(!res.flag_index.has_value());
        for (double v : res.series) CHECK(v == 0.0);
    }

    SUBCASE("plateau gap flags at tau 0.2") {
        std::vector<double> p, h;
        for (int i = 0; i < 100; ++i) {
            p.push_back(i < 30 ? 0.4 : 1.0);
            h.push_back(i < 30 ? 0.4 : 0.2);
        }
        auto res = divergence(p, h, 10, 0.2);
        REQUIRE(res.flag_index.has_value());
        CHECK(res.series.back() == doctest::Approx(0.8));

        // recompute windowed means directly
        std::size_t expect = 0;
        bool found = false;
        for (std::size_t i = 0; i + 10 <= p.size() && !found; ++i) {
            double mean = 0.0;
            for (std::size_t j = i; j < i + 10; ++j) mean += p[j] - h[j];
            mean /= 10.0;
            if (mean > 0.2) {
                expect = i;
                found = true;
            }
        }
        CHECK(*res.flag_index == expect);
    }

    SUBCASE("length mismatch raises shape error") {
        std::vector<double> p(10, 1.0), h(9, 1.0);
        CHECK_THROWS_AS(divergence(p, h, 5, 0.2), ShapeError);
    }
}

TEST_CASE("corpus JSONL round trip") {
    Rng rng(8);
    auto insts = gen_arithmetic(3, 5, rng);
    const std::string path = std::filesystem::temp_directory_path() / "cotlab_corpus.jsonl";
    save_corpus(path, insts);
    auto loaded = load_corpus(path);
    REQUIRE(loaded.size() == insts.size());
    for (std::size_t i = 0; i < insts.size(); ++i) {
        CHECK(loaded[i].prompt == insts[i].prompt);
        CHECK(loaded[i].canonical_cot == insts[i].canonical_cot);
        CHECK(loaded[i].answer == insts[i].answer);
        CHECK(loaded[i].domain == insts[i].domain);
    }

    auto eps = gen_gameable(3, rng);
    const std::string gpath = std::filesystem::temp_directory_path() / "cotlab_gameable.jsonl";
    save_gameable_corpus(gpath, eps);
    auto geps = load_gameable_corpus(gpath);
    REQUIRE(geps.size() == 3);
    CHECK(geps[0].suite.provided.size() == 3);
    CHECK(geps[0].a == eps[0].a);
    std::filesystem::remove(path);
    std::filesystem::remove(gpath);
}
