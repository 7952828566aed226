#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cotlab/numcore/adam.hpp"
#include "cotlab/numcore/checkpoint.hpp"
#include "cotlab/numcore/digest.hpp"
#include "cotlab/numcore/rng.hpp"
#include "cotlab/numcore/tape.hpp"
#include "test_util.hpp"

using namespace cotlab;
using namespace cotlab::numcore;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.gauss(0.0, scale);
    return t;
}

}  // namespace

TEST_CASE("matmul identity and hand arithmetic") {
    Tensor i2({2, 2}, {1, 0, 0, 1});
    Tensor out = matmul(i2, i2);
    CHECK(out.data == std::vector<double>{1, 0, 0, 1});

    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 1}, {0, 1});
    Tensor c = matmul(a, b);
    CHECK(c.data == std::vector<double>{2, 4});
}

TEST_CASE("matmul shape error names both shapes") {
    Tensor a({2, 3});
    Tensor b({2, 3});
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2,3]"), ShapeError);
}

TEST_CASE("matmul gradient of sum equals ones * b^T and matches finite differences") {
    Rng rng(42);
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4, 2}, rng);

    Tape tape;
    Tensor al = tape.leaf(a);
    Tensor loss = sum_all(matmul(al, b));
    tape.backward(loss);
    const auto& ga = tape.grad(al);

    // d(sum)/da = ones[3,2] * b^T
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t p = 0; p < 4; ++p) {
            double expect = 0.0;
            for (std::size_t j = 0; j < 2; ++j) expect += b.at(p, j);
            CHECK(ga[i * 4 + p] == doctest::Approx(expect).epsilon(1e-12));
        }
    }

    auto eval = [&](const std::vector<double>& flat) {
        Tensor av({3, 4}, flat);
        return sum_all(matmul(av, b)).value();
    };
    CHECK(testutil::gradcheck(eval, a.data, ga) < 1e-4);
}

TEST_CASE("softmax_rows examples") {
    Tensor x({1, 2}, {0, 0});
    Tensor y = softmax_rows(x);
    CHECK(y.data[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(y.data[1] == doctest::Approx(0.5).epsilon(1e-15));

    Tensor big({1, 2}, {1000, 0});
    Tensor yb = softmax_rows(big);
    CHECK(yb.data[0] == doctest::Approx(1.0));
    CHECK(yb.data[1] == doctest::Approx(0.0));
    CHECK(std::isfinite(yb.data[0]));

    Rng rng(7);
    Tensor r = random_tensor({1, 6}, rng, 2.0);
    Tensor shifted = r;
    for (double& v : shifted.data) v += 17.25;
    Tensor y1 = softmax_rows(r), y2 = softmax_rows(shifted);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(y1.data[i] == doctest::Approx(y2.data[i]).epsilon(1e-12));
    }
}

TEST_CASE("softmax rows sum to one and lie in (0,1) for moderate inputs") {
    Rng rng(11);
    for (int it = 0; it < 20; ++it) {
        const std::size_t m = 1 + rng.below(4), n = 2 + rng.below(7);
        Tensor x = random_tensor({m, n}, rng, 5.0);
        Tensor y = softmax_rows(x);
        for (std::size_t i = 0; i < m; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                sum += y.at(i, j);
                CHECK(y.at(i, j) > 0.0);
                CHECK(y.at(i, j) < 1.0);
            }
            CHECK(std::fabs(sum - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("cross_entropy on uniform, saturated and random logits") {
    Tensor uniform({1, 4}, {0.3, 0.3, 0.3, 0.3});
    std::vector<int> t0 = {2};
    CHECK(cross_entropy(uniform, t0).value() == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    Tensor onehot({1, 4}, {0, 0, 20, 0});
    CHECK(cross_entropy(onehot, t0).value() < 1e-8);

    Rng rng(3);
    Tensor logits = random_tensor({3, 5}, rng, 2.0);
    std::vector<int> targets = {1, 4, 0};
    // independent scalar oracle: mean of (logsumexp(row) - row[target])
    double expect = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        double mx = logits.at(i, 0);
        for (std::size_t j = 1; j < 5; ++j) mx = std::max(mx, logits.at(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < 5; ++j) sum += std::exp(logits.at(i, j) - mx);
        expect += mx + std::log(sum) - logits.at(i, static_cast<std::size_t>(targets[i]));
    }
    expect /= 3.0;
    CHECK(cross_entropy(logits, targets).value() == doctest::Approx(expect).epsilon(1e-12));

    std::vector<int> bad = {1, 9, 0};
    CHECK_THROWS_AS(cross_entropy(logits, bad), IndexError);
}

TEST_CASE("backward basics and stale record error") {
    {
        Tape tape;
        Tensor x = tape.leaf(Tensor::scalar(1.0));
        Tensor loss = sum_all(x);
        tape.backward(loss);
        CHECK(tape.grad(x)[0] == 1.0);
    }
    {
        Tape tape;
        Tensor x = tape.leaf(Tensor::scalar(3.0));
        Tensor loss = sum_all(mul_scalar(x, 0.0));
        tape.backward(loss);
        CHECK(tape.grad(x)[0] == 0.0);
    }
    {
        Tape tape;
        Tensor x = tape.leaf(Tensor::scalar(1.0));
        Tensor loss = sum_all(x);
        tape.backward(loss);
        CHECK_THROWS_AS(tape.backward(loss), StaleRecordError);
    }
}

TEST_CASE("gradient check over compositions of public ops") {
    Rng rng(100);
    for (int it = 0; it < 8; ++it) {
        const std::size_t m = 2 + rng.below(3);
        const std::size_t n = 2 + rng.below(3);
        Tensor x0 = random_tensor({m, n}, rng);
        Tensor w0 = random_tensor({n, n}, rng);
        Tensor g0 = random_tensor({n}, rng, 0.3);
        for (double& v : g0.data) v += 1.0;
        Tensor b0 = random_tensor({n}, rng, 0.3);
        std::vector<int> idx = {0, static_cast<int>(m - 1)};

        auto build = [&](const Tensor& x, const Tensor& w, const Tensor& g, const Tensor& b,
                         Tape* tape) {
            Tensor xx = x, ww = w, gg = g, bb = b;
            if (tape) {
                xx = tape->leaf(x);
                ww = tape->leaf(w);
                gg = tape->leaf(g);
                bb = tape->leaf(b);
            }
            Tensor h = layer_norm(xx, gg, bb);
            h = gelu(matmul(h, ww));
            h = add_row_bias(h, bb);
            Tensor sm = softmax_rows(h);
            Tensor picked = gather_rows(sm, idx);
            Tensor d = rowwise_dot(picked, picked);
            Tensor sq = matmul_nt(picked, picked);
            Tensor z = scale_rows(zero_diag(replace_diag(sq, d)), take_diag(sq));
            return mean_all(add(sum_all(z), mean_all(mul(sm, sm))));
        };

        Tape tape;
        Tensor loss = build(x0, w0, g0, b0, &tape);
        tape.backward(loss);

        // check each input block separately against central differences
        struct Block {
            Tensor* t;
            int which;
        };
        Tensor xl = x0, wl = w0, gl = g0, bl = b0;
        // recover leaf handles: rebuild to fetch leaves is awkward; instead
        // re-run with leaves captured
        Tape tape2;
        Tensor xx = tape2.leaf(x0), ww = tape2.leaf(w0), gg = tape2.leaf(g0), bb = tape2.leaf(b0);
        Tensor h = layer_norm(xx, gg, bb);
        h = gelu(matmul(h, ww));
        h = add_row_bias(h, bb);
        Tensor sm = softmax_rows(h);
        Tensor picked = gather_rows(sm, idx);
        Tensor d = rowwise_dot(picked, picked);
        Tensor sq = matmul_nt(picked, picked);
        Tensor z = scale_rows(zero_diag(replace_diag(sq, d)), take_diag(sq));
        Tensor loss2 = mean_all(add(sum_all(z), mean_all(mul(sm, sm))));
        tape2.backward(loss2);

        auto eval_x = [&](const std::vector<double>& flat) {
            Tensor xv({m, n}, flat);
            return build(xv, w0, g0, b0, nullptr).value();
        };
        auto eval_w = [&](const std::vector<double>& flat) {
            Tensor wv({n, n}, flat);
            return build(x0, wv, g0, b0, nullptr).value();
        };
        CHECK(testutil::gradcheck(eval_x, x0.data, tape2.grad(xx)) < 1e-4);
        CHECK(testutil::gradcheck(eval_w, w0.data, tape2.grad(ww)) < 1e-4);
    }
}

TEST_CASE("adam zero gradient leaves params fixed, first step is about lr") {
    AdamConfig cfg;
    cfg.lr = 0.1;
    {
        std::vector<double> p = {1.0, -2.0};
        std::vector<double> g = {0.0, 0.0};
        AdamState st;
        adam_step(p, g, st, cfg);
        CHECK(p[0] == 1.0);
        CHECK(p[1] == -2.0);
    }
    {
        std::vector<double> p = {0.0};
        std::vector<double> g = {0.37};
        AdamState st;
        adam_step(p, g, st, cfg);
        CHECK(std::fabs(p[0]) == doctest::Approx(cfg.lr).epsilon(1e-6));
    }
    {
        std::vector<double> p = {1.0};
        std::vector<double> g = {1.0};
        AdamState st;
        adam_step(p, g, st, cfg);
        std::vector<double> zero = {0.0};
        for (int i = 0; i < 50; ++i) adam_step(p, zero, st, cfg);
        CHECK(std::fabs(st.m[0]) < 0.01);  // moments decay toward zero
    }
}

TEST_CASE("adam drives x^2 toward zero; scalar recurrence oracle") {
    AdamConfig cfg;
    cfg.lr = 0.1;
    // oracle: run the recurrence on plain doubles with grad 2x
    double ox = 1.0;
    AdamState ost;
    for (int i = 0; i < 100; ++i) {
        std::vector<double> p = {ox}, g = {2.0 * ox};
        adam_step(p, g, ost, cfg);
        ox = p[0];
    }
    CHECK(std::fabs(ox) < 0.05);

    // same loop driven through the tape
    double x = 1.0;
    AdamState st;
    for (int i = 0; i < 100; ++i) {
        Tape tape;
        Tensor xl = tape.leaf(Tensor::scalar(x));
        Tensor loss = sum_all(mul(xl, xl));
        tape.backward(loss);
        std::vector<double> p = {x};
        adam_step(p, tape.grad(xl), st, cfg);
        x = p[0];
    }
    CHECK(x == ox);  // deterministic and identical to the oracle recurrence
}

TEST_CASE("rng determinism and derived streams") {
    Rng a(123), b(123), c(124);
    for (int i = 0; i < 100; ++i) {
        const std::uint64_t x = a.next_u64();
        CHECK(x == b.next_u64());
    }
    CHECK(a.next_u64() != c.next_u64());

    Rng s1 = Rng::derive(99, 1), s2 = Rng::derive(99, 2);
    CHECK(s1.next_u64() != s2.next_u64());
    Rng s1b = Rng::derive(99, 1);
    CHECK(Rng::derive(99, 1).next_u64() == s1b.next_u64());
}

TEST_CASE("checkpoint round-trip is bit exact") {
    Rng rng(5);
    std::vector<NamedTensor> params;
    params.push_back({"alpha", random_tensor({3, 4}, rng)});
    params.push_back({"beta", random_tensor({7}, rng)});
    params[0].value.data[0] = 0.1 + 0.2;  // a value with a non-terminating binary fraction

    const std::string path = std::filesystem::temp_directory_path() / "cotlab_ck_test.bin";
    save_checkpoint(path, 0xabcdef1234567890ull, params);
    Checkpoint ck = load_checkpoint(path);
    REQUIRE(ck.params.size() == 2);
    CHECK(ck.config_digest == 0xabcdef1234567890ull);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(ck.params[i].name == params[i].name);
        CHECK(ck.params[i].value.shape == params[i].value.shape);
        CHECK(ck.params[i].value.data == params[i].value.data);
    }
    std::filesystem::remove(path);
}
