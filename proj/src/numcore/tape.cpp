#include "cotlab/numcore/tape.hpp"

#include <algorithm>
#include <cmath>

namespace cotlab::numcore {

namespace {

constexpr double kMaskValue = -1e30;

void check_finite(const Tensor& t, const char* op) {
    for (double v : t.data) {
        if (!std::isfinite(v)) {
            throw NonFiniteError(std::string(op) + " produced a non-finite value");
        }
    }
}

// Masked scores legitimately hold -1e30; everything else must be finite.
void check_finite_or_mask(const Tensor& t, const char* op) {
    for (double v : t.data) {
        if (!std::isfinite(v) && v != kMaskValue) {
            throw NonFiniteError(std::string(op) + " produced a non-finite value");
        }
    }
}

Tape* tape_of(const Tensor& a) { return a.tape; }

Tape* tape_of(const Tensor& a, const Tensor& b) {
    if (a.tape && b.tape && a.tape != b.tape) {
        throw StaleRecordError("operands recorded on different computation records");
    }
    return a.tape ? a.tape : b.tape;
}

Tensor finish(Tape* tape, Tensor out, std::function<void(Tape&, int)> backward_fn) {
    if (tape) {
        out.tape = tape;
        out.node = tape->append(out.shape, out.data, std::move(backward_fn));
    }
    return out;
}

void require_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2) {
        throw ShapeError(std::string(op) + ": expected rank-2 tensor, got shape " +
                         shape_str(t.shape));
    }
}

}  // namespace

Tensor Tape::leaf(const Tensor& value) {
    Tensor out = value;
    out.tape = this;
    out.node = append(out.shape, out.data, {});
    return out;
}

int Tape::append(std::vector<std::size_t> shape, std::vector<double> value,
                 std::function<void(Tape&, int)> backward_fn) {
    nodes_.push_back(Node{std::move(shape), std::move(value), {}, std::move(backward_fn)});
    return static_cast<int>(nodes_.size()) - 1;
}

void Tape::backward(const Tensor& loss) {
    if (consumed_) {
        throw StaleRecordError("backward called twice on one computation record");
    }
    if (loss.tape != this || loss.node < 0) {
        throw StaleRecordError("loss tensor was not recorded on this record");
    }
    if (loss.numel() != 1) {
        throw ShapeError("backward requires a scalar loss, got shape " + shape_str(loss.shape));
    }
    consumed_ = true;
    for (Node& n : nodes_) {
        n.grad.assign(n.value.size(), 0.0);
    }
    nodes_[loss.node].grad[0] = 1.0;
    for (int i = loss.node; i >= 0; --i) {
        if (nodes_[i].backward_fn) nodes_[i].backward_fn(*this, i);
    }
    for (const Node& n : nodes_) {
        for (double g : n.grad) {
            if (!std::isfinite(g)) throw NonFiniteError("backward produced a non-finite gradient");
        }
    }
}

const std::vector<double>& Tape::grad(const Tensor& t) const {
    if (t.tape != this || t.node < 0) {
        throw StaleRecordError("tensor was not recorded on this record");
    }
    return nodes_[t.node].grad;
}

// ---- kernels ----------------------------------------------------------

void mm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
           std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void mm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
           std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            c[i * n + j] += acc;
        }
    }
}

namespace {

// c[k,n] += a^T[k,m] * g[m,n], i.e. c[p,j] += sum_i a[i,p] g[i,j].
void mm_tn(const double* a, const double* g, double* c, std::size_t m, std::size_t k,
           std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            double* crow = c + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
        }
    }
}

}  // namespace

// ---- ops --------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    if (a.shape[1] != b.shape[0]) {
        throw ShapeError("matmul: inner dimensions disagree: " + shape_str(a.shape) + " vs " +
                         shape_str(b.shape));
    }
    const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
    Tensor out({m, n});
    mm_nn(a.data.data(), b.data.data(), out.data.data(), m, k, n);
    check_finite(out, "matmul");

    Tape* tape = tape_of(a, b);
    const int an = a.node, bn = b.node;
    std::vector<double> aval = tape && bn >= 0 ? a.data : std::vector<double>{};
    std::vector<double> bval = tape && an >= 0 ? b.data : std::vector<double>{};
    return finish(tape, std::move(out), [an, bn, m, k, n, aval, bval](Tape& t, int self) {
        const auto& go = t.grad_ref(self);
        if (an >= 0) {
            const double* bp = bn >= 0 ? t.value_ref(bn).data() : bval.data();
            mm_nt(go.data(), bp, t.grad_ref(an).data(), m, n, k);
        }
        if (bn >= 0) {
            const double* ap = an >= 0 ? t.value_ref(an).data() : aval.data();
            mm_tn(ap, go.data(), t.grad_ref(bn).data(), m, k, n);
        }
    });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul_nt");
    require_rank2(b, "matmul_nt");
    if (a.shape[1] != b.shape[1]) {
        throw ShapeError("matmul_nt: inner dimensions disagree: " + shape_str(a.shape) + " vs " +
                         shape_str(b.shape));
    }
    const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[0];
    Tensor out({m, n});
    mm_nt(a.data.data(), b.data.data(), out.data.data(), m, k, n);
    check_finite(out, "matmul_nt");

    Tape* tape = tape_of(a, b);
    const int an = a.node, bn = b.node;
    std::vector<double> aval = tape && bn >= 0 ? a.data : std::vector<double>{};
    std::vector<double> bval = tape && an >= 0 ? b.data : std::vector<double>{};
    return finish(tape, std::move(out), [an, bn, m, k, n, aval, bval](Tape& t, int self) {
        const auto& go = t.grad_ref(self);  // [m,n]
        if (an >= 0) {
            const double* bp = bn >= 0 ? t.value_ref(bn).data() : bval.data();
            mm_nn(go.data(), bp, t.grad_ref(an).data(), m, n, k);
        }
        if (bn >= 0) {
            const double* ap = an >= 0 ? t.value_ref(an).data() : aval.data();
            // db[j,p] += sum_i go[i,j] * a[i,p]
            double* db = t.grad_ref(bn).data();
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    const double g = go[i * n + j];
                    const double* arow = ap + i * k;
                    double* brow = db + j * k;
                    for (std::size_t p = 0; p < k; ++p) brow[p] += g * arow[p];
                }
            }
        }
    });
}

namespace {

Tensor binary_elementwise(const Tensor& a, const Tensor& b, double sb, const char* name) {
    if (a.shape != b.shape) {
        throw ShapeError(std::string(name) + ": shape mismatch: " + shape_str(a.shape) + " vs " +
                         shape_str(b.shape));
    }
    Tensor out = a;
    out.tape = nullptr;
    out.node = -1;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += sb * b.data[i];
    check_finite_or_mask(out, name);
    Tape* tape = tape_of(a, b);
    const int an = a.node, bn = b.node;
    return finish(tape, std::move(out), [an, bn, sb](Tape& t, int self) {
        const auto& go = t.grad_ref(self);
        if (an >= 0) {
            auto& ga = t.grad_ref(an);
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
        }
        if (bn >= 0) {
            auto& gb = t.grad_ref(bn);
            for (std::size_t i = 0; i < go.size(); ++i) gb[i] += sb * go[i];
        }
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_elementwise(a, b, 1.0, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_elementwise(a, b, -1.0, "sub"); }

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape) {
        throw ShapeError("mul: shape mismatch: " + shape_str(a.shape) + " vs " +
                         shape_str(b.shape));
    }
    Tensor out = a;
    out.tape = nullptr;
    out.node = -1;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
    check_finite(out, "mul");
    Tape* tape = tape_of(a, b);
    const int an = a.node, bn = b.node;
    std::vector<double> aval = a.data, bval = b.data;
    return finish(tape, std::move(out), [an, bn, aval, bval](Tape& t, int self) {
        const auto& go = t.grad_ref(self);
        if (an >= 0) {
            auto& ga = t.grad_ref(an);
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * bval[i];
        }
        if (bn >= 0) {
            auto& gb = t.grad_ref(bn);
            for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * aval[i];
        }
    });
}

Tensor mul_scalar(const Tensor& a, double c) {
    Tensor out = a;
    out.tape = nullptr;
    out.node = -1;
    for (double& v : out.data) v *= c;
    check_finite(out, "mul_scalar");
    Tape* tape = tape_of(a);
    const int an = a.node;
    return finish(tape, std::move(out), [an, c](Tape& t, int self) {
        if (an < 0) return;
        const auto& go = t.grad_ref(self);
        auto& ga = t.grad_ref(an);
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += c * go[i];
    });
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
    require_rank2(x, "add_row_bias");
    if (bias.numel() != x.shape[1]) {
        throw ShapeError("add_row_bias: bias length " + std::to_string(bias.numel()) +
                         " vs row width " + std::to_string(x.shape[1]));
    }
    const std::size_t m = x.shape[0], n = x.shape[1];
    Tensor out = x;
    out.tape = nullptr;
    out.node = -1;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] += bias.data[j];
    check_finite(out, "add_row_bias");
    Tape* tape = tape_of(x, bias);
    const int xn = x.node, bn = bias.node;
    return finish(tape, std::move(out), [xn, bn, m, n](Tape& t, int self) {
        const auto& go = t.grad_ref(self);
        if (xn >= 0) {
            auto& gx = t.grad_ref(xn);
            for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
        }
        if (bn >= 0) {
            auto& gb = t.grad_ref(bn);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) gb[j] += go[i * n + j];
        }
    });
}

Tensor gelu(const Tensor& x) {
    Tensor out = x;
    out.tape = nullptr;
    out.node = -1;
    for (double& v : out.data) v = 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2));
    check_finite(out, "gelu");
    Tape* tape = tape_of(x);
    const int xn = x.node;
    std::vector<double> xval = x.data;
    return finish(tape, std::move(out), [xn, xval](Tape& t, int self) {
        if (xn < 0) return;
        const auto& go = t.grad_ref(self);
        auto& gx = t.grad_ref(xn);
        constexpr double inv_sqrt_2pi = 0.3989422804014327;
        for (std::size_t i = 0; i < go.size(); ++i) {
            const double v = xval[i];
            const double cdf = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
            const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
            gx[i] += go[i] * (cdf + v * pdf);
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    require_rank2(x, "layer_norm");
    const std::size_t m = x.shape[0], n = x.shape[1];
    if (gain.numel() != n || bias.numel() != n) {
        throw ShapeError("layer_norm: gain/bias length must equal row width " +
                         std::to_string(n));
    }
    Tensor out({m, n});
    std::vector<double> xhat(m * n), inv_std(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = x.data.data() + i * n;
        double mu = 0.0;
        for (std::size_t j = 0; j < n; ++j) mu += row[j];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<double>(n);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[i] = is;
        for (std::size_t j = 0; j < n; ++j) {
            const double h = (row[j] - mu) * is;
            xhat[i * n + j] = h;
            out.data[i * n + j] = gain.data[j] * h + bias.data[j];
        }
    }
    check_finite(out, "layer_norm");
    Tape* tape = tape_of(x, gain);
    if (!tape) tape = tape_of(bias);
    const int xn = x.node, gn = gain.node, bn = bias.node;
    std::vector<double> gval = gain.data;
    return finish(tape, std::move(out),
                  [xn, gn, bn, m, n, xhat, inv_std, gval](Tape& t, int self) {
        const auto& go = t.grad_ref(self);
        for (std::size_t i = 0; i < m; ++i) {
            const double* grow = go.data() + i * n;
            const double* hrow = xhat.data() + i * n;
            if (gn >= 0) {
                auto& gg = t.grad_ref(gn);
                for (std::size_t j = 0; j < n; ++j) gg[j] += grow[j] * hrow[j];
            }
            if (bn >= 0) {
                auto& gb = t.grad_ref(bn);
                for (std::size_t j = 0; j < n; ++j) gb[j] += grow[j];
            }
            if (xn >= 0) {
                auto& gx = t.grad_ref(xn);
                // dxhat = go * gain; dx = (dxhat - mean(dxhat) - xhat*mean(dxhat*xhat)) * inv_std
                double s1 = 0.0, s2 = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    const double dh = grow[j] * gval[j];
                    s1 += dh;
                    s2 += dh * hrow[j];
                }
                s1 /= static_cast<double>(n);
                s2 /= static_cast<double>(n);
                for (std::size_t j = 0; j < n; ++j) {
                    const double dh = grow[j] * gval[j];
                    gx[i * n + j] += (dh - s1 - hrow[j] * s2) * inv_std[i];
                }
            }
        }
    });
}

Tensor softmax_rows(const Tensor& x) {
    require_rank2(x, "softmax_rows");
    const std::size_t m = x.shape[0], n = x.shape[1];
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = x.data.data() + i * n;
        double mx = row[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double e = std::exp(row[j] - mx);
            out.data[i * n + j] = e;
            sum += e;
        }
        const double inv = 1.0 / sum;
        for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] *= inv;
    }
    check_finite(out, "softmax_rows");
    Tape* tape = tape_of(x);
    const int xn = x.node;
    return finish(tape, std::move(out), [xn, m, n](Tape& t, int self) {
        if (xn < 0) return;
        const auto& go = t.grad_ref(self);
        const auto& p = t.value_ref(self);
        auto& gx = t.grad_ref(xn);
        for (std::size_t i = 0; i < m; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += go[i * n + j] * p[i * n + j];
            for (std::size_t j = 0; j < n; ++j)
                gx[i * n + j] += p[i * n + j] * (go[i * n + j] - dot);
        }
    });
}

namespace {

Tensor nll_impl(const Tensor& logits, std::span<const int> targets,
                std::span<const double> weights) {
    require_rank2(logits, "cross_entropy");
    const std::size_t m = logits.shape[0], v = logits.shape[1];
    if (targets.size() != m) {
        throw ShapeError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(m) + " rows");
    }
    for (int tid : targets) {
        if (tid < 0 || static_cast<std::size_t>(tid) >= v) {
            throw IndexError("cross_entropy: target " + std::to_string(tid) +
                             " outside vocabulary of size " + std::to_string(v));
        }
    }
    double total = 0.0;
    std::vector<double> logz(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = logits.data.data() + i * v;
        double mx = row[0];
        for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < v; ++j) sum += std::exp(row[j] - mx);
        logz[i] = mx + std::log(sum);
        total += weights[i] * (logz[i] - row[targets[i]]);
    }
    Tensor out = Tensor::scalar(total);
    check_finite(out, "cross_entropy");
    Tape* tape = tape_of(logits);
    const int xn = logits.node;
    std::vector<int> tgt(targets.begin(), targets.end());
    std::vector<double> w(weights.begin(), weights.end());
    std::vector<double> lval = logits.data;
    return finish(tape, std::move(out), [xn, m, v, tgt, w, lval, logz](Tape& t, int self) {
        if (xn < 0) return;
        const double g = t.grad_ref(self)[0];
        auto& gx = t.grad_ref(xn);
        for (std::size_t i = 0; i < m; ++i) {
            const double* row = lval.data() + i * v;
            const double wi = g * w[i];
            if (wi == 0.0) continue;
            for (std::size_t j = 0; j < v; ++j) {
                const double p = std::exp(row[j] - logz[i]);
                gx[i * v + j] += wi * (p - (static_cast<int>(j) == tgt[i] ? 1.0 : 0.0));
            }
        }
    });
}

}  // namespace

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets) {
    const std::size_t m = logits.rank() == 2 ? logits.shape[0] : 0;
    std::vector<double> w(m, m ? 1.0 / static_cast<double>(m) : 0.0);
    return nll_impl(logits, targets, w);
}

Tensor nll_weighted(const Tensor& logits, std::span<const int> targets,
                    std::span<const double> weights) {
    if (weights.size() != targets.size()) {
        throw ShapeError("nll_weighted: weights/targets length mismatch");
    }
    return nll_impl(logits, targets, weights);
}

Tensor gather_rows(const Tensor& x, std::span<const int> indices) {
    require_rank2(x, "gather_rows");
    const std::size_t n = x.shape[1], rows = x.shape[0];
    Tensor out({indices.size(), n});
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const int r = indices[i];
        if (r < 0 || static_cast<std::size_t>(r) >= rows) {
            throw IndexError("gather_rows: index " + std::to_string(r) + " outside " +
                             std::to_string(rows) + " rows");
        }
        std::copy_n(x.data.data() + static_cast<std::size_t>(r) * n, n, out.data.data() + i * n);
    }
    Tape* tape = tape_of(x);
    const int xn = x.node;
    std::vector<int> idx(indices.begin(), indices.end());
    return finish(tape, std::move(out), [xn, n, idx](Tape& t, int self) {
        if (xn < 0) return;
        const auto& go = t.grad_ref(self);
        auto& gx = t.grad_ref(xn);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            double* dst = gx.data() + static_cast<std::size_t>(idx[i]) * n;
            const double* src = go.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
        }
    });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    require_rank2(a, "concat_rows");
    require_rank2(b, "concat_rows");
    if (a.shape[1] != b.shape[1]) {
        throw ShapeError("concat_rows: widths differ: " + shape_str(a.shape) + " vs " +
                         shape_str(b.shape));
    }
    const std::size_t ma = a.shape[0], mb = b.shape[0], n = a.shape[1];
    Tensor out({ma + mb, n});
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<long>(ma * n));
    Tape* tape = tape_of(a, b);
    const int an = a.node, bn = b.node;
    return finish(tape, std::move(out), [an, bn, ma, mb, n](Tape& t, int self) {
        const auto& go = t.grad_ref(self);
        if (an >= 0) {
            auto& ga = t.grad_ref(an);
            for (std::size_t i = 0; i < ma * n; ++i) ga[i] += go[i];
        }
        if (bn >= 0) {
            auto& gb = t.grad_ref(bn);
            for (std::size_t i = 0; i < mb * n; ++i) gb[i] += go[ma * n + i];
        }
    });
}

Tensor causal_mask_add(const Tensor& scores) {
    require_rank2(scores, "causal_mask_add");
    if (scores.shape[0] != scores.shape[1]) {
        throw ShapeError("causal_mask_add: square matrix required, got " +
                         shape_str(scores.shape));
    }
    const std::size_t n = scores.shape[0];
    Tensor out = scores;
    out.tape = nullptr;
    out.node = -1;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) out.data[i * n + j] = kMaskValue;
    Tape* tape = tape_of(scores);
    const int xn = scores.node;
    return finish(tape, std::move(out), [xn, n](Tape& t, int self) {
        if (xn < 0) return;
        const auto& go = t.grad_ref(self);
        auto& gx = t.grad_ref(xn);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j <= i; ++j) gx[i * n + j] += go[i * n + j];
    });
}

Tensor rowwise_dot(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape || a.rank() != 2) {
        throw ShapeError("rowwise_dot: matching rank-2 shapes required");
    }
    const std::size_t m = a.shape[0], n = a.shape[1];
    Tensor out({m});
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += a.data[i * n + j] * b.data[i * n + j];
        out.data[i] = acc;
    }
    check_finite(out, "rowwise_dot");
    Tape* tape = tape_of(a, b);
    const int an = a.node, bn = b.node;
    std::vector<double> aval = a.data, bval = b.data;
    return finish(tape, std::move(out), [an, bn, m, n, aval, bval](Tape& t, int self) {
        const auto& go = t.grad_ref(self);
        for (std::size_t i = 0; i < m; ++i) {
            if (an >= 0) {
                auto& ga = t.grad_ref(an);
                for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += go[i] * bval[i * n + j];
            }
            if (bn >= 0) {
                auto& gb = t.grad_ref(bn);
                for (std::size_t j = 0; j < n; ++j) gb[i * n + j] += go[i] * aval[i * n + j];
            }
        }
    });
}

Tensor replace_diag(const Tensor& x, const Tensor& d) {
    require_rank2(x, "replace_diag");
    const std::size_t n = x.shape[0];
    if (x.shape[1] != n || d.numel() != n) {
        throw ShapeError("replace_diag: square matrix and matching diagonal required");
    }
    Tensor out = x;
    out.tape = nullptr;
    out.node = -1;
    for (std::size_t i = 0; i < n; ++i) out.data[i * n + i] = d.data[i];
    Tape* tape = tape_of(x, d);
    const int xn = x.node, dn = d.node;
    return finish(tape, std::move(out), [xn, dn, n](Tape& t, int self) {
        const auto& go = t.grad_ref(self);
        if (xn >= 0) {
            auto& gx = t.grad_ref(xn);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    if (i != j) gx[i * n + j] += go[i * n + j];
        }
        if (dn >= 0) {
            auto& gd = t.grad_ref(dn);
            for (std::size_t i = 0; i < n; ++i) gd[i] += go[i * n + i];
        }
    });
}

Tensor zero_diag(const Tensor& x) {
    require_rank2(x, "zero_diag");
    const std::size_t n = x.shape[0];
    if (x.shape[1] != n) throw ShapeError("zero_diag: square matrix required");
    Tensor out = x;
    out.tape = nullptr;
    out.node = -1;
    for (std::size_t i = 0; i < n; ++i) out.data[i * n + i] = 0.0;
    Tape* tape = tape_of(x);
    const int xn = x.node;
    return finish(tape, std::move(out), [xn, n](Tape& t, int self) {
        if (xn < 0) return;
        const auto& go = t.grad_ref(self);
        auto& gx = t.grad_ref(xn);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) gx[i * n + j] += go[i * n + j];
    });
}

Tensor take_diag(const Tensor& x) {
    require_rank2(x, "take_diag");
    const std::size_t n = x.shape[0];
    if (x.shape[1] != n) throw ShapeError("take_diag: square matrix required");
    Tensor out({n});
    for (std::size_t i = 0; i < n; ++i) out.data[i] = x.data[i * n + i];
    Tape* tape = tape_of(x);
    const int xn = x.node;
    return finish(tape, std::move(out), [xn, n](Tape& t, int self) {
        if (xn < 0) return;
        const auto& go = t.grad_ref(self);
        auto& gx = t.grad_ref(xn);
        for (std::size_t i = 0; i < n; ++i) gx[i * n + i] += go[i];
    });
}

Tensor scale_rows(const Tensor& x, const Tensor& s) {
    require_rank2(x, "scale_rows");
    const std::size_t m = x.shape[0], n = x.shape[1];
    if (s.numel() != m) throw ShapeError("scale_rows: one scale per row required");
    Tensor out = x;
    out.tape = nullptr;
    out.node = -1;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] *= s.data[i];
    check_finite(out, "scale_rows");
    Tape* tape = tape_of(x, s);
    const int xn = x.node, sn = s.node;
    std::vector<double> xval = x.data, sval = s.data;
    return finish(tape, std::move(out), [xn, sn, m, n, xval, sval](Tape& t, int self) {
        const auto& go = t.grad_ref(self);
        for (std::size_t i = 0; i < m; ++i) {
            if (xn >= 0) {
                auto& gx = t.grad_ref(xn);
                for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += go[i * n + j] * sval[i];
            }
            if (sn >= 0) {
                auto& gs = t.grad_ref(sn);
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) acc += go[i * n + j] * xval[i * n + j];
                gs[i] += acc;
            }
        }
    });
}

Tensor sum_all(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data) acc += v;
    Tensor out = Tensor::scalar(acc);
    check_finite(out, "sum_all");
    Tape* tape = tape_of(x);
    const int xn = x.node;
    return finish(tape, std::move(out), [xn](Tape& t, int self) {
        if (xn < 0) return;
        const double g = t.grad_ref(self)[0];
        for (double& v : t.grad_ref(xn)) v += g;
    });
}

Tensor mean_all(const Tensor& x) {
    return mul_scalar(sum_all(x), 1.0 / static_cast<double>(x.numel()));
}

}  // namespace cotlab::numcore
