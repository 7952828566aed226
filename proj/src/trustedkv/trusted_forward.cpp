#include "cotlab/trustedkv/trusted_forward.hpp"

#include <cmath>

namespace cotlab::trustedkv {

using model::KVCacheSet;
using model::ModelConfig;
using model::ModelWeights;
using numcore::Tensor;

namespace {

void ln_row(const double* row, const Tensor& g, const Tensor& b, std::size_t n, double* out) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + 1e-5);
    for (std::size_t j = 0; j < n; ++j) out[j] = g.data[j] * ((row[j] - mu) * is) + b.data[j];
}

void matvec(const double* row, const Tensor& mat, const Tensor& bias, double* out) {
    const std::size_t k = mat.shape[0], n = mat.shape[1];
    for (std::size_t j = 0; j < n; ++j) out[j] = 0.0;
    numcore::mm_nn(row, mat.data.data(), out, 1, k, n);
    for (std::size_t j = 0; j < n; ++j) out[j] += bias.data[j];
}

std::vector<double> sinusoid_row(std::size_t pos, std::size_t d) {
    std::vector<double> row(d);
    for (std::size_t i = 0; i < d; i += 2) {
        const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
        row[i] = std::sin(static_cast<double>(pos) * freq);
        if (i + 1 < d) row[i + 1] = std::cos(static_cast<double>(pos) * freq);
    }
    return row;
}

}  // namespace

std::vector<double> forward_over_external(const ModelWeights& u, int token, const KVCacheSet& ext,
                                          std::size_t pos, CurrentKvPolicy policy,
                                          KVCacheSet* own_shadow) {
    const ModelConfig& cfg = u.config();
    ext.check_compatible(cfg);
    if (ext.length() < pos + 1) {
        throw IndexError("forward_over_external: external cache does not cover this position");
    }
    if (token < 0 || static_cast<std::size_t>(token) >= cfg.vocab_size) {
        throw IndexError("forward_over_external: token id outside vocabulary");
    }
    const std::size_t d = cfg.d_model, dh = cfg.d_head();
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    std::vector<double> x(d);
    {
        const Tensor& emb = u.param("tok_emb");
        const double* erow = emb.data.data() + static_cast<std::size_t>(token) * d;
        if (cfg.learned_pos) {
            const double* prow = u.param("pos_emb").data.data() + pos * d;
            for (std::size_t j = 0; j < d; ++j) x[j] = erow[j] + prow[j];
        } else {
            auto prow = sinusoid_row(pos, d);
            for (std::size_t j = 0; j < d; ++j) x[j] = erow[j] + prow[j];
        }
    }

    std::vector<double> h(d), q(dh), kown(dh), vown(dh), ctx(dh), head_out(d), attn(d), scores;
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const std::string lp = "l" + std::to_string(l) + ".";
        ln_row(x.data(), u.param(lp + "ln1.g"), u.param(lp + "ln1.b"), d, h.data());
        std::fill(attn.begin(), attn.end(), 0.0);
        for (std::size_t hi = 0; hi < cfg.n_heads; ++hi) {
            const std::string hp = lp + "h" + std::to_string(hi) + ".";
            matvec(h.data(), u.param(hp + "wq"), u.param(hp + "bq"), q.data());
            matvec(h.data(), u.param(hp + "wk"), u.param(hp + "bk"), kown.data());
            matvec(h.data(), u.param(hp + "wv"), u.param(hp + "bv"), vown.data());
            if (own_shadow) own_shadow->append_row(l, hi, kown.data(), vown.data());

            scores.assign(pos + 1, 0.0);
            for (std::size_t s = 0; s <= pos; ++s) {
                const double* krow = (s == pos && policy == CurrentKvPolicy::OwnCurrent)
                                         ? kown.data()
                                         : ext.key_row(l, hi, s);
                double acc = 0.0;
                for (std::size_t p = 0; p < dh; ++p) acc += q[p] * krow[p];
                scores[s] = acc * inv_sqrt_dh;
            }
            double mx = scores[0];
            for (std::size_t s = 1; s <= pos; ++s) mx = std::max(mx, scores[s]);
            double sum = 0.0;
            for (std::size_t s = 0; s <= pos; ++s) {
                scores[s] = std::exp(scores[s] - mx);
                sum += scores[s];
            }
            const double inv = 1.0 / sum;
            for (std::size_t s = 0; s <= pos; ++s) scores[s] *= inv;

            std::fill(ctx.begin(), ctx.end(), 0.0);
            for (std::size_t s = 0; s <= pos; ++s) {
                const double* vrow = (s == pos && policy == CurrentKvPolicy::OwnCurrent)
                                         ? vown.data()
                                         : ext.value_row(l, hi, s);
                const double p = scores[s];
                for (std::size_t j = 0; j < dh; ++j) ctx[j] += p * vrow[j];
            }
            std::fill(head_out.begin(), head_out.end(), 0.0);
            numcore::mm_nn(ctx.data(), u.param(hp + "wo").data.data(), head_out.data(), 1, dh, d);
            for (std::size_t j = 0; j < d; ++j) attn[j] += head_out[j];
        }
        const Tensor& bo = u.param(lp + "bo");
        for (std::size_t j = 0; j < d; ++j) x[j] += attn[j] + bo.data[j];

        std::vector<double> h2(d), mid(cfg.d_ff()), mo(d);
        ln_row(x.data(), u.param(lp + "ln2.g"), u.param(lp + "ln2.b"), d, h2.data());
        matvec(h2.data(), u.param(lp + "mlp.w_in"), u.param(lp + "mlp.b_in"), mid.data());
        for (double& v : mid) v = 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2));
        matvec(mid.data(), u.param(lp + "mlp.w_out"), u.param(lp + "mlp.b_out"), mo.data());
        for (std::size_t j = 0; j < d; ++j) x[j] += mo[j];
    }
    if (own_shadow) own_shadow->advance();

    std::vector<double> xf(d), logits(cfg.vocab_size);
    ln_row(x.data(), u.param("ln_f.g"), u.param("ln_f.b"), d, xf.data());
    matvec(xf.data(), u.param("unemb.w"), u.param("unemb.b"), logits.data());
    for (double v : logits) {
        if (!std::isfinite(v)) throw NonFiniteError("forward_over_external: non-finite logit");
    }
    return logits;
}

Tensor trusted_forward_full(const ModelWeights& untrusted, const KVCacheSet& trusted_kv,
                            std::span<const int> tokens, CurrentKvPolicy policy,
                            numcore::Tape* tape) {
    const ModelConfig& cfg = untrusted.config();
    trusted_kv.check_compatible(cfg);
    const std::size_t T = tokens.size();
    if (T == 0) throw LengthError("trusted_forward_full: empty token sequence");
    if (trusted_kv.length() < T) {
        throw IndexError("trusted_forward_full: trusted cache shorter than the sequence");
    }
    const std::size_t d = cfg.d_model, dh = cfg.d_head();
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    std::vector<Tensor> bound;
    if (tape) {
        bound.reserve(untrusted.param_count());
        for (std::size_t i = 0; i < untrusted.param_count(); ++i) {
            bound.push_back(tape->leaf(untrusted.param(i)));
        }
    }
    auto P = [&](const std::string& name) -> const Tensor& {
        const std::size_t i = untrusted.index_of(name);
        return tape ? bound[i] : untrusted.param(i);
    };

    Tensor x = gather_rows(P("tok_emb"), tokens);
    if (cfg.learned_pos) {
        std::vector<int> pos_ids(T);
        for (std::size_t t = 0; t < T; ++t) pos_ids[t] = static_cast<int>(t);
        x = add(x, gather_rows(P("pos_emb"), pos_ids));
    } else {
        Tensor pos({T, d});
        for (std::size_t t = 0; t < T; ++t) {
            auto row = sinusoid_row(t, d);
            std::copy(row.begin(), row.end(), pos.data.begin() + t * d);
        }
        x = add(x, pos);
    }

    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const std::string lp = "l" + std::to_string(l) + ".";
        Tensor h = layer_norm(x, P(lp + "ln1.g"), P(lp + "ln1.b"));
        Tensor attn;
        bool first = true;
        for (std::size_t hi = 0; hi < cfg.n_heads; ++hi) {
            const std::string hp = lp + "h" + std::to_string(hi) + ".";
            Tensor q = add_row_bias(matmul(h, P(hp + "wq")), P(hp + "bq"));

            Tensor k_ext({T, dh}), v_ext({T, dh});
            for (std::size_t s = 0; s < T; ++s) {
                std::copy_n(trusted_kv.key_row(l, hi, s), dh, k_ext.data.data() + s * dh);
                std::copy_n(trusted_kv.value_row(l, hi, s), dh, v_ext.data.data() + s * dh);
            }

            Tensor o;
            if (policy == CurrentKvPolicy::TrustedCurrent) {
                Tensor s = causal_mask_add(mul_scalar(matmul_nt(q, k_ext), inv_sqrt_dh));
                Tensor p = softmax_rows(s);
                o = matmul(matmul(p, v_ext), P(hp + "wo"));
            } else {
                Tensor k_own = add_row_bias(matmul(h, P(hp + "wk")), P(hp + "bk"));
                Tensor v_own = add_row_bias(matmul(h, P(hp + "wv")), P(hp + "bv"));
                Tensor s_ext = matmul_nt(q, k_ext);
                Tensor d_own = rowwise_dot(q, k_own);
                Tensor s = causal_mask_add(mul_scalar(replace_diag(s_ext, d_own), inv_sqrt_dh));
                Tensor p = softmax_rows(s);
                Tensor ctx = add(matmul(zero_diag(p), v_ext), scale_rows(v_own, take_diag(p)));
                o = matmul(ctx, P(hp + "wo"));
            }
            attn = first ? std::move(o) : add(attn, o);
            first = false;
        }
        attn = add_row_bias(attn, P(lp + "bo"));
        x = add(x, attn);
        Tensor h2 = layer_norm(x, P(lp + "ln2.g"), P(lp + "ln2.b"));
        Tensor m = gelu(add_row_bias(matmul(h2, P(lp + "mlp.w_in")), P(lp + "mlp.b_in")));
        m = add_row_bias(matmul(m, P(lp + "mlp.w_out")), P(lp + "mlp.b_out"));
        x = add(x, m);
    }
    Tensor xf = layer_norm(x, P("ln_f.g"), P("ln_f.b"));
    return add_row_bias(matmul(xf, P("unemb.w")), P("unemb.b"));
}

KVCacheSet collect_kv(const ModelWeights& weights, std::span<const int> tokens) {
    KVCacheSet cache(weights.config());
    for (int t : tokens) model::forward_incremental(weights, t, cache);
    return cache;
}

KVCacheSet cache_prefix(const KVCacheSet& src, std::size_t prefix_len) {
    if (prefix_len > src.length()) {
        throw IndexError("cache_prefix: prefix longer than the source cache");
    }
    KVCacheSet out(src.config());
    const ModelConfig& cfg = src.config();
    for (std::size_t pos = 0; pos < prefix_len; ++pos) {
        for (std::size_t l = 0; l < cfg.n_layers; ++l) {
            for (std::size_t h = 0; h < cfg.n_heads; ++h) {
                out.append_row(l, h, src.key_row(l, h, pos), src.value_row(l, h, pos));
            }
        }
        out.advance();
    }
    return out;
}

Tensor prefix_forward_full(const ModelWeights& w, const KVCacheSet& ext, std::size_t prefix_len,
                           std::span<const int> tokens, numcore::Tape* tape) {
    const ModelConfig& cfg = w.config();
    ext.check_compatible(cfg);
    const std::size_t T = tokens.size();
    if (T == 0) throw LengthError("prefix_forward_full: empty token sequence");
    if (prefix_len > T || ext.length() < prefix_len) {
        throw IndexError("prefix_forward_full: prefix does not fit the sequence or cache");
    }
    const std::size_t d = cfg.d_model, dh = cfg.d_head();
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    std::vector<Tensor> bound;
    if (tape) {
        bound.reserve(w.param_count());
        for (std::size_t i = 0; i < w.param_count(); ++i) bound.push_back(tape->leaf(w.param(i)));
    }
    auto P = [&](const std::string& name) -> const Tensor& {
        const std::size_t i = w.index_of(name);
        return tape ? bound[i] : w.param(i);
    };

    std::vector<int> own_rows;
    for (std::size_t t = prefix_len; t < T; ++t) own_rows.push_back(static_cast<int>(t));

    Tensor x = gather_rows(P("tok_emb"), tokens);
    if (cfg.learned_pos) {
        std::vector<int> pos_ids(T);
        for (std::size_t t = 0; t < T; ++t) pos_ids[t] = static_cast<int>(t);
        x = add(x, gather_rows(P("pos_emb"), pos_ids));
    } else {
        Tensor pos({T, d});
        for (std::size_t t = 0; t < T; ++t) {
            auto row = sinusoid_row(t, d);
            std::copy(row.begin(), row.end(), pos.data.begin() + t * d);
        }
        x = add(x, pos);
    }

    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const std::string lp = "l" + std::to_string(l) + ".";
        Tensor h = layer_norm(x, P(lp + "ln1.g"), P(lp + "ln1.b"));
        Tensor attn;
        bool first = true;
        for (std::size_t hi = 0; hi < cfg.n_heads; ++hi) {
            const std::string hp = lp + "h" + std::to_string(hi) + ".";
            Tensor q = add_row_bias(matmul(h, P(hp + "wq")), P(hp + "bq"));
            Tensor k_own = add_row_bias(matmul(h, P(hp + "wk")), P(hp + "bk"));
            Tensor v_own = add_row_bias(matmul(h, P(hp + "wv")), P(hp + "bv"));

            Tensor k_mix, v_mix;
            if (prefix_len == 0) {
                k_mix = std::move(k_own);
                v_mix = std::move(v_own);
            } else {
                Tensor k_ext({prefix_len, dh}), v_ext({prefix_len, dh});
                for (std::size_t s = 0; s < prefix_len; ++s) {
                    std::copy_n(ext.key_row(l, hi, s), dh, k_ext.data.data() + s * dh);
                    std::copy_n(ext.value_row(l, hi, s), dh, v_ext.data.data() + s * dh);
                }
                if (own_rows.empty()) {
                    k_mix = std::move(k_ext);
                    v_mix = std::move(v_ext);
                } else {
                    k_mix = concat_rows(k_ext, gather_rows(k_own, own_rows));
                    v_mix = concat_rows(v_ext, gather_rows(v_own, own_rows));
                }
            }
            Tensor s = causal_mask_add(mul_scalar(matmul_nt(q, k_mix), inv_sqrt_dh));
            Tensor p = softmax_rows(s);
            Tensor o = matmul(matmul(p, v_mix), P(hp + "wo"));
            attn = first ? std::move(o) : add(attn, o);
            first = false;
        }
        attn = add_row_bias(attn, P(lp + "bo"));
        x = add(x, attn);
        Tensor h2 = layer_norm(x, P(lp + "ln2.g"), P(lp + "ln2.b"));
        Tensor m = gelu(add_row_bias(matmul(h2, P(lp + "mlp.w_in")), P(lp + "mlp.b_in")));
        m = add_row_bias(matmul(m, P(lp + "mlp.w_out")), P(lp + "mlp.b_out"));
        x = add(x, m);
    }
    Tensor xf = layer_norm(x, P("ln_f.g"), P("ln_f.b"));
    return add_row_bias(matmul(xf, P("unemb.w")), P("unemb.b"));
}

}  // namespace cotlab::trustedkv
