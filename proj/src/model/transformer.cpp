#include "cotlab/model/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "cotlab/model/sampler.hpp"

namespace cotlab::model {

using numcore::Tensor;

// ---- parameter layout ---------------------------------------------------

namespace {

std::string lname(std::size_t l, const char* suffix) {
    return "l" + std::to_string(l) + "." + suffix;
}
std::string hname(std::size_t l, std::size_t h, const char* suffix) {
    return "l" + std::to_string(l) + ".h" + std::to_string(h) + "." + suffix;
}

Tensor gauss_tensor(std::vector<std::size_t> shape, numcore::Rng& rng, double std_dev) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.gauss(0.0, std_dev);
    return t;
}

constexpr double kInitStd = 0.08;

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

ModelWeights::ModelWeights(ModelConfig cfg, numcore::Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t d = cfg_.d_model, dh = cfg_.d_head(), ff = cfg_.d_ff();
    add_param("tok_emb", gauss_tensor({cfg_.vocab_size, d}, rng, kInitStd));
    if (cfg_.learned_pos) {
        add_param("pos_emb", gauss_tensor({cfg_.max_seq_len, d}, rng, kInitStd));
    }
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
        add_param(lname(l, "ln1.g"), Tensor({d}, 1.0));
        add_param(lname(l, "ln1.b"), Tensor({d}, 0.0));
        for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
            add_param(hname(l, h, "wq"), gauss_tensor({d, dh}, rng, kInitStd));
            add_param(hname(l, h, "bq"), Tensor({dh}, 0.0));
            add_param(hname(l, h, "wk"), gauss_tensor({d, dh}, rng, kInitStd));
            add_param(hname(l, h, "bk"), Tensor({dh}, 0.0));
            add_param(hname(l, h, "wv"), gauss_tensor({d, dh}, rng, kInitStd));
            add_param(hname(l, h, "bv"), Tensor({dh}, 0.0));
            add_param(hname(l, h, "wo"), gauss_tensor({dh, d}, rng, kInitStd));
        }
        add_param(lname(l, "bo"), Tensor({d}, 0.0));
        add_param(lname(l, "ln2.g"), Tensor({d}, 1.0));
        add_param(lname(l, "ln2.b"), Tensor({d}, 0.0));
        add_param(lname(l, "mlp.w_in"), gauss_tensor({d, ff}, rng, kInitStd));
        add_param(lname(l, "mlp.b_in"), Tensor({ff}, 0.0));
        add_param(lname(l, "mlp.w_out"), gauss_tensor({ff, d}, rng, kInitStd));
        add_param(lname(l, "mlp.b_out"), Tensor({d}, 0.0));
    }
    add_param("ln_f.g", Tensor({d}, 1.0));
    add_param("ln_f.b", Tensor({d}, 0.0));
    add_param("unemb.w", gauss_tensor({d, cfg_.vocab_size}, rng, kInitStd));
    add_param("unemb.b", Tensor({cfg_.vocab_size}, 0.0));
}

void ModelWeights::add_param(const std::string& name, Tensor t) {
    index_[name] = params_.size();
    params_.push_back({name, std::move(t)});
}

numcore::Tensor& ModelWeights::mutable_param(std::size_t i) {
    if (frozen_) {
        throw FrozenViolationError("attempt to mutate parameters of a frozen model");
    }
    return params_[i].value;
}

std::size_t ModelWeights::index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw IndexError("no parameter named " + name);
    return it->second;
}

std::size_t ModelWeights::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
}

std::vector<double> ModelWeights::flatten() const {
    std::vector<double> flat;
    flat.reserve(scalar_count());
    for (const auto& p : params_) flat.insert(flat.end(), p.value.data.begin(), p.value.data.end());
    return flat;
}

void ModelWeights::unflatten(const std::vector<double>& flat) {
    if (frozen_) throw FrozenViolationError("attempt to overwrite parameters of a frozen model");
    if (flat.size() != scalar_count()) {
        throw ShapeError("unflatten: flat vector has wrong length");
    }
    std::size_t off = 0;
    for (auto& p : params_) {
        std::copy_n(flat.data() + off, p.value.numel(), p.value.data.data());
        off += p.value.numel();
    }
}

std::uint64_t ModelWeights::digest() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& p : params_) {
        h = numcore::fnv1a(p.name, h);
        h = numcore::fnv1a(p.value.data, h);
    }
    return h;
}

void ModelWeights::save(const std::string& path, std::uint64_t config_digest) const {
    numcore::save_checkpoint(path, config_digest, params_);
}

ModelWeights ModelWeights::load(const std::string& path, const ModelConfig& cfg) {
    numcore::Checkpoint ck = numcore::load_checkpoint(path);
    numcore::Rng dummy(0);
    ModelWeights w(cfg, dummy);
    if (ck.params.size() != w.params_.size()) {
        throw CompatibilityError("checkpoint has " + std::to_string(ck.params.size()) +
                                 " parameters, config expects " +
                                 std::to_string(w.params_.size()));
    }
    for (std::size_t i = 0; i < ck.params.size(); ++i) {
        if (ck.params[i].name != w.params_[i].name ||
            ck.params[i].value.shape != w.params_[i].value.shape) {
            throw CompatibilityError("checkpoint parameter " + ck.params[i].name +
                                     " does not match config layout");
        }
        w.params_[i].value = ck.params[i].value;
    }
    return w;
}

// ---- forward passes -----------------------------------------------------

namespace {

struct Idx {
    std::size_t tok_emb, pos_emb = SIZE_MAX;
    struct Head {
        std::size_t wq, bq, wk, bk, wv, bv, wo;
    };
    struct Layer {
        std::size_t ln1g, ln1b, bo, ln2g, ln2b, win, bin, wout, bout;
        std::vector<Head> heads;
    };
    std::vector<Layer> layers;
    std::size_t lnfg, lnfb, unemb_w, unemb_b;
};

Idx layout_of(const ModelWeights& w) {
    const ModelConfig& cfg = w.config();
    Idx ix;
    ix.tok_emb = w.index_of("tok_emb");
    if (cfg.learned_pos) ix.pos_emb = w.index_of("pos_emb");
    ix.layers.resize(cfg.n_layers);
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        auto& L = ix.layers[l];
        L.ln1g = w.index_of(lname(l, "ln1.g"));
        L.ln1b = w.index_of(lname(l, "ln1.b"));
        L.heads.resize(cfg.n_heads);
        for (std::size_t h = 0; h < cfg.n_heads; ++h) {
            auto& H = L.heads[h];
            H.wq = w.index_of(hname(l, h, "wq"));
            H.bq = w.index_of(hname(l, h, "bq"));
            H.wk = w.index_of(hname(l, h, "wk"));
            H.bk = w.index_of(hname(l, h, "bk"));
            H.wv = w.index_of(hname(l, h, "wv"));
            H.bv = w.index_of(hname(l, h, "bv"));
            H.wo = w.index_of(hname(l, h, "wo"));
        }
        L.bo = w.index_of(lname(l, "bo"));
        L.ln2g = w.index_of(lname(l, "ln2.g"));
        L.ln2b = w.index_of(lname(l, "ln2.b"));
        L.win = w.index_of(lname(l, "mlp.w_in"));
        L.bin = w.index_of(lname(l, "mlp.b_in"));
        L.wout = w.index_of(lname(l, "mlp.w_out"));
        L.bout = w.index_of(lname(l, "mlp.b_out"));
    }
    ix.lnfg = w.index_of("ln_f.g");
    ix.lnfb = w.index_of("ln_f.b");
    ix.unemb_w = w.index_of("unemb.w");
    ix.unemb_b = w.index_of("unemb.b");
    return ix;
}

}  // namespace

Tensor forward_full(const ModelWeights& w, std::span<const int> tokens, numcore::Tape* tape) {
    const ModelConfig& cfg = w.config();
    const std::size_t T = tokens.size();
    if (T == 0) throw LengthError("forward_full: empty token sequence");
    if (T > cfg.max_seq_len) {
        throw LengthError("forward_full: sequence length " + std::to_string(T) +
                          " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
    }
    for (int t : tokens) {
        if (t < 0 || static_cast<std::size_t>(t) >= cfg.vocab_size) {
            throw IndexError("forward_full: token id " + std::to_string(t) +
                             " outside vocabulary");
        }
    }

    const Idx ix = layout_of(w);
    std::vector<Tensor> bound;
    if (tape) {
        bound.reserve(w.param_count());
        for (std::size_t i = 0; i < w.param_count(); ++i) bound.push_back(tape->leaf(w.param(i)));
    }
    auto P = [&](std::size_t i) -> const Tensor& { return tape ? bound[i] : w.param(i); };

    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(cfg.d_head()));

    Tensor x = gather_rows(P(ix.tok_emb), tokens);
    if (cfg.learned_pos) {
        std::vector<int> pos_ids(T);
        for (std::size_t t = 0; t < T; ++t) pos_ids[t] = static_cast<int>(t);
        x = add(x, gather_rows(P(ix.pos_emb), pos_ids));
    } else {
        Tensor pos({T, cfg.d_model});
        for (std::size_t t = 0; t < T; ++t) {
            auto row = sinusoid_row(t, cfg.d_model);
            std::copy(row.begin(), row.end(), pos.data.begin() + t * cfg.d_model);
        }
        x = add(x, pos);
    }

    for (const auto& L : ix.layers) {
        Tensor h = layer_norm(x, P(L.ln1g), P(L.ln1b));
        Tensor attn;
        bool first = true;
        for (const auto& H : L.heads) {
            Tensor q = add_row_bias(matmul(h, P(H.wq)), P(H.bq));
            Tensor k = add_row_bias(matmul(h, P(H.wk)), P(H.bk));
            Tensor v = add_row_bias(matmul(h, P(H.wv)), P(H.bv));
            Tensor s = causal_mask_add(mul_scalar(matmul_nt(q, k), inv_sqrt_dh));
            Tensor p = softmax_rows(s);
            Tensor o = matmul(matmul(p, v), P(H.wo));
            attn = first ? std::move(o) : add(attn, o);
            first = false;
        }
        attn = add_row_bias(attn, P(L.bo));
        x = add(x, attn);
        Tensor h2 = layer_norm(x, P(L.ln2g), P(L.ln2b));
        Tensor m = gelu(add_row_bias(matmul(h2, P(L.win)), P(L.bin)));
        m = add_row_bias(matmul(m, P(L.wout)), P(L.bout));
        x = add(x, m);
    }
    Tensor xf = layer_norm(x, P(ix.lnfg), P(ix.lnfb));
    return add_row_bias(matmul(xf, P(ix.unemb_w)), P(ix.unemb_b));
}

namespace {

// Single-row primitives mirroring the recorded ops; same accumulation order.

void matvec(const double* row, const numcore::Tensor& mat, const numcore::Tensor& bias,
            double* out) {
    const std::size_t k = mat.shape[0], n = mat.shape[1];
    for (std::size_t j = 0; j < n; ++j) out[j] = 0.0;
    numcore::mm_nn(row, mat.data.data(), out, 1, k, n);
    for (std::size_t j = 0; j < n; ++j) out[j] += bias.data[j];
}

void ln_row(const double* row, const numcore::Tensor& g, const numcore::Tensor& b,
            std::size_t n, double* out) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + 1e-5);
    for (std::size_t j = 0; j < n; ++j) out[j] = g.data[j] * ((row[j] - mu) * is) + b.data[j];
}

}  // namespace

std::vector<double> forward_incremental(const ModelWeights& w, int token, KVCacheSet& cache) {
    const ModelConfig& cfg = w.config();
    cache.check_compatible(cfg);
    const std::size_t t = cache.length();
    if (t >= cfg.max_seq_len) {
        throw LengthError("forward_incremental: cache already holds max_seq_len positions");
    }
    if (token < 0 || static_cast<std::size_t>(token) >= cfg.vocab_size) {
        throw IndexError("forward_incremental: token id outside vocabulary");
    }

    const Idx ix = layout_of(w);
    const std::size_t d = cfg.d_model, dh = cfg.d_head();
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    std::vector<double> x(d);
    {
        const Tensor& emb = w.param(ix.tok_emb);
        const double* erow = emb.data.data() + static_cast<std::size_t>(token) * d;
        if (cfg.learned_pos) {
            const Tensor& pos = w.param(ix.pos_emb);
            const double* prow = pos.data.data() + t * d;
            for (std::size_t j = 0; j < d; ++j) x[j] = erow[j] + prow[j];
        } else {
            auto prow = sinusoid_row(t, d);
            for (std::size_t j = 0; j < d; ++j) x[j] = erow[j] + prow[j];
        }
    }

    std::vector<double> h(d), q(dh), krow_new(dh), vrow_new(dh), ctx(dh), head_out(d), attn(d),
        scores;
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const auto& L = ix.layers[l];
        ln_row(x.data(), w.param(L.ln1g), w.param(L.ln1b), d, h.data());
        std::fill(attn.begin(), attn.end(), 0.0);
        for (std::size_t hi = 0; hi < cfg.n_heads; ++hi) {
            const auto& H = L.heads[hi];
            matvec(h.data(), w.param(H.wq), w.param(H.bq), q.data());
            matvec(h.data(), w.param(H.wk), w.param(H.bk), krow_new.data());
            matvec(h.data(), w.param(H.wv), w.param(H.bv), vrow_new.data());
            cache.append_row(l, hi, krow_new.data(), vrow_new.data());

            // scores over positions 0..t, same dot/scale order as the full path
            scores.assign(t + 1, 0.0);
            for (std::size_t s = 0; s <= t; ++s) {
                const double* krow = cache.key_row(l, hi, s);
                const double* qrow = q.data();
                double acc = 0.0;
                for (std::size_t p = 0; p < dh; ++p) acc += qrow[p] * krow[p];
                scores[s] = acc * inv_sqrt_dh;
            }
            double mx = scores[0];
            for (std::size_t s = 1; s <= t; ++s) mx = std::max(mx, scores[s]);
            double sum = 0.0;
            for (std::size_t s = 0; s <= t; ++s) {
                scores[s] = std::exp(scores[s] - mx);
                sum += scores[s];
            }
            const double inv = 1.0 / sum;
            for (std::size_t s = 0; s <= t; ++s) scores[s] *= inv;

            std::fill(ctx.begin(), ctx.end(), 0.0);
            for (std::size_t s = 0; s <= t; ++s) {
                const double p = scores[s];
                const double* vrow = cache.value_row(l, hi, s);
                for (std::size_t j = 0; j < dh; ++j) ctx[j] += p * vrow[j];
            }
            std::fill(head_out.begin(), head_out.end(), 0.0);
            numcore::mm_nn(ctx.data(), w.param(H.wo).data.data(), head_out.data(), 1, dh, d);
            for (std::size_t j = 0; j < d; ++j) attn[j] += head_out[j];
        }
        const Tensor& bo = w.param(L.bo);
        for (std::size_t j = 0; j < d; ++j) x[j] += attn[j] + bo.data[j];

        std::vector<double> h2(d), mid(cfg.d_ff()), mo(d);
        ln_row(x.data(), w.param(L.ln2g), w.param(L.ln2b), d, h2.data());
        matvec(h2.data(), w.param(L.win), w.param(L.bin), mid.data());
        for (double& v : mid) v = 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2));
        matvec(mid.data(), w.param(L.wout), w.param(L.bout), mo.data());
        for (std::size_t j = 0; j < d; ++j) x[j] += mo[j];
    }
    cache.advance();

    std::vector<double> xf(d), logits(cfg.vocab_size);
    ln_row(x.data(), w.param(ix.lnfg), w.param(ix.lnfb), d, xf.data());
    matvec(xf.data(), w.param(ix.unemb_w), w.param(ix.unemb_b), logits.data());
    for (double v : logits) {
        if (!std::isfinite(v)) throw NonFiniteError("forward_incremental: non-finite logit");
    }
    return logits;
}

GenerationTrace generate(const ModelWeights& w, std::span<const int> prompt,
                         const GenerateOptions& opt, numcore::Rng& rng) {
    if (prompt.empty()) throw LengthError("generate: prompt must be nonempty");
    const ModelConfig& cfg = w.config();
    if (prompt.size() + opt.max_new > cfg.max_seq_len) {
        throw LengthError("generate: prompt plus generation budget exceeds max_seq_len");
    }

    GenerationTrace trace;
    KVCacheSet cache(cfg);
    std::vector<double> logits;
    for (int tok : prompt) logits = forward_incremental(w, tok, cache);

    std::vector<int> tokens(prompt.begin(), prompt.end());
    for (std::size_t i = 0; i < opt.max_new; ++i) {
        trace.step_rng_counters.push_back(rng.counter());
        const int next = sample(logits, opt.temperature, rng);
        trace.logprobs.push_back(logprob_of(logits, next));
        if (opt.record_logits) trace.logit_snapshots.push_back(logits);
        tokens.push_back(next);
        trace.cache_len.push_back(cache.length());
        const bool stop =
            std::find(opt.stop_tokens.begin(), opt.stop_tokens.end(), next) !=
            opt.stop_tokens.end();
        if (stop || tokens.size() >= cfg.max_seq_len) break;
        logits = forward_incremental(w, next, cache);
    }

    trace.seq = mark_spans(std::move(tokens), prompt.size(), opt.delims);
    trace.validate();
    return trace;
}

TokenSequence mark_spans(std::vector<int> tokens, std::size_t prompt_len, const SpanDelims& d) {
    TokenSequence seq;
    seq.prompt_end = std::min(prompt_len, tokens.size());
    std::size_t ans_start = tokens.size();
    for (std::size_t i = seq.prompt_end; i < tokens.size(); ++i) {
        if (tokens[i] == d.ans_open) {
            ans_start = i;
            break;
        }
    }
    seq.cot_end = ans_start;
    seq.tokens = std::move(tokens);
    seq.validate();
    return seq;
}

std::vector<int> TokenSequence::inner_cot(const SpanDelims& d) const {
    std::vector<int> out;
    for (std::size_t i = prompt_end; i < cot_end; ++i) {
        if (tokens[i] == d.think_open || tokens[i] == d.think_close) continue;
        out.push_back(tokens[i]);
    }
    return out;
}

std::vector<int> TokenSequence::inner_answer(const SpanDelims& d, int eos) const {
    std::vector<int> out;
    for (std::size_t i = cot_end; i < tokens.size(); ++i) {
        if (tokens[i] == d.ans_open || tokens[i] == d.ans_close || tokens[i] == eos) continue;
        out.push_back(tokens[i]);
    }
    return out;
}

}  // namespace cotlab::model
