#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cotlab/numcore/tensor.hpp"

namespace cotlab::numcore {

// Reverse-mode computation record. Ops append nodes in execution order, so
// append order is a valid topological order and backward() is a single
// reverse sweep. A record is single-owner and single-use: after backward()
// it must be rebuilt (calling backward twice throws StaleRecordError).
//
// Ops are free functions on Tensor. A result is recorded iff at least one
// input is recorded; op calls on plain tensors compute the same values with
// no recording, which is what the inference paths use.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Registers a gradient-enabled leaf holding a copy of `value`.
    Tensor leaf(const Tensor& value);

    // Reverse-topological accumulation from a scalar loss on this tape.
    void backward(const Tensor& loss);

    // Gradient buffer of any tensor recorded on this tape (valid after backward).
    const std::vector<double>& grad(const Tensor& t) const;

    std::size_t size() const { return nodes_.size(); }
    bool consumed() const { return consumed_; }

    // Internal to op implementations.
    int append(std::vector<std::size_t> shape, std::vector<double> value,
               std::function<void(Tape&, int)> backward_fn);
    std::vector<double>& grad_ref(int node) { return nodes_[node].grad; }
    const std::vector<double>& value_ref(int node) const { return nodes_[node].value; }
    const std::vector<std::size_t>& shape_ref(int node) const { return nodes_[node].shape; }

private:
    struct Node {
        std::vector<std::size_t> shape;
        std::vector<double> value;
        std::vector<double> grad;
        std::function<void(Tape&, int)> backward_fn;
    };
    std::vector<Node> nodes_;
    bool consumed_ = false;
};

// ---- ops -------------------------------------------------------------

// Standard matrix product, a[m,k] * b[k,n].
Tensor matmul(const Tensor& a, const Tensor& b);
// a[m,k] * b[n,k]^T -> [m,n]; row-vs-row dot products (attention scores).
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor mul_scalar(const Tensor& a, double c);
// x[m,n] + bias[n] broadcast over rows.
Tensor add_row_bias(const Tensor& x, const Tensor& bias);

Tensor gelu(const Tensor& x);
// Per-row normalization with learned gain/bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// Row-wise softmax with max-subtraction; rows sum to 1 within 1e-12.
Tensor softmax_rows(const Tensor& x);

// Mean negative log-likelihood over m positions; targets in [0, V).
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets);
// sum_i weights[i] * nll_i; the building block for masked and advantage-weighted losses.
Tensor nll_weighted(const Tensor& logits, std::span<const int> targets,
                    std::span<const double> weights);

// Differentiable row gather: out[i,:] = x[indices[i],:]. Token embedding is
// gather_rows(embedding_table, ids).
Tensor gather_rows(const Tensor& x, std::span<const int> indices);

// Row-wise concatenation [a; b]; widths must match.
Tensor concat_rows(const Tensor& a, const Tensor& b);

// Adds -1e30 to entries above the diagonal (s > t) of a square score matrix.
Tensor causal_mask_add(const Tensor& scores);

// Structural helpers for attention over an external (constant) cache.
Tensor rowwise_dot(const Tensor& a, const Tensor& b);          // [m,n],[m,n] -> [m]
Tensor replace_diag(const Tensor& x, const Tensor& d);         // square, d[m]
Tensor zero_diag(const Tensor& x);                             // square
Tensor take_diag(const Tensor& x);                             // square -> [m]
Tensor scale_rows(const Tensor& x, const Tensor& s);           // x[m,n], s[m]

Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

// Raw kernels shared by recorded ops and the inference paths. C is
// accumulated in ascending-k order so full and incremental forwards agree
// bit for bit.
void mm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
           std::size_t n);
void mm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
           std::size_t n);

}  // namespace cotlab::numcore
