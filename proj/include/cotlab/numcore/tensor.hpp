#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "cotlab/errors.hpp"

namespace cotlab::numcore {

class Tape;

// Dense row-major double tensor. Rank 0 (empty shape) is a scalar with one
// element. When produced by a recorded op, `tape`/`node` point into the
// active ComputationRecord; plain value tensors leave them unset.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;
    Tape* tape = nullptr;
    int node = -1;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> s, double fill = 0.0)
        : shape(std::move(s)), data(numel_of(shape), fill) {}

    Tensor(std::vector<std::size_t> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != numel_of(shape)) {
            throw ShapeError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape product " + std::to_string(numel_of(shape)));
        }
    }

    static Tensor scalar(double v) {
        Tensor t;
        t.data.assign(1, v);
        return t;
    }

    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return n;
    }

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    bool grad_enabled() const { return tape != nullptr; }

    std::size_t rows() const { return rank() >= 1 ? shape[0] : 1; }
    std::size_t cols() const { return rank() >= 2 ? shape[1] : (rank() == 1 ? shape[0] : 1); }

    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    double value() const {
        if (numel() != 1) throw ShapeError("value() on non-scalar tensor");
        return data[0];
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

}  // namespace cotlab::numcore
