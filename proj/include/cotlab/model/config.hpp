#pragma once

#include <cstddef>
#include <string>

#include "cotlab/errors.hpp"

namespace cotlab::model {

// Architecture description. Two models are cache-compatible iff their
// configs compare equal.
struct ModelConfig {
    std::size_t n_layers = 2;
    std::size_t n_heads = 4;
    std::size_t d_model = 32;
    std::size_t vocab_size = 0;
    std::size_t max_seq_len = 64;
    bool learned_pos = true;  // false selects a fixed sinusoidal table

    std::size_t d_head() const { return d_model / n_heads; }
    std::size_t d_ff() const { return 4 * d_model; }

    void validate() const {
        if (n_layers == 0 || n_heads == 0 || d_model == 0 || vocab_size == 0 ||
            max_seq_len == 0) {
            throw ConfigError("model config: all dimensions must be positive");
        }
        if (d_model % n_heads != 0) {
            throw ConfigError("model config: d_model " + std::to_string(d_model) +
                              " not divisible by n_heads " + std::to_string(n_heads));
        }
    }

    bool operator==(const ModelConfig&) const = default;
};

}  // namespace cotlab::model
