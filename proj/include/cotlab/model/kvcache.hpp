#pragma once

#include <cstddef>
#include <vector>

#include "cotlab/errors.hpp"
#include "cotlab/model/config.hpp"

namespace cotlab::model {

// Per-layer, per-head key/value history. Appending position T never touches
// positions < T; rows are stored contiguously so a replayed prefix is
// bit-identical.
class KVCacheSet {
public:
    KVCacheSet() = default;
    explicit KVCacheSet(const ModelConfig& cfg)
        : cfg_(cfg),
          keys_(cfg.n_layers * cfg.n_heads),
          values_(cfg.n_layers * cfg.n_heads) {
        for (auto& k : keys_) k.reserve(cfg.max_seq_len * cfg.d_head());
        for (auto& v : values_) v.reserve(cfg.max_seq_len * cfg.d_head());
    }

    const ModelConfig& config() const { return cfg_; }
    std::size_t length() const { return len_; }

    const double* key_row(std::size_t layer, std::size_t head, std::size_t pos) const {
        return keys_[slot(layer, head)].data() + pos * cfg_.d_head();
    }
    const double* value_row(std::size_t layer, std::size_t head, std::size_t pos) const {
        return values_[slot(layer, head)].data() + pos * cfg_.d_head();
    }
    double* mutable_key_row(std::size_t layer, std::size_t head, std::size_t pos) {
        return keys_[slot(layer, head)].data() + pos * cfg_.d_head();
    }
    double* mutable_value_row(std::size_t layer, std::size_t head, std::size_t pos) {
        return values_[slot(layer, head)].data() + pos * cfg_.d_head();
    }

    // Appends one position's k/v for a single layer+head. advance() commits
    // the position once all layers and heads have appended.
    void append_row(std::size_t layer, std::size_t head, const double* k, const double* v) {
        auto& ks = keys_[slot(layer, head)];
        auto& vs = values_[slot(layer, head)];
        ks.insert(ks.end(), k, k + cfg_.d_head());
        vs.insert(vs.end(), v, v + cfg_.d_head());
    }
    void advance() { ++len_; }

    void check_compatible(const ModelConfig& other) const {
        if (!(cfg_ == other)) {
            throw CompatibilityError("KV cache was built under a different model config");
        }
    }

private:
    ModelConfig cfg_;
    std::size_t len_ = 0;
    std::vector<std::vector<double>> keys_;    // [layer*heads][pos*d_head]
    std::vector<std::vector<double>> values_;

    std::size_t slot(std::size_t layer, std::size_t head) const {
        return layer * cfg_.n_heads + head;
    }
};

}  // namespace cotlab::model
