#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "cotlab/model/config.hpp"
#include "cotlab/numcore/checkpoint.hpp"
#include "cotlab/numcore/digest.hpp"
#include "cotlab/numcore/rng.hpp"
#include "cotlab/numcore/tensor.hpp"

namespace cotlab::model {

// All trainable parameters of one decoder, stored as named tensors in a
// fixed order. The frozen flag is enforced by the optimizer wrappers; tests
// additionally compare digests around training calls.
class ModelWeights {
public:
    ModelWeights() = default;
    ModelWeights(ModelConfig cfg, numcore::Rng& rng);

    const ModelConfig& config() const { return cfg_; }

    bool frozen() const { return frozen_; }
    void set_frozen(bool f) { frozen_ = f; }

    std::size_t param_count() const { return params_.size(); }
    const numcore::Tensor& param(std::size_t i) const { return params_[i].value; }
    numcore::Tensor& mutable_param(std::size_t i);
    const std::string& param_name(std::size_t i) const { return params_[i].name; }
    std::size_t index_of(const std::string& name) const;
    const numcore::Tensor& param(const std::string& name) const {
        return params_[index_of(name)].value;
    }

    std::size_t scalar_count() const;

    // Flat views used by the optimizer and snapshots.
    std::vector<double> flatten() const;
    void unflatten(const std::vector<double>& flat);

    std::uint64_t digest() const;

    void save(const std::string& path, std::uint64_t config_digest = 0) const;
    static ModelWeights load(const std::string& path, const ModelConfig& cfg);

private:
    ModelConfig cfg_;
    std::vector<numcore::NamedTensor> params_;
    std::unordered_map<std::string, std::size_t> index_;
    bool frozen_ = false;

    void add_param(const std::string& name, numcore::Tensor t);
};

}  // namespace cotlab::model
