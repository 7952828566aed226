#pragma once

#include <string>
#include <vector>

#include "cotlab/errors.hpp"

namespace cotlab::train {

// Weighted episode return. With output_only set, the monitor and length
// terms read only the answer span — the spillover configuration — and the
// CoT span contributes nothing to the return.
struct RewardSpec {
    double task_weight = 1.0;
    double monitor_penalty_weight = 0.0;
    double length_penalty_weight = 0.0;
    double kl_weight = 0.0;
    bool output_only = false;

    void validate() const {
        if (task_weight <= 0.0) throw ConfigError("reward spec: task_weight must be > 0");
        if (monitor_penalty_weight < 0.0 || length_penalty_weight < 0.0 || kl_weight < 0.0) {
            throw ConfigError("reward spec: penalty weights must be >= 0");
        }
    }
};

// Per-episode series. holdout is logged for measurement and never enters
// any return.
struct TrainingCurves {
    std::vector<double> reward;
    std::vector<double> provided;
    std::vector<double> holdout;
    std::vector<double> detection;
    std::vector<double> cot_len;
    std::vector<double> kl;

    std::size_t size() const { return reward.size(); }

    void append(double r, double p, double h, double det, double len, double k) {
        reward.push_back(r);
        provided.push_back(p);
        holdout.push_back(h);
        detection.push_back(det);
        cot_len.push_back(len);
        kl.push_back(k);
    }

    void append_all(const TrainingCurves& other);
    void truncate(std::size_t n);
    void validate() const;

    void save_csv(const std::string& path) const;
    static TrainingCurves load_csv(const std::string& path);
};

}  // namespace cotlab::train
