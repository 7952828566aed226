#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cotlab/model/trace.hpp"

namespace cotlab::monitor {

struct MonitorVerdict {
    bool flagged = false;
    double score = 0.0;  // normalized matched weight, in [0,1]
    std::vector<std::size_t> matched_patterns;
    std::string rationale;
};

// Deterministic n-gram scorer over token ids. Scans only the span it is
// given (callers pass the CoT span; the answer span never reaches it).
// score = sum of matched pattern weights / sum of all weights.
class PatternMonitor {
public:
    struct Pattern {
        std::vector<int> ngram;
        double weight = 1.0;
    };

    PatternMonitor() = default;
    PatternMonitor(std::vector<Pattern> patterns, double threshold);

    // Flags planning about copying the provided tests and the lookup-table
    // opener; the lab default used by the reward-hacking experiments.
    static PatternMonitor lab_default();

    MonitorVerdict monitor_cot(const std::vector<int>& inner_cot) const;

    double threshold() const { return threshold_; }
    const std::vector<Pattern>& patterns() const { return patterns_; }
    std::uint64_t digest() const;

    void save(const std::string& path) const;
    static PatternMonitor load(const std::string& path);

private:
    std::vector<Pattern> patterns_;
    double threshold_ = 0.5;
    double total_weight_ = 0.0;
};

}  // namespace cotlab::monitor
