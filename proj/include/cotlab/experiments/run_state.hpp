#pragma once

#include <optional>
#include <string>

#include <json.hpp>

namespace cotlab::experiments {

// Arm-level journal for resumable drivers. Completed arms are recorded with
// their result payloads; a resumed run skips them and reruns only the
// incomplete arm. Arms are deterministic functions of (config, seed), so a
// resumed report is byte-identical to an uninterrupted one.
class RunJournal {
public:
    RunJournal() = default;
    static RunJournal open(const std::string& path);

    bool has(const std::string& key) const;
    nlohmann::ordered_json get(const std::string& key) const;
    void put(const std::string& key, const nlohmann::ordered_json& value);

    const std::string& path() const { return path_; }

private:
    std::string path_;
    nlohmann::ordered_json entries_ = nlohmann::ordered_json::object();

    void flush() const;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

// Wilson score interval for a binomial proportion, z = 1.96.
Interval wilson_interval(std::size_t successes, std::size_t n);

// Normal-approximation CI for a difference of proportions.
Interval diff_interval(double p1, std::size_t n1, double p2, std::size_t n2);

// Mean and a +-1.96 * stderr interval over a small sample.
Interval mean_interval(const std::vector<double>& xs);
double mean_of(const std::vector<double>& xs);

// Deterministic JSON writing (stable key order, fixed formatting).
void write_json(const std::string& path, const nlohmann::ordered_json& j);
nlohmann::ordered_json read_json(const std::string& path);

}  // namespace cotlab::experiments
