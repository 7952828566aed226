#include "cotlab/experiments/run_state.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cotlab/errors.hpp"

namespace cotlab::experiments {

RunJournal RunJournal::open(const std::string& path) {
    RunJournal j;
    j.path_ = path;
    if (std::filesystem::exists(path)) {
        std::ifstream is(path);
        j.entries_ = nlohmann::ordered_json::parse(is);
    }
    return j;
}

bool RunJournal::has(const std::string& key) const { return entries_.contains(key); }

nlohmann::ordered_json RunJournal::get(const std::string& key) const {
    if (!entries_.contains(key)) throw IoError("journal has no entry for " + key);
    return entries_.at(key);
}

void RunJournal::put(const std::string& key, const nlohmann::ordered_json& value) {
    entries_[key] = value;
    flush();
}

void RunJournal::flush() const {
    if (path_.empty()) return;
    std::ofstream os(path_, std::ios::trunc);
    if (!os) throw IoError("cannot write journal: " + path_);
    os << entries_.dump(2) << "\n";
}

Interval wilson_interval(std::size_t successes, std::size_t n) {
    if (n == 0) return {0.0, 1.0};
    const double z = 1.959963984540054;
    const double p = static_cast<double>(successes) / static_cast<double>(n);
    const double z2 = z * z;
    const double denom = 1.0 + z2 / static_cast<double>(n);
    const double center = p + z2 / (2.0 * static_cast<double>(n));
    const double half =
        z * std::sqrt(p * (1.0 - p) / static_cast<double>(n) +
                      z2 / (4.0 * static_cast<double>(n) * static_cast<double>(n)));
    return {(center - half) / denom, (center + half) / denom};
}

Interval diff_interval(double p1, std::size_t n1, double p2, std::size_t n2) {
    const double z = 1.959963984540054;
    const double se = std::sqrt(p1 * (1.0 - p1) / static_cast<double>(n1) +
                                p2 * (1.0 - p2) / static_cast<double>(n2));
    const double d = p1 - p2;
    return {d - z * se, d + z * se};
}

double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

Interval mean_interval(const std::vector<double>& xs) {
    const double mu = mean_of(xs);
    if (xs.size() < 2) return {mu, mu};
    double var = 0.0;
    for (double x : xs) var += (x - mu) * (x - mu);
    var /= static_cast<double>(xs.size() - 1);
    const double half = 1.959963984540054 * std::sqrt(var / static_cast<double>(xs.size()));
    return {mu - half, mu + half};
}

void write_json(const std::string& path, const nlohmann::ordered_json& j) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write report: " + path);
    os << j.dump(2) << "\n";
}

nlohmann::ordered_json read_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open report: " + path);
    return nlohmann::ordered_json::parse(is);
}

}  // namespace cotlab::experiments
