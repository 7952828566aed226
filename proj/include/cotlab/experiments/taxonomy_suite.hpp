#pragma once

#include <string>
#include <vector>

#include "cotlab/experiments/run_state.hpp"
#include "cotlab/model/weights.hpp"
#include "cotlab/monitor/taxonomy.hpp"

namespace cotlab::experiments {

struct TaxonomyRosterEntry {
    std::string name;
    const model::ModelWeights* weights = nullptr;
    monitor::TaxonomyEvidence evidence;
};

struct TaxonomySuiteOptions {
    std::size_t traces_per_model = 24;
    int k = 3;
    std::uint64_t seed = 0;
    double temperature = 0.7;
    std::size_t max_new = 24;
    monitor::TaxonomyOptions taxonomy;  // anomaly threshold filled by the driver
};

struct TaxonomySuiteEntry {
    std::string name;
    monitor::TaxonomyReport report;
};

// Generates traces for every roster model on one task family, calibrates the
// anomaly threshold on the canonical corpus under `reference`, and applies
// the two-question classification. Raw Q1/Q2 statistics ride along with each
// forced label.
std::vector<TaxonomySuiteEntry> run_taxonomy_suite(
    const std::vector<TaxonomyRosterEntry>& roster, const model::ModelWeights& reference,
    const monitor::PatternMonitor& mon, const TaxonomySuiteOptions& opt);

nlohmann::ordered_json taxonomy_report_json(const std::vector<TaxonomySuiteEntry>& entries);

}  // namespace cotlab::experiments
