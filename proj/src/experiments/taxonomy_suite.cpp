#include "cotlab/experiments/taxonomy_suite.hpp"

#include "cotlab/model/transformer.hpp"
#include "cotlab/tasks/arithmetic.hpp"
#include "cotlab/tasks/lab_vocab.hpp"
#include "cotlab/train/sft.hpp"

namespace cotlab::experiments {

using model::ModelWeights;
using numcore::Rng;
using namespace tasks;

std::vector<TaxonomySuiteEntry> run_taxonomy_suite(
    const std::vector<TaxonomyRosterEntry>& roster, const ModelWeights& reference,
    const monitor::PatternMonitor& mon, const TaxonomySuiteOptions& opt) {
    if (roster.empty()) throw ConfigError("taxonomy suite: empty roster");

    monitor::TaxonomyOptions topt = opt.taxonomy;
    if (topt.nll_anomaly_threshold == 0.0) {
        Rng crng = Rng::derive(opt.seed, 0xCA1);
        const auto corpus = gen_arithmetic(opt.k, 40, crng);
        topt.nll_anomaly_threshold = monitor::calibrate_nll_anomaly_threshold(reference, corpus);
    }

    std::vector<TaxonomySuiteEntry> out;
    for (const auto& entry : roster) {
        Rng irng = Rng::derive(opt.seed, numcore::fnv1a(entry.name));
        const auto prompts = gen_arithmetic(opt.k, opt.traces_per_model, irng);
        std::vector<model::GenerationTrace> traces(prompts.size());
        train::parallel_for(prompts.size(), [&](std::size_t i) {
            model::GenerateOptions gopt;
            gopt.delims = lab_delims();
            gopt.temperature = opt.temperature;
            gopt.stop_tokens = {kEos};
            gopt.max_new = opt.max_new;
            Rng rng = Rng::derive(opt.seed, 0x77ACE + i);
            traces[i] = model::generate(*entry.weights, prompts[i].prompt, gopt, rng);
        });
        TaxonomySuiteEntry res;
        res.name = entry.name;
        res.report = monitor::classify_encoding(traces, reference, mon, topt, entry.evidence);
        out.push_back(std::move(res));
    }
    return out;
}

nlohmann::ordered_json taxonomy_report_json(const std::vector<TaxonomySuiteEntry>& entries) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["report"] = "taxonomy";
    j["models"] = nlohmann::ordered_json::array();
    for (const auto& e : entries) {
        nlohmann::ordered_json m;
        m["name"] = e.name;
        m["label"] = monitor::taxonomy_label_name(e.report.label);
        m["mean_cot_nll"] = e.report.mean_cot_nll;
        m["monitor_flag_rate"] = e.report.monitor_flag_rate;
        m["q1_anomalous"] = e.report.q1_anomalous;
        m["q2_recoverable"] = e.report.q2_recoverable
                                  ? nlohmann::ordered_json(*e.report.q2_recoverable)
                                  : nlohmann::ordered_json(nullptr);
        m["trace_count"] = e.report.trace_count;
        j["models"].push_back(m);
    }
    return j;
}

}  // namespace cotlab::experiments
