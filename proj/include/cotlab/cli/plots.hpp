#pragma once

#include <string>

#include <json.hpp>

#include "cotlab/train/reward.hpp"

namespace cotlab::cli {

// SVG emission is a pure function of its input: same bytes in, same bytes out.

// provided / holdout / windowed-detection lines from a curves CSV.
std::string svg_curves(const train::TrainingCurves& curves, std::size_t window = 50);

// Pareto scatter (capability slope vs monitorability duration) from a
// monitorability-bench report.
std::string svg_pareto(const nlohmann::ordered_json& bench_report);

// Accuracy-with-interval points from a no-cot-eval or transfer report.
std::string svg_intervals(const nlohmann::ordered_json& report);

// Dispatch on the report's "report" field.
std::string svg_for_report(const nlohmann::ordered_json& report);

}  // namespace cotlab::cli
