#pragma once

#include <string>

#include <json.hpp>

namespace cotlab::cli {

inline constexpr const char* kCodeVersion = "cotlab 0.1.0";

// Sidecar capturing everything needed to regenerate a report byte for byte:
// the normalized config (thresholds included), seeds, checkpoint paths, and
// the code version.
nlohmann::ordered_json make_manifest(const std::string& experiment,
                                     const nlohmann::ordered_json& normalized_config);

// Verifies the embedded digest and returns the manifest.
nlohmann::ordered_json load_manifest(const std::string& path);

}  // namespace cotlab::cli
