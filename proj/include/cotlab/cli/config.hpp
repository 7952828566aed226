#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace cotlab::cli {

// Full default configuration; every run option lives here so threshold
// sweeps are data, not code edits.
nlohmann::ordered_json default_config();

struct ValidationResult {
    nlohmann::ordered_json normalized;  // defaults filled
    std::vector<std::string> errors;    // "<json-pointer>: message", empty when valid

    bool ok() const { return errors.empty(); }
};

// Parses, merges over defaults, and range-checks. Collects every violation
// (JSON-pointer paths); never fails on the first.
ValidationResult validate_config(const std::string& path);
ValidationResult validate_config_json(const nlohmann::ordered_json& user);

// Digest of the normalized form; what manifests and checkpoints reference.
std::uint64_t config_digest(const nlohmann::ordered_json& normalized);

}  // namespace cotlab::cli
