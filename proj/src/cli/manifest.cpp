#include "cotlab/cli/manifest.hpp"

#include <fstream>

#include "cotlab/cli/config.hpp"
#include "cotlab/errors.hpp"
#include "cotlab/numcore/digest.hpp"

namespace cotlab::cli {

using nlohmann::ordered_json;

ordered_json make_manifest(const std::string& experiment, const ordered_json& normalized_config) {
    ordered_json m;
    m["schema_version"] = 1;
    m["experiment"] = experiment;
    m["config_digest"] = numcore::hex64(config_digest(normalized_config));
    m["seeds"] = normalized_config.at("seeds");
    m["thresholds"]["tau"] = normalized_config.at("bench").at("tau");
    m["thresholds"]["delta"] = normalized_config.at("bench").at("delta");
    m["thresholds"]["transfer_criterion"] = normalized_config.at("transfer").at("criterion");
    m["checkpoints"] = normalized_config.at("checkpoints");
    m["code_version"] = kCodeVersion;
    m["config"] = normalized_config;
    return m;
}

ordered_json load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open manifest: " + path);
    ordered_json m = ordered_json::parse(is);
    const std::string recorded = m.at("config_digest").get<std::string>();
    const std::string actual = numcore::hex64(config_digest(m.at("config")));
    if (recorded != actual) {
        throw ConfigError("manifest digest mismatch in " + path + ": recorded " + recorded +
                          ", config hashes to " + actual);
    }
    return m;
}

}  // namespace cotlab::cli
