#include "cotlab/cli/config.hpp"

#include <fstream>

#include "cotlab/errors.hpp"
#include "cotlab/numcore/digest.hpp"

namespace cotlab::cli {

using nlohmann::ordered_json;

ordered_json default_config() {
    ordered_json j;
    j["schema_version"] = 1;
    j["out_dir"] = "out";
    j["seed"] = 1;
    j["seeds"] = {1, 2, 3, 4, 5};

    j["model"]["n_layers"] = 2;
    j["model"]["n_heads"] = 4;
    j["model"]["d_model"] = 32;
    j["model"]["max_seq_len"] = 64;
    j["model"]["learned_pos"] = true;

    j["sft"]["arithmetic_ks"] = {1, 1, 1, 2, 3, 4};
    j["sft"]["arithmetic_count"] = 24000;
    j["sft"]["gameable_count"] = 6000;
    j["sft"]["gameable_hack_frac"] = 0.15;
    j["sft"]["gameable_cipher_hack_frac"] = 0.015;
    j["sft"]["epochs"] = 3;
    j["sft"]["batch_size"] = 16;
    j["sft"]["lr"] = 1e-3;
    j["sft"]["weight_decay"] = 0.0;

    j["reward"]["task_weight"] = 1.0;
    j["reward"]["monitor_penalty_weight"] = 0.0;
    j["reward"]["length_penalty_weight"] = 0.0;
    j["reward"]["kl_weight"] = 0.0;
    j["reward"]["output_only"] = false;

    j["rl"]["method"] = "plain";
    j["rl"]["episodes"] = 1500;
    j["rl"]["batch_size"] = 16;
    j["rl"]["lr"] = 1e-3;
    j["rl"]["temperature"] = 1.0;
    j["rl"]["max_new"] = 24;
    j["rl"]["domain"] = "gameable";
    j["rl"]["k"] = 3;

    j["bench"]["roster"] = {"plain", "monitor-penalty"};
    j["bench"]["episodes"] = 1500;
    j["bench"]["monitor_penalty"] = 0.6;
    j["bench"]["legibility_weight"] = 0.5;
    j["bench"]["tau"] = 0.2;
    j["bench"]["delta"] = 0.1;
    j["bench"]["window"] = 50;
    j["bench"]["escalate_factor"] = 2.0;
    j["bench"]["escalate_detection_bar"] = 0.5;

    j["transfer"]["k"] = 3;
    j["transfer"]["criterion"] = 0.9;
    j["transfer"]["heldout"] = 60;
    j["transfer"]["eval_every"] = 10;
    j["transfer"]["max_steps"] = 1200;
    j["transfer"]["trace_count"] = 400;
    j["transfer"]["batch_size"] = 12;
    j["transfer"]["lr"] = 1e-3;

    j["translate"]["episodes"] = 2000;
    j["translate"]["batch_size"] = 16;
    j["translate"]["lr"] = 1e-3;
    j["translate"]["temperature"] = 1.0;
    j["translate"]["k"] = 3;
    j["translate"]["cot_budget"] = 16;
    j["translate"]["heldout"] = 200;
    j["translate"]["kv_feed"] = false;
    j["translate"]["init_from_base"] = false;

    j["no_cot"]["k"] = 4;
    j["no_cot"]["instances"] = 500;
    j["no_cot"]["modes"] = {"with-cot", "constrained-output", "filler-cot", "distilled"};
    j["no_cot"]["distill_corpus"] = 4000;
    j["no_cot"]["distill_epochs"] = 4;
    j["no_cot"]["filler_finetune_corpus"] = 0;
    j["no_cot"]["filler_finetune_epochs"] = 2;

    j["taxonomy"]["traces_per_model"] = 24;
    j["taxonomy"]["k"] = 3;
    j["taxonomy"]["temperature"] = 0.7;

    j["checkpoints"]["base"] = "";
    j["checkpoints"]["reference"] = "";
    j["checkpoints"]["reasoning"] = "";
    return j;
}

namespace {

void merge_into(ordered_json& dst, const ordered_json& src, const std::string& pointer,
                std::vector<std::string>& errors) {
    for (auto it = src.begin(); it != src.end(); ++it) {
        const std::string p = pointer + "/" + it.key();
        if (!dst.contains(it.key())) {
            errors.push_back(p + ": unknown configuration key");
            continue;
        }
        if (dst[it.key()].is_object() && it.value().is_object()) {
            merge_into(dst[it.key()], it.value(), p, errors);
        } else if (dst[it.key()].is_object() != it.value().is_object()) {
            errors.push_back(p + ": wrong value type");
        } else {
            dst[it.key()] = it.value();
        }
    }
}

void check_range(const ordered_json& j, const std::string& pointer, double lo, double hi,
                 bool lo_open, bool hi_open, std::vector<std::string>& errors) {
    const ordered_json& v = j.at(nlohmann::json_pointer<std::string>(pointer));
    if (!v.is_number()) {
        errors.push_back(pointer + ": must be a number");
        return;
    }
    const double x = v.get<double>();
    const bool lo_ok = lo_open ? x > lo : x >= lo;
    const bool hi_ok = hi_open ? x < hi : x <= hi;
    if (!lo_ok || !hi_ok) {
        errors.push_back(pointer + ": value " + std::to_string(x) + " outside " +
                         (lo_open ? "(" : "[") + std::to_string(lo) + ", " + std::to_string(hi) +
                         (hi_open ? ")" : "]"));
    }
}

}  // namespace

ValidationResult validate_config_json(const ordered_json& user) {
    ValidationResult res;
    res.normalized = default_config();
    if (!user.is_object()) {
        res.errors.push_back(": config root must be a JSON object");
        return res;
    }
    merge_into(res.normalized, user, "", res.errors);

    const double inf = 1e18;
    check_range(res.normalized, "/reward/task_weight", 0.0, inf, true, true, res.errors);
    check_range(res.normalized, "/reward/monitor_penalty_weight", 0.0, inf, false, true,
                res.errors);
    check_range(res.normalized, "/reward/length_penalty_weight", 0.0, inf, false, true,
                res.errors);
    check_range(res.normalized, "/reward/kl_weight", 0.0, inf, false, true, res.errors);
    check_range(res.normalized, "/bench/tau", 0.0, 1.0, true, true, res.errors);
    check_range(res.normalized, "/bench/delta", 0.0, 1.0, true, true, res.errors);
    check_range(res.normalized, "/bench/window", 1.0, inf, false, true, res.errors);
    check_range(res.normalized, "/rl/temperature", 0.0, inf, false, true, res.errors);
    check_range(res.normalized, "/translate/temperature", 0.0, inf, false, true, res.errors);
    check_range(res.normalized, "/transfer/criterion", 0.0, 1.0, true, false, res.errors);
    check_range(res.normalized, "/no_cot/k", 1.0, inf, false, true, res.errors);
    check_range(res.normalized, "/rl/k", 1.0, inf, false, true, res.errors);
    check_range(res.normalized, "/transfer/k", 1.0, inf, false, true, res.errors);
    check_range(res.normalized, "/model/d_model", 1.0, inf, false, true, res.errors);
    check_range(res.normalized, "/model/n_heads", 1.0, inf, false, true, res.errors);

    const std::size_t d = res.normalized["/model/d_model"_json_pointer].get<std::size_t>();
    const std::size_t h = res.normalized["/model/n_heads"_json_pointer].get<std::size_t>();
    if (h != 0 && d % h != 0) {
        res.errors.push_back("/model/d_model: not divisible by /model/n_heads");
    }
    return res;
}

ValidationResult validate_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        ValidationResult res;
        res.errors.push_back(": cannot open config file " + path);
        return res;
    }
    ordered_json user;
    try {
        user = ordered_json::parse(is);
    } catch (const std::exception& e) {
        ValidationResult res;
        res.errors.push_back(std::string(": config is not valid JSON: ") + e.what());
        return res;
    }
    return validate_config_json(user);
}

std::uint64_t config_digest(const ordered_json& normalized) {
    return numcore::fnv1a(normalized.dump());
}

}  // namespace cotlab::cli
