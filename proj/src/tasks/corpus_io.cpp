#include "cotlab/tasks/corpus_io.hpp"

#include <fstream>

#include <json.hpp>

#include "cotlab/errors.hpp"

namespace cotlab::tasks {

using nlohmann::ordered_json;

namespace {

ordered_json instance_to_json(const TaskInstance& inst) {
    ordered_json j;
    j["domain"] = domain_name(inst.domain);
    j["k"] = inst.difficulty_k;
    j["prompt"] = inst.prompt;
    j["cot"] = inst.canonical_cot;
    j["answer"] = inst.answer;
    if (!inst.operands.empty()) j["operands"] = inst.operands;
    if (!inst.intermediates.empty()) j["intermediates"] = inst.intermediates;
    return j;
}

TaskInstance instance_from_json(const ordered_json& j) {
    TaskInstance inst;
    inst.domain = domain_from_name(j.at("domain").get<std::string>());
    inst.difficulty_k = j.at("k").get<int>();
    inst.prompt = j.at("prompt").get<std::vector<int>>();
    inst.canonical_cot = j.at("cot").get<std::vector<int>>();
    inst.answer = j.at("answer").get<std::vector<int>>();
    if (j.contains("operands")) inst.operands = j["operands"].get<std::vector<int>>();
    if (j.contains("intermediates")) {
        inst.intermediates = j["intermediates"].get<std::vector<int>>();
    }
    return inst;
}

ordered_json suite_to_json(const TestSuite& s) {
    ordered_json j;
    auto cases = [](const std::vector<TestCase>& v) {
        ordered_json arr = ordered_json::array();
        for (const auto& t : v) arr.push_back({t.input, t.expected});
        return arr;
    };
    j["provided"] = cases(s.provided);
    j["holdout"] = cases(s.holdout);
    return j;
}

TestSuite suite_from_json(const ordered_json& j) {
    TestSuite s;
    for (const auto& t : j.at("provided")) s.provided.push_back({t[0].get<int>(), t[1].get<int>()});
    for (const auto& t : j.at("holdout")) s.holdout.push_back({t[0].get<int>(), t[1].get<int>()});
    s.validate();
    return s;
}

}  // namespace

void save_corpus(const std::string& path, const std::vector<TaskInstance>& instances) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open corpus for writing: " + path);
    for (const auto& inst : instances) os << instance_to_json(inst).dump() << "\n";
}

std::vector<TaskInstance> load_corpus(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open corpus: " + path);
    std::vector<TaskInstance> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        out.push_back(instance_from_json(ordered_json::parse(line)));
    }
    return out;
}

void save_gameable_corpus(const std::string& path, const std::vector<GameableEpisode>& episodes) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open corpus for writing: " + path);
    for (const auto& ep : episodes) {
        ordered_json j = instance_to_json(ep.instance);
        j["suite"] = suite_to_json(ep.suite);
        j["rule"] = {ep.a, ep.b};
        os << j.dump() << "\n";
    }
}

std::vector<GameableEpisode> load_gameable_corpus(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open corpus: " + path);
    std::vector<GameableEpisode> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        ordered_json j = ordered_json::parse(line);
        GameableEpisode ep;
        ep.instance = instance_from_json(j);
        ep.suite = suite_from_json(j.at("suite"));
        ep.a = j.at("rule")[0].get<int>();
        ep.b = j.at("rule")[1].get<int>();
        out.push_back(std::move(ep));
    }
    return out;
}

}  // namespace cotlab::tasks
