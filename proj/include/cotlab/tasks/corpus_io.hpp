#pragma once

#include <string>
#include <vector>

#include "cotlab/tasks/gameable.hpp"
#include "cotlab/tasks/task.hpp"

namespace cotlab::tasks {

// JSON-lines corpus: one instance per line with domain tag and prompt /
// cot / answer token id arrays; gameable lines carry their test suite.
void save_corpus(const std::string& path, const std::vector<TaskInstance>& instances);
std::vector<TaskInstance> load_corpus(const std::string& path);

void save_gameable_corpus(const std::string& path, const std::vector<GameableEpisode>& episodes);
std::vector<GameableEpisode> load_gameable_corpus(const std::string& path);

}  // namespace cotlab::tasks
