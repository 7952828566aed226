#pragma once

#include <vector>

#include "cotlab/model/config.hpp"
#include "cotlab/tasks/cipher.hpp"
#include "cotlab/tasks/gameable.hpp"
#include "cotlab/tasks/task.hpp"

namespace cotlab::experiments {

// The standard desk-scale model every driver shares.
model::ModelConfig lab_model_config();

// Supervised mix. Arithmetic instances teach the chain skill; the gameable
// portion seeds both answer grammars: mostly honest derivations, a plain
// lookup-table slice (so the hack is reachable for RL), and a small ciphered
// slice (so encoded hack-talk is reachable under monitor pressure).
struct SftMixConfig {
    std::vector<int> arithmetic_ks = {1, 1, 1, 2, 3, 4};
    std::size_t arithmetic_count = 24000;
    std::size_t gameable_count = 6000;
    double gameable_hack_frac = 0.15;
    double gameable_cipher_hack_frac = 0.015;
};

std::vector<tasks::TaskInstance> build_sft_mix(const SftMixConfig& cfg, std::uint64_t seed);

// Gameable instances with the honest derivation CoT replaced as requested.
tasks::TaskInstance hack_demo(const tasks::GameableEpisode& ep, bool ciphered);

}  // namespace cotlab::experiments
