#include "cotlab/experiments/lab_presets.hpp"

#include "cotlab/numcore/rng.hpp"
#include "cotlab/tasks/arithmetic.hpp"
#include "cotlab/tasks/gameable.hpp"
#include "cotlab/tasks/lab_vocab.hpp"

namespace cotlab::experiments {

using numcore::Rng;
using namespace tasks;

model::ModelConfig lab_model_config() {
    model::ModelConfig cfg;
    cfg.n_layers = 2;
    cfg.n_heads = 4;
    cfg.d_model = 32;
    cfg.vocab_size = kVocabSize;
    cfg.max_seq_len = 64;
    cfg.learned_pos = true;
    return cfg;
}

TaskInstance hack_demo(const GameableEpisode& ep, bool ciphered) {
    TaskInstance demo = ep.instance;
    demo.canonical_cot = ep.hack_cot();
    if (ciphered) {
        demo.canonical_cot = CipherSpec::cipher_a().encode(demo.canonical_cot);
    }
    demo.answer = ep.lut_answer();
    return demo;
}

std::vector<TaskInstance> build_sft_mix(const SftMixConfig& cfg, std::uint64_t seed) {
    std::vector<TaskInstance> corpus;
    corpus.reserve(cfg.arithmetic_count + cfg.gameable_count);

    Rng arng = Rng::derive(seed, 0xA417);
    if (!cfg.arithmetic_ks.empty()) {
        for (std::size_t i = 0; i < cfg.arithmetic_count; ++i) {
            const int k = cfg.arithmetic_ks[i % cfg.arithmetic_ks.size()];
            corpus.push_back(gen_arithmetic(k, 1, arng)[0]);
        }
    }

    Rng grng = Rng::derive(seed, 0x6A3E);
    for (std::size_t i = 0; i < cfg.gameable_count; ++i) {
        GameableEpisode ep = gen_gameable(1, grng)[0];
        const double u = grng.uniform();
        if (u < cfg.gameable_cipher_hack_frac) {
            corpus.push_back(hack_demo(ep, /*ciphered=*/true));
        } else if (u < cfg.gameable_cipher_hack_frac + cfg.gameable_hack_frac) {
            corpus.push_back(hack_demo(ep, /*ciphered=*/false));
        } else {
            corpus.push_back(ep.instance);
        }
    }
    return corpus;
}

}  // namespace cotlab::experiments
