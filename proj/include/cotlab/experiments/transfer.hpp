#pragma once

#include <string>
#include <vector>

#include "cotlab/experiments/run_state.hpp"
#include "cotlab/model/weights.hpp"
#include "cotlab/tasks/cipher.hpp"

namespace cotlab::experiments {

struct TransferOptions {
    int k = 3;
    std::size_t trace_count = 400;   // encoded traces per domain (phase 1)
    double criterion = 0.9;          // encoded-generation accuracy, held-out, greedy
    std::size_t heldout = 60;
    std::size_t eval_every = 10;     // optimizer steps between criterion checks
    std::size_t max_steps = 1200;    // per-arm budget
    std::size_t batch_size = 12;
    double lr = 1e-3;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    bool scripted_substitution = true;  // phase-1 provenance (vs RL-discovered)
    std::string journal_path;           // arm-level resume journal (optional)
};

struct ArmResult {
    std::vector<double> steps;  // per seed; steps-to-criterion in optimizer steps
    std::vector<double> tokens; // per seed; supervised target tokens consumed
    bool budget_exhausted = false;
};

struct TransferReport {
    ArmResult scratch_a, scratch_b;
    ArmResult second_b_after_a, second_a_after_b, second_a_after_a, identity;
    Interval ratio_ab;  // steps(A then B) / steps(scratch B)
    Interval ratio_ba;
    double ratio_aa_mean = 0.0;
    std::string provenance;
};

// Phase 1 produces successful encoded traces per domain (scripted
// substitution of canonical chains by default); phase 2 measures SFT
// steps-to-criterion from the original checkpoint, for each domain and
// order, averaged over seeds.
TransferReport run_transfer_eval(const model::ModelWeights& base, const tasks::CipherSpec& a,
                                 const tasks::CipherSpec& b, const TransferOptions& opt);

nlohmann::ordered_json transfer_report_json(const TransferReport& rep);

}  // namespace cotlab::experiments
