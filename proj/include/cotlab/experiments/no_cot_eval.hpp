#pragma once

#include <string>
#include <vector>

#include "cotlab/experiments/run_state.hpp"
#include "cotlab/model/weights.hpp"
#include "cotlab/tasks/task.hpp"

namespace cotlab::experiments {

enum class EvalMode { WithCot, ConstrainedOutput, FillerCot, Distilled };

std::string eval_mode_name(EvalMode m);

struct NoCotEvalOptions {
    int k = 4;
    std::size_t instances = 500;
    std::uint64_t seed = 0;
    std::vector<EvalMode> modes = {EvalMode::WithCot, EvalMode::ConstrainedOutput,
                                   EvalMode::FillerCot, EvalMode::Distilled};
    // Distilled mode trains a copy on (prompt, answer) pairs drawn from the
    // same family; filler fine-tuning (evaluation-time only) is opt-in.
    std::size_t distill_corpus = 4000;
    std::size_t distill_epochs = 4;
    std::size_t filler_finetune_corpus = 0;  // 0 disables the fine-tune
    std::size_t filler_finetune_epochs = 2;
    double lr = 1e-3;
};

struct ModeReport {
    EvalMode mode = EvalMode::WithCot;
    std::size_t correct = 0;
    std::size_t total = 0;
    double accuracy = 0.0;
    Interval ci;
    double gap_vs_with_cot = 0.0;  // with_cot - this mode
    Interval gap_ci;
};

struct NoCotEvalReport {
    int k = 0;
    std::vector<ModeReport> modes;

    const ModeReport& mode(EvalMode m) const;
};

// Evaluates the same task family under output restrictions:
//   with-CoT             free generation, exact answer match
//   constrained-output   no tokens between prompt and answer span; the
//                        answer budget equals the reference answer length
//   filler-CoT           the CoT is N copies of the filler token, N = the
//                        canonical CoT length
//   distilled            a distill-trained copy answering without CoT
NoCotEvalReport run_no_cot_eval(const model::ModelWeights& weights, const NoCotEvalOptions& opt);

nlohmann::ordered_json no_cot_report_json(const NoCotEvalReport& rep);

}  // namespace cotlab::experiments
