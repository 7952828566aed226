#include "cotlab/experiments/no_cot_eval.hpp"

#include "cotlab/model/sampler.hpp"
#include "cotlab/model/transformer.hpp"
#include "cotlab/tasks/arithmetic.hpp"
#include "cotlab/tasks/lab_vocab.hpp"
#include "cotlab/train/distill.hpp"
#include "cotlab/train/sft.hpp"

namespace cotlab::experiments {

using model::ModelWeights;
using numcore::Rng;
using namespace tasks;

std::string eval_mode_name(EvalMode m) {
    switch (m) {
        case EvalMode::WithCot: return "with-cot";
        case EvalMode::ConstrainedOutput: return "constrained-output";
        case EvalMode::FillerCot: return "filler-cot";
        case EvalMode::Distilled: return "distilled";
    }
    return "with-cot";
}

const ModeReport& NoCotEvalReport::mode(EvalMode m) const {
    for (const auto& r : modes) {
        if (r.mode == m) return r;
    }
    throw ConfigError("report has no entry for mode " + eval_mode_name(m));
}

namespace {

// Greedy continuation from a fixed context; returns the generated tokens.
std::vector<int> continue_greedy(const ModelWeights& w, const std::vector<int>& ctx,
                                 std::size_t budget) {
    model::GenerateOptions opt;
    opt.delims = lab_delims();
    opt.temperature = 0.0;
    opt.stop_tokens = {kEos};
    opt.max_new = std::min<std::size_t>(budget, w.config().max_seq_len - ctx.size());
    Rng rng(0);  // unused at temperature 0
    model::GenerationTrace tr = model::generate(w, ctx, opt, rng);
    return {tr.seq.tokens.begin() + static_cast<long>(ctx.size()), tr.seq.tokens.end()};
}

bool eval_one(const ModelWeights& w, const TaskInstance& inst, EvalMode mode,
              const ModelWeights* distilled) {
    const model::SpanDelims delims = lab_delims();
    switch (mode) {
        case EvalMode::WithCot: {
            model::GenerateOptions opt;
            opt.delims = delims;
            opt.temperature = 0.0;
            opt.stop_tokens = {kEos};
            opt.max_new = w.config().max_seq_len - inst.prompt.size();
            Rng rng(0);
            model::GenerationTrace tr = model::generate(w, inst.prompt, opt, rng);
            return answer_matches(tr.seq.inner_answer(delims, kEos), inst);
        }
        case EvalMode::ConstrainedOutput: {
            // No tokens between prompt and answer span: <ans> is forced and
            // the model may emit exactly answer-length tokens.
            std::vector<int> ctx = inst.prompt;
            ctx.push_back(kAnsOpen);
            std::vector<int> out = continue_greedy(w, ctx, inst.answer.size());
            return out == inst.answer;
        }
        case EvalMode::FillerCot: {
            std::vector<int> ctx = inst.prompt;
            ctx.push_back(kThinkOpen);
            const std::size_t n_fill = inst.canonical_cot.size();
            for (std::size_t i = 0; i < n_fill; ++i) ctx.push_back(kFill);
            ctx.push_back(kThinkClose);
            ctx.push_back(kAnsOpen);
            std::vector<int> out = continue_greedy(w, ctx, inst.answer.size());
            return out == inst.answer;
        }
        case EvalMode::Distilled: {
            std::vector<int> ctx = inst.prompt;
            ctx.push_back(kAnsOpen);
            std::vector<int> out = continue_greedy(*distilled, ctx, inst.answer.size());
            return out == inst.answer;
        }
    }
    return false;
}

}  // namespace

NoCotEvalReport run_no_cot_eval(const ModelWeights& weights, const NoCotEvalOptions& opt) {
    if (opt.k < 1) throw ConfigError("no-cot eval: k must be >= 1");
    if (opt.modes.empty()) throw ConfigError("no-cot eval: at least one mode required");

    Rng inst_rng = Rng::derive(opt.seed, 0x90CE);
    const std::vector<TaskInstance> eval_set = gen_arithmetic(opt.k, opt.instances, inst_rng);

    // Mode-specific trained copies are produced before evaluation.
    ModelWeights distilled = weights;
    bool have_distilled = false;
    for (EvalMode m : opt.modes) {
        if (m == EvalMode::Distilled) {
            Rng crng = Rng::derive(opt.seed, 0xD157);
            auto corpus = gen_arithmetic(opt.k, opt.distill_corpus, crng);
            train::SftOptions sopt;
            sopt.lr = opt.lr;
            sopt.seed = opt.seed;
            train::distill(distilled, corpus, opt.distill_epochs, sopt);
            have_distilled = true;
        }
    }
    ModelWeights filler_model = weights;
    if (opt.filler_finetune_corpus > 0) {
        Rng crng = Rng::derive(opt.seed, 0xF177);
        auto corpus = gen_arithmetic(opt.k, opt.filler_finetune_corpus, crng);
        std::vector<model::TokenSequence> seqs;
        for (auto& inst : corpus) {
            std::vector<int> fills(inst.canonical_cot.size(), kFill);
            seqs.push_back(assemble_sequence(inst.prompt, fills, inst.answer));
        }
        train::SftOptions sopt;
        sopt.lr = opt.lr;
        sopt.seed = opt.seed;
        train::sft_sequences(filler_model, seqs, train::LossSpan::CotAndAnswer,
                             opt.filler_finetune_epochs, sopt);
    }

    NoCotEvalReport rep;
    rep.k = opt.k;
    double with_cot_acc = 0.0;
    std::size_t with_cot_n = 0;
    for (EvalMode m : opt.modes) {
        if (m == EvalMode::Distilled && !have_distilled) {
            throw ConfigError("distilled mode requested without distillation");
        }
        const ModelWeights& subject =
            (m == EvalMode::FillerCot && opt.filler_finetune_corpus > 0) ? filler_model : weights;
        ModeReport mr;
        mr.mode = m;
        mr.total = eval_set.size();
        std::vector<int> outcomes(eval_set.size(), 0);
        train::parallel_for(eval_set.size(), [&](std::size_t i) {
            outcomes[i] = eval_one(subject, eval_set[i], m, &distilled) ? 1 : 0;
        });
        for (int o : outcomes) mr.correct += static_cast<std::size_t>(o);
        mr.accuracy = static_cast<double>(mr.correct) / static_cast<double>(mr.total);
        mr.ci = wilson_interval(mr.correct, mr.total);
        rep.modes.push_back(mr);
        if (m == EvalMode::WithCot) {
            with_cot_acc = mr.accuracy;
            with_cot_n = mr.total;
        }
    }
    for (auto& mr : rep.modes) {
        if (mr.mode == EvalMode::WithCot || with_cot_n == 0) continue;
        mr.gap_vs_with_cot = with_cot_acc - mr.accuracy;
        mr.gap_ci = diff_interval(with_cot_acc, with_cot_n, mr.accuracy, mr.total);
    }
    return rep;
}

nlohmann::ordered_json no_cot_report_json(const NoCotEvalReport& rep) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["report"] = "no-cot-eval";
    j["k"] = rep.k;
    j["modes"] = nlohmann::ordered_json::array();
    for (const auto& m : rep.modes) {
        nlohmann::ordered_json e;
        e["mode"] = eval_mode_name(m.mode);
        e["correct"] = m.correct;
        e["total"] = m.total;
        e["accuracy"] = m.accuracy;
        e["ci"] = {m.ci.lo, m.ci.hi};
        if (m.mode != EvalMode::WithCot) {
            e["gap_vs_with_cot"] = m.gap_vs_with_cot;
            e["gap_ci"] = {m.gap_ci.lo, m.gap_ci.hi};
        }
        j["modes"].push_back(e);
    }
    return j;
}

}  // namespace cotlab::experiments
