#include "cotlab/experiments/transfer.hpp"

#include "cotlab/model/sampler.hpp"
#include "cotlab/model/transformer.hpp"
#include "cotlab/tasks/arithmetic.hpp"
#include "cotlab/tasks/lab_vocab.hpp"
#include "cotlab/train/sft.hpp"

namespace cotlab::experiments {

using model::ModelWeights;
using numcore::Rng;
using namespace tasks;

namespace {

std::vector<model::TokenSequence> encoded_traces(const CipherSpec& spec, int k, std::size_t count,
                                                 std::uint64_t seed) {
    Rng rng = Rng::derive(seed, 0x7247CE);
    auto insts = gen_arithmetic(k, count, rng);
    std::vector<model::TokenSequence> seqs;
    seqs.reserve(insts.size());
    for (const auto& inst : insts) {
        seqs.push_back(assemble_sequence(inst.prompt, spec.encode(inst.canonical_cot),
                                         inst.answer));
    }
    return seqs;
}

// Greedy encoded-generation accuracy: the emitted CoT must equal the ciphered
// canonical chain exactly and the answer must match.
double encoded_accuracy(const ModelWeights& w, const CipherSpec& spec,
                        const std::vector<TaskInstance>& heldout) {
    std::vector<int> ok(heldout.size(), 0);
    train::parallel_for(heldout.size(), [&](std::size_t i) {
        const TaskInstance& inst = heldout[i];
        model::GenerateOptions opt;
        opt.delims = lab_delims();
        opt.temperature = 0.0;
        opt.stop_tokens = {kEos};
        opt.max_new = w.config().max_seq_len - inst.prompt.size();
        Rng rng(0);
        model::GenerationTrace tr = model::generate(w, inst.prompt, opt, rng);
        const bool cot_ok =
            tr.seq.inner_cot(opt.delims) == spec.encode(inst.canonical_cot);
        const bool ans_ok = answer_matches(tr.seq.inner_answer(opt.delims, kEos), inst);
        ok[i] = (cot_ok && ans_ok) ? 1 : 0;
    });
    double acc = 0.0;
    for (int o : ok) acc += o;
    return acc / static_cast<double>(heldout.size());
}

struct ArmOutcome {
    std::size_t steps = 0;
    std::size_t tokens = 0;
    bool exhausted = false;
    ModelWeights weights;
};

// SFT on the domain's encoded traces until the criterion holds on held-out
// instances, measured in optimizer steps (and supervised tokens).
ArmOutcome steps_to_criterion(const ModelWeights& start, const CipherSpec& spec,
                              const TransferOptions& opt, std::uint64_t seed) {
    ArmOutcome out{0, 0, false, start};
    Rng hrng = Rng::derive(seed, 0x4E1D);
    const auto heldout = gen_arithmetic(opt.k, opt.heldout, hrng);

    if (encoded_accuracy(out.weights, spec, heldout) >= opt.criterion) {
        return out;  // criterion already met: 0 steps
    }
    const auto seqs = encoded_traces(spec, opt.k, opt.trace_count, seed);
    std::size_t tokens_per_step = 0;
    for (std::size_t i = 0; i < std::min<std::size_t>(opt.batch_size, seqs.size()); ++i) {
        tokens_per_step += seqs[i].tokens.size() - seqs[i].prompt_end;
    }

    train::SftOptions sopt;
    sopt.batch_size = opt.batch_size;
    sopt.lr = opt.lr;
    sopt.seed = seed;
    sopt.eval_every = opt.eval_every;
    sopt.max_steps = opt.max_steps;
    sopt.eval_hook = [&](std::size_t) {
        return encoded_accuracy(out.weights, spec, heldout) >= opt.criterion;
    };
    train::SftResult res = train::sft_sequences(out.weights, seqs, train::LossSpan::CotAndAnswer,
                                                /*epochs=*/1000000, sopt);
    out.steps = res.steps;
    out.tokens = res.steps * tokens_per_step;
    out.exhausted = !res.stopped_by_hook;
    return out;
}

nlohmann::ordered_json arm_json(const ArmResult& arm) {
    nlohmann::ordered_json j;
    j["steps"] = arm.steps;
    j["tokens"] = arm.tokens;
    j["budget_exhausted"] = arm.budget_exhausted;
    return j;
}

}  // namespace

TransferReport run_transfer_eval(const ModelWeights& base, const CipherSpec& a,
                                 const CipherSpec& b, const TransferOptions& opt) {
    TransferReport rep;
    rep.provenance = opt.scripted_substitution ? "scripted-substitution" : "rl-discovered";
    if (!opt.scripted_substitution) {
        throw ConfigError(
            "transfer eval: RL-discovered phase 1 is not wired in; use scripted substitution");
    }

    RunJournal journal;
    if (!opt.journal_path.empty()) journal = RunJournal::open(opt.journal_path);
    const bool journaled = !opt.journal_path.empty();

    const CipherSpec identity = CipherSpec::identity_cipher();

    auto run_arm = [&](const std::string& name, const CipherSpec& first,
                       const CipherSpec* second) {
        ArmResult arm;
        for (std::uint64_t seed : opt.seeds) {
            const std::string key = name + "/seed" + std::to_string(seed);
            if (journaled && journal.has(key)) {
                auto j = journal.get(key);
                arm.steps.push_back(j.at("steps").get<double>());
                arm.tokens.push_back(j.at("tokens").get<double>());
                arm.budget_exhausted = arm.budget_exhausted || j.at("exhausted").get<bool>();
                continue;
            }
            ArmOutcome first_out = steps_to_criterion(base, first, opt, seed);
            ArmOutcome final_out = first_out;
            if (second) final_out = steps_to_criterion(first_out.weights, *second, opt, seed);
            arm.steps.push_back(static_cast<double>(final_out.steps));
            arm.tokens.push_back(static_cast<double>(final_out.tokens));
            arm.budget_exhausted = arm.budget_exhausted || final_out.exhausted ||
                                   (second && first_out.exhausted);
            if (journaled) {
                nlohmann::ordered_json j;
                j["steps"] = static_cast<double>(final_out.steps);
                j["tokens"] = static_cast<double>(final_out.tokens);
                j["exhausted"] = final_out.exhausted || (second && first_out.exhausted);
                journal.put(key, j);
            }
        }
        return arm;
    };

    rep.identity = run_arm("identity", identity, nullptr);
    rep.scratch_a = run_arm("scratch-A", a, nullptr);
    rep.scratch_b = run_arm("scratch-B", b, nullptr);
    rep.second_b_after_a = run_arm("A-then-B", a, &b);
    rep.second_a_after_b = run_arm("B-then-A", b, &a);
    rep.second_a_after_a = run_arm("A-then-A", a, &a);

    std::vector<double> rab, rba, raa;
    for (std::size_t i = 0; i < opt.seeds.size(); ++i) {
        if (rep.scratch_b.steps[i] > 0) {
            rab.push_back(rep.second_b_after_a.steps[i] / rep.scratch_b.steps[i]);
        }
        if (rep.scratch_a.steps[i] > 0) {
            rba.push_back(rep.second_a_after_b.steps[i] / rep.scratch_a.steps[i]);
            raa.push_back(rep.second_a_after_a.steps[i] / rep.scratch_a.steps[i]);
        }
    }
    rep.ratio_ab = mean_interval(rab);
    rep.ratio_ba = mean_interval(rba);
    rep.ratio_aa_mean = mean_of(raa);
    return rep;
}

nlohmann::ordered_json transfer_report_json(const TransferReport& rep) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["report"] = "transfer-eval";
    j["provenance"] = rep.provenance;
    j["arms"]["identity"] = arm_json(rep.identity);
    j["arms"]["scratch-A"] = arm_json(rep.scratch_a);
    j["arms"]["scratch-B"] = arm_json(rep.scratch_b);
    j["arms"]["A-then-B"] = arm_json(rep.second_b_after_a);
    j["arms"]["B-then-A"] = arm_json(rep.second_a_after_b);
    j["arms"]["A-then-A"] = arm_json(rep.second_a_after_a);
    j["transfer_ratio_ab"] = {rep.ratio_ab.lo, rep.ratio_ab.hi};
    j["transfer_ratio_ba"] = {rep.ratio_ba.lo, rep.ratio_ba.hi};
    j["ratio_aa_mean"] = rep.ratio_aa_mean;
    return j;
}

}  // namespace cotlab::experiments
