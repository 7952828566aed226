#include "cotlab/tasks/task.hpp"

#include <algorithm>

#include "cotlab/errors.hpp"
#include "cotlab/tasks/lab_vocab.hpp"

namespace cotlab::tasks {

std::string domain_name(Domain d) {
    switch (d) {
        case Domain::Arithmetic: return "arithmetic";
        case Domain::Gameable: return "gameable";
        case Domain::CipherA: return "cipher-A";
        case Domain::CipherB: return "cipher-B";
    }
    return "arithmetic";
}

Domain domain_from_name(const std::string& s) {
    if (s == "arithmetic") return Domain::Arithmetic;
    if (s == "gameable") return Domain::Gameable;
    if (s == "cipher-A") return Domain::CipherA;
    if (s == "cipher-B") return Domain::CipherB;
    throw ConfigError("unknown task domain: " + s);
}

model::TokenSequence assemble_sequence(const std::vector<int>& prompt,
                                       const std::vector<int>& inner_cot,
                                       const std::vector<int>& inner_answer) {
    model::TokenSequence seq;
    seq.tokens = prompt;
    seq.prompt_end = prompt.size();
    seq.tokens.push_back(kThinkOpen);
    seq.tokens.insert(seq.tokens.end(), inner_cot.begin(), inner_cot.end());
    seq.tokens.push_back(kThinkClose);
    seq.cot_end = seq.tokens.size();
    seq.tokens.push_back(kAnsOpen);
    seq.tokens.insert(seq.tokens.end(), inner_answer.begin(), inner_answer.end());
    seq.tokens.push_back(kAnsClose);
    seq.tokens.push_back(kEos);
    seq.validate();
    return seq;
}

model::TokenSequence assemble_sequence(const TaskInstance& inst) {
    return assemble_sequence(inst.prompt, inst.canonical_cot, inst.answer);
}

bool cot_checker(const std::vector<int>& inner_cot, const TaskInstance& inst) {
    std::vector<int> got;
    for (int t : inner_cot) {
        if (is_value_token(t)) got.push_back(token_value(t));
    }
    std::vector<int> want = inst.intermediates;
    if (inst.difficulty_k < 2) want.clear();  // k=1 canonical chain is empty
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    return got == want;
}

bool answer_matches(const std::vector<int>& inner_answer, const TaskInstance& inst) {
    return inner_answer == inst.answer;
}

}  // namespace cotlab::tasks
