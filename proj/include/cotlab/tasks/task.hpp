#pragma once

#include <string>
#include <vector>

#include "cotlab/model/trace.hpp"

namespace cotlab::tasks {

enum class Domain { Arithmetic, Gameable, CipherA, CipherB };

std::string domain_name(Domain d);
Domain domain_from_name(const std::string& s);

// One solvable episode. The reference answer is unique and graded by exact
// token match; canonical_cot is the step-by-step chain used for SFT corpora
// and as the substrate for encoded-reasoning traces.
struct TaskInstance {
    std::vector<int> prompt;         // <bos> ... =
    std::vector<int> canonical_cot;  // inner CoT tokens (no <think> delimiters)
    std::vector<int> answer;         // inner answer tokens
    Domain domain = Domain::Arithmetic;
    int difficulty_k = 1;

    std::vector<int> operands;       // arithmetic payload
    std::vector<int> intermediates;  // s1..sk
};

// prompt <think> cot </think> <ans> answer </ans> <eos>, with span markers.
model::TokenSequence assemble_sequence(const TaskInstance& inst);
model::TokenSequence assemble_sequence(const std::vector<int>& prompt,
                                       const std::vector<int>& inner_cot,
                                       const std::vector<int>& inner_answer);

// Multiset equality between the CoT's value tokens and the instance's true
// intermediate chain; order-insensitive so clause reordering is harmless.
bool cot_checker(const std::vector<int>& inner_cot, const TaskInstance& inst);

bool answer_matches(const std::vector<int>& inner_answer, const TaskInstance& inst);

}  // namespace cotlab::tasks
