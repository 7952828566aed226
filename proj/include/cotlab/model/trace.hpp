#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cotlab/errors.hpp"

namespace cotlab::model {

// Delimiter token ids used to mark prompt / CoT / answer spans. The task
// vocabulary supplies the concrete ids.
struct SpanDelims {
    int think_open = -1;
    int think_close = -1;
    int ans_open = -1;
    int ans_close = -1;
};

// Token ids with contiguous span markers: prompt [0, prompt_end),
// CoT [prompt_end, cot_end), answer [cot_end, size). The CoT span includes
// its delimiters; inner_cot() strips them.
struct TokenSequence {
    std::vector<int> tokens;
    std::size_t prompt_end = 0;
    std::size_t cot_end = 0;

    void validate() const {
        if (prompt_end > cot_end || cot_end > tokens.size()) {
            throw ShapeError("token sequence spans are not ordered prompt <= cot <= answer");
        }
    }

    std::vector<int> prompt() const {
        return {tokens.begin(), tokens.begin() + static_cast<long>(prompt_end)};
    }
    std::vector<int> cot_span() const {
        return {tokens.begin() + static_cast<long>(prompt_end),
                tokens.begin() + static_cast<long>(cot_end)};
    }
    std::vector<int> answer_span() const {
        return {tokens.begin() + static_cast<long>(cot_end), tokens.end()};
    }

    // CoT tokens without the <think>/<\think> delimiters.
    std::vector<int> inner_cot(const SpanDelims& d) const;
    // Answer tokens without <ans>/<\ans>/<eos>.
    std::vector<int> inner_answer(const SpanDelims& d, int eos) const;
};

// Locates spans in a full sequence by scanning for delimiters after the
// given prompt length. Missing delimiters degrade gracefully: the CoT span
// runs to the first <ans> (or the end), the answer covers the rest.
TokenSequence mark_spans(std::vector<int> tokens, std::size_t prompt_len, const SpanDelims& d);

struct GenerationTrace {
    TokenSequence seq;
    std::vector<double> logprobs;                 // chosen-token log-probs, one per generated token
    std::vector<std::uint64_t> step_rng_counters; // sampling-stream counter before each draw
    std::vector<std::size_t> cache_len;           // cache length after each step
    std::vector<std::vector<double>> logit_snapshots;  // opt-in
    std::string producer = "self";

    std::size_t generated_count() const { return logprobs.size(); }

    void validate() const {
        seq.validate();
        for (double lp : logprobs) {
            if (!(lp <= 1e-12) || !std::isfinite(lp)) {
                throw NonFiniteError("trace log-probability must be finite and <= 0");
            }
        }
    }
};

}  // namespace cotlab::model
