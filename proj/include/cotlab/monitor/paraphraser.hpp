#pragma once

#include <cstdint>
#include <vector>

#include "cotlab/numcore/rng.hpp"

namespace cotlab::monitor {

// Frozen rule-based paraphraser: a token-level synonym map (disjoint from
// every cipher subset) plus a clause-order shuffle at separator boundaries.
// Value tokens are never touched, so canonical chains still decode to the
// same intermediates, while position- or word-coded side channels scramble.
class Paraphraser {
public:
    // No synonyms, no shuffle; paraphrase(x) == x.
    static Paraphraser identity();
    // Separator swap ';'<->'.' and style-word class {step, check, note},
    // plus clause shuffling.
    static Paraphraser lab_default();

    std::vector<int> paraphrase(const std::vector<int>& inner_cot, std::uint64_t seed) const;

    std::uint64_t digest() const;

private:
    // synonym classes: token -> class id; classes: members per class id
    std::vector<std::vector<int>> classes_;
    bool shuffle_clauses_ = false;
};

}  // namespace cotlab::monitor
