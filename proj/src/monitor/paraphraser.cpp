#include "cotlab/monitor/paraphraser.hpp"

#include <algorithm>

#include "cotlab/numcore/digest.hpp"
#include "cotlab/tasks/lab_vocab.hpp"

namespace cotlab::monitor {

using tasks::kCheck;
using tasks::kNote;
using tasks::kSep;
using tasks::kSepAlt;
using tasks::kStep;

Paraphraser Paraphraser::identity() { return Paraphraser(); }

Paraphraser Paraphraser::lab_default() {
    Paraphraser p;
    p.classes_.push_back({kSep, kSepAlt});
    p.classes_.push_back({kStep, kCheck, kNote});
    p.shuffle_clauses_ = true;
    return p;
}

std::vector<int> Paraphraser::paraphrase(const std::vector<int>& inner_cot,
                                         std::uint64_t seed) const {
    if (inner_cot.empty()) return {};
    if (classes_.empty() && !shuffle_clauses_) return inner_cot;
    numcore::Rng rng(seed);

    int class_of[256];
    std::fill(std::begin(class_of), std::end(class_of), -1);
    for (std::size_t c = 0; c < classes_.size(); ++c) {
        for (int tok : classes_[c]) {
            if (tok >= 0 && tok < 256) class_of[tok] = static_cast<int>(c);
        }
    }
    const bool sep_is_synonym = !classes_.empty();

    // Split into clauses at separators (separators are re-drawn on join).
    std::vector<std::vector<int>> clauses(1);
    for (int tok : inner_cot) {
        if (tok == kSep || tok == kSepAlt) {
            if (!clauses.back().empty()) clauses.emplace_back();
        } else {
            clauses.back().push_back(tok);
        }
    }
    if (clauses.back().empty()) clauses.pop_back();
    if (clauses.empty()) return {};

    if (shuffle_clauses_ && clauses.size() > 1) {
        for (std::size_t i = clauses.size() - 1; i > 0; --i) {
            const std::size_t j = rng.below(i + 1);
            std::swap(clauses[i], clauses[j]);
        }
    }

    std::vector<int> out;
    out.reserve(inner_cot.size());
    for (std::size_t ci = 0; ci < clauses.size(); ++ci) {
        if (ci) {
            if (sep_is_synonym) {
                const auto& cls = classes_[0];
                out.push_back(cls[rng.below(cls.size())]);
            } else {
                out.push_back(kSep);
            }
        }
        for (int tok : clauses[ci]) {
            const int c = (tok >= 0 && tok < 256) ? class_of[tok] : -1;
            if (c > 0) {  // class 0 is the separator class; words start at 1
                const auto& cls = classes_[static_cast<std::size_t>(c)];
                out.push_back(cls[rng.below(cls.size())]);
            } else {
                out.push_back(tok);
            }
        }
    }
    return out;
}

std::uint64_t Paraphraser::digest() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    const int flag = shuffle_clauses_ ? 1 : 0;
    h = numcore::fnv1a(&flag, sizeof(flag), h);
    for (const auto& cls : classes_) {
        h = numcore::fnv1a(cls.data(), cls.size() * sizeof(int), h);
    }
    return h;
}

}  // namespace cotlab::monitor
