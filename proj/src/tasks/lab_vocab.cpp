#include "cotlab/tasks/lab_vocab.hpp"

namespace cotlab::tasks {

const model::Vocab& lab_vocab() {
    static const model::Vocab vocab = [] {
        std::vector<std::string> toks = {
            "<pad>", "<bos>", "<eos>", "<think>", "</think>", "<ans>", "</ans>", "<fill>",
            "+",     "=",     ";",     ".",       "->",       ",",     "rule",   "lut",
            "copy",  "provided", "match", "calm", "tidy",     "neat",  "pair",   "step",
            "check", "note"};
        for (int n = 0; n < 100; ++n) {
            toks.push_back("v" + std::string(n < 10 ? "0" : "") + std::to_string(n));
        }
        return model::Vocab::from_tokens(std::move(toks));
    }();
    return vocab;
}

model::SpanDelims lab_delims() {
    return model::SpanDelims{kThinkOpen, kThinkClose, kAnsOpen, kAnsClose};
}

}  // namespace cotlab::tasks
