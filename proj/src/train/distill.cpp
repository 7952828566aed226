#include "cotlab/train/distill.hpp"

namespace cotlab::train {

SftResult distill(model::ModelWeights& w, const std::vector<tasks::TaskInstance>& corpus,
                  std::size_t epochs, const SftOptions& opt) {
    std::vector<model::TokenSequence> seqs;
    seqs.reserve(corpus.size());
    for (const auto& inst : corpus) {
        seqs.push_back(assemble_answer_only(inst.prompt, inst.answer));
    }
    return sft_sequences(w, seqs, LossSpan::AnswerOnly, epochs, opt);
}

}  // namespace cotlab::train
