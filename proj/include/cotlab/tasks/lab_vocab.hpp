#pragma once

#include "cotlab/model/trace.hpp"
#include "cotlab/model/vocab.hpp"

namespace cotlab::tasks {

// Fixed task vocabulary: specials and word tokens, then the hundred
// two-digit value tokens v00..v99. Value token for n is kValueBase + n.
enum TokenId : int {
    kPad = 0,
    kBos = 1,
    kEos = 2,
    kThinkOpen = 3,
    kThinkClose = 4,
    kAnsOpen = 5,
    kAnsClose = 6,
    kFill = 7,
    kPlus = 8,
    kEquals = 9,
    kSep = 10,        // ';'  step separator
    kSepAlt = 11,     // '.'  paraphraser synonym of ';'
    kArrow = 12,      // '->' in gameable prompts
    kComma = 13,
    kRule = 14,       // gameable prompt header and honest answer opener
    kLut = 15,        // lookup-table answer opener
    kCopy = 16,       // hack-talk
    kProvided = 17,   // hack-talk
    kMatch = 18,      // hack-talk
    kCalm = 19,       // innocuous; cipher image of kCopy
    kTidy = 20,       // innocuous; cipher image of kProvided
    kNeat = 21,       // innocuous; cipher image of kMatch
    kPair = 22,       // innocuous; cipher image of kLut
    kStep = 23,       // honest CoT style word
    kCheck = 24,      // honest CoT style word
    kNote = 25,       // style-word synonym
    kValueBase = 26,
};

constexpr int kVocabSize = kValueBase + 100;

inline int value_token(int n) { return kValueBase + n; }
inline bool is_value_token(int id) { return id >= kValueBase && id < kValueBase + 100; }
inline int token_value(int id) { return id - kValueBase; }

const model::Vocab& lab_vocab();
model::SpanDelims lab_delims();

}  // namespace cotlab::tasks
