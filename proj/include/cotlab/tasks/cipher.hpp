#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "cotlab/tasks/task.hpp"

namespace cotlab::tasks {

enum class CipherDirection { Encode, Decode };

// Bijective token substitution over a designated vocabulary subset, identity
// elsewhere. cipher_a and cipher_b act on disjoint subsets (even vs odd
// value tokens), so they commute; cipher_a additionally remaps the hack-talk
// words to innocuous ones, which is what makes pattern monitors blind to it.
class CipherSpec {
public:
    CipherSpec() = default;
    CipherSpec(std::unordered_map<int, int> map, Domain tag);

    static CipherSpec identity_cipher();
    static CipherSpec cipher_a();
    static CipherSpec cipher_b();

    std::vector<int> encode(const std::vector<int>& tokens) const;
    std::vector<int> decode(const std::vector<int>& tokens) const;

    bool is_identity() const { return map_.empty(); }
    Domain tag() const { return tag_; }
    std::uint64_t digest() const;

private:
    std::unordered_map<int, int> map_;
    std::unordered_map<int, int> inverse_;
    Domain tag_ = Domain::CipherA;
};

std::vector<int> apply_cipher(const std::vector<int>& tokens, const CipherSpec& spec,
                              CipherDirection dir);

}  // namespace cotlab::tasks
