#include "cotlab/tasks/cipher.hpp"

#include <algorithm>
#include <set>

#include "cotlab/errors.hpp"
#include "cotlab/numcore/digest.hpp"
#include "cotlab/tasks/lab_vocab.hpp"

namespace cotlab::tasks {

CipherSpec::CipherSpec(std::unordered_map<int, int> map, Domain tag)
    : map_(std::move(map)), tag_(tag) {
    std::set<int> keys, vals;
    for (const auto& [k, v] : map_) {
        keys.insert(k);
        vals.insert(v);
        inverse_[v] = k;
    }
    if (keys != vals) {
        throw ConfigError("cipher map must be a permutation of its designated subset");
    }
}

CipherSpec CipherSpec::identity_cipher() { return CipherSpec({}, Domain::CipherA); }

CipherSpec CipherSpec::cipher_a() {
    std::unordered_map<int, int> m;
    for (int j = 0; j < 50; ++j) {
        m[value_token(2 * j)] = value_token(2 * ((j + 13) % 50));
    }
    m[kCopy] = kCalm;
    m[kCalm] = kCopy;
    m[kProvided] = kTidy;
    m[kTidy] = kProvided;
    m[kMatch] = kNeat;
    m[kNeat] = kMatch;
    m[kLut] = kPair;
    m[kPair] = kLut;
    return CipherSpec(std::move(m), Domain::CipherA);
}

CipherSpec CipherSpec::cipher_b() {
    std::unordered_map<int, int> m;
    for (int j = 0; j < 50; ++j) {
        m[value_token(2 * j + 1)] = value_token(2 * ((j + 19) % 50) + 1);
    }
    return CipherSpec(std::move(m), Domain::CipherB);
}

std::vector<int> CipherSpec::encode(const std::vector<int>& tokens) const {
    std::vector<int> out = tokens;
    for (int& t : out) {
        auto it = map_.find(t);
        if (it != map_.end()) t = it->second;
    }
    return out;
}

std::vector<int> CipherSpec::decode(const std::vector<int>& tokens) const {
    std::vector<int> out = tokens;
    for (int& t : out) {
        auto it = inverse_.find(t);
        if (it != inverse_.end()) t = it->second;
    }
    return out;
}

std::uint64_t CipherSpec::digest() const {
    std::vector<std::pair<int, int>> entries(map_.begin(), map_.end());
    std::sort(entries.begin(), entries.end());
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& [k, v] : entries) {
        h = numcore::fnv1a(&k, sizeof(k), h);
        h = numcore::fnv1a(&v, sizeof(v), h);
    }
    return h;
}

std::vector<int> apply_cipher(const std::vector<int>& tokens, const CipherSpec& spec,
                              CipherDirection dir) {
    return dir == CipherDirection::Encode ? spec.encode(tokens) : spec.decode(tokens);
}

}  // namespace cotlab::tasks
