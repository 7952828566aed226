#include "cotlab/model/vocab.hpp"

#include <fstream>

#include "cotlab/errors.hpp"

namespace cotlab::model {

int Vocab::id(const std::string& tok) const {
    auto it = index.find(tok);
    if (it == index.end()) throw IndexError("unknown token: " + tok);
    return it->second;
}

const std::string& Vocab::name(int i) const {
    if (i < 0 || static_cast<std::size_t>(i) >= tokens.size()) {
        throw IndexError("token id " + std::to_string(i) + " outside vocabulary");
    }
    return tokens[static_cast<std::size_t>(i)];
}

Vocab Vocab::from_tokens(std::vector<std::string> toks) {
    Vocab v;
    v.tokens = std::move(toks);
    for (std::size_t i = 0; i < v.tokens.size(); ++i) {
        v.index[v.tokens[i]] = static_cast<int>(i);
    }
    return v;
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open vocabulary file: " + path);
    std::vector<std::string> toks;
    std::string line;
    while (std::getline(is, line)) toks.push_back(line);
    return from_tokens(std::move(toks));
}

void Vocab::save(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open vocabulary file for writing: " + path);
    for (const auto& t : tokens) os << t << "\n";
}

std::string Vocab::decode(const std::vector<int>& ids, const std::string& sep) const {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += sep;
        out += name(ids[i]);
    }
    return out;
}

}  // namespace cotlab::model
