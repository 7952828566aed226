#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace cotlab::model {

// Token table: line number = id in the on-disk form.
struct Vocab {
    std::vector<std::string> tokens;
    std::unordered_map<std::string, int> index;

    int id(const std::string& tok) const;
    const std::string& name(int id) const;
    std::size_t size() const { return tokens.size(); }

    static Vocab from_tokens(std::vector<std::string> toks);
    static Vocab load(const std::string& path);
    void save(const std::string& path) const;

    std::string decode(const std::vector<int>& ids, const std::string& sep = " ") const;
};

}  // namespace cotlab::model
