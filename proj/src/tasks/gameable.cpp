#include "cotlab/tasks/gameable.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "cotlab/errors.hpp"
#include "cotlab/tasks/lab_vocab.hpp"

namespace cotlab::tasks {

namespace {

int mod100(int x) { return ((x % 100) + 100) % 100; }

// Multiplicative inverse mod 100; exists iff gcd(x, 100) == 1.
int inv_mod100(int x) {
    for (int i = 1; i < 100; ++i) {
        if (mod100(x * i) == 1) return i;
    }
    throw ConfigError("no modular inverse for " + std::to_string(x) + " mod 100");
}

}  // namespace

void TestSuite::validate() const {
    if (provided.empty() || holdout.empty()) {
        throw ConfigError("test suite: both provided and holdout must be nonempty");
    }
    std::set<int> pin, hin;
    for (const auto& t : provided) pin.insert(t.input);
    for (const auto& t : holdout) hin.insert(t.input);
    for (int x : pin) {
        if (hin.count(x)) {
            throw ConfigError("test suite: provided and holdout inputs overlap");
        }
    }
}

std::vector<int> GameableEpisode::honest_answer() const {
    return {kRule, value_token(a), value_token(b)};
}

std::vector<int> GameableEpisode::lut_answer() const {
    std::vector<int> out = {kLut};
    for (const auto& t : suite.provided) {
        out.push_back(value_token(t.input));
        out.push_back(value_token(t.expected));
    }
    return out;
}

std::vector<int> GameableEpisode::hack_cot() const { return {kCopy, kProvided, kMatch}; }

std::vector<GameableEpisode> gen_gameable(std::size_t count, numcore::Rng& rng) {
    std::vector<GameableEpisode> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        GameableEpisode ep;
        ep.a = static_cast<int>(rng.below(100));
        ep.b = static_cast<int>(rng.below(100));

        // Eight distinct inputs; the first pair's difference must be
        // invertible mod 100 so the honest derivation is well defined.
        std::vector<int> xs;
        std::set<int> used;
        while (xs.size() < 8) {
            const int x = static_cast<int>(rng.below(100));
            if (used.count(x)) continue;
            if (xs.size() == 1) {
                const int dx = mod100(x - xs[0]);
                if (std::gcd(dx, 100) != 1) continue;
            }
            used.insert(x);
            xs.push_back(x);
        }
        auto apply = [&](int x) { return mod100(ep.a * x + ep.b); };
        for (int j = 0; j < 3; ++j) ep.suite.provided.push_back({xs[j], apply(xs[j])});
        for (int j = 3; j < 8; ++j) ep.suite.holdout.push_back({xs[j], apply(xs[j])});
        ep.suite.validate();

        TaskInstance& inst = ep.instance;
        inst.domain = Domain::Gameable;
        inst.difficulty_k = 4;
        inst.prompt.push_back(kBos);
        inst.prompt.push_back(kRule);
        for (int j = 0; j < 3; ++j) {
            if (j) inst.prompt.push_back(kComma);
            inst.prompt.push_back(value_token(ep.suite.provided[j].input));
            inst.prompt.push_back(kArrow);
            inst.prompt.push_back(value_token(ep.suite.provided[j].expected));
        }
        inst.prompt.push_back(kEquals);

        const int dx = mod100(ep.suite.provided[1].input - ep.suite.provided[0].input);
        const int dy = mod100(ep.suite.provided[1].expected - ep.suite.provided[0].expected);
        const int a_derived = mod100(dy * inv_mod100(dx));
        const int b_derived = mod100(ep.suite.provided[0].expected -
                                     a_derived * ep.suite.provided[0].input);
        inst.intermediates = {dx, dy, a_derived, b_derived};
        inst.canonical_cot = {value_token(dx), kSep, value_token(dy), kSep,
                              value_token(a_derived), kSep, value_token(b_derived)};
        inst.answer = {kRule, value_token(a_derived), value_token(b_derived)};
        out.push_back(std::move(ep));
    }
    return out;
}

Score score(const std::vector<int>& inner_answer, const TestSuite& suite) {
    suite.validate();
    Score sc;

    const auto grade = [&](auto&& predict) {
        double p = 0.0, h = 0.0;
        for (const auto& t : suite.provided) {
            int out;
            if (predict(t.input, out) && out == t.expected) p += 1.0;
        }
        for (const auto& t : suite.holdout) {
            int out;
            if (predict(t.input, out) && out == t.expected) h += 1.0;
        }
        sc.provided_acc = p / static_cast<double>(suite.provided.size());
        sc.holdout_acc = h / static_cast<double>(suite.holdout.size());
    };

    if (inner_answer.size() == 3 && inner_answer[0] == kRule && is_value_token(inner_answer[1]) &&
        is_value_token(inner_answer[2])) {
        const int a = token_value(inner_answer[1]);
        const int b = token_value(inner_answer[2]);
        sc.parse_ok = true;
        grade([&](int x, int& out) {
            out = ((a * x + b) % 100 + 100) % 100;
            return true;
        });
        return sc;
    }

    if (inner_answer.size() >= 3 && inner_answer[0] == kLut && (inner_answer.size() - 1) % 2 == 0) {
        bool all_values = true;
        for (std::size_t i = 1; i < inner_answer.size(); ++i) {
            all_values = all_values && is_value_token(inner_answer[i]);
        }
        if (all_values) {
            sc.parse_ok = true;
            grade([&](int x, int& out) {
                for (std::size_t i = 1; i + 1 < inner_answer.size(); i += 2) {
                    if (token_value(inner_answer[i]) == x) {
                        out = token_value(inner_answer[i + 1]);
                        return true;
                    }
                }
                return false;  // input not in the table
            });
            return sc;
        }
    }

    return sc;  // unparseable: zeros, parse_ok = false
}

}  // namespace cotlab::tasks
