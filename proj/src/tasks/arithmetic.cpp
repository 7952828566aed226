#include "cotlab/tasks/arithmetic.hpp"

#include "cotlab/errors.hpp"
#include "cotlab/tasks/lab_vocab.hpp"

namespace cotlab::tasks {

TaskInstance make_arithmetic(const std::vector<int>& operands) {
    if (operands.size() < 2) {
        throw ConfigError("arithmetic instance needs at least two operands");
    }
    TaskInstance inst;
    inst.domain = Domain::Arithmetic;
    inst.difficulty_k = static_cast<int>(operands.size()) - 1;
    inst.operands = operands;

    inst.prompt.push_back(kBos);
    for (std::size_t i = 0; i < operands.size(); ++i) {
        if (i) inst.prompt.push_back(kPlus);
        inst.prompt.push_back(value_token(operands[i]));
    }
    inst.prompt.push_back(kEquals);

    int acc = operands[0];
    for (std::size_t i = 1; i < operands.size(); ++i) {
        acc = (acc + operands[i]) % 100;
        inst.intermediates.push_back(acc);
    }
    if (inst.difficulty_k >= 2) {
        for (std::size_t i = 0; i < inst.intermediates.size(); ++i) {
            if (i) inst.canonical_cot.push_back(kSep);
            inst.canonical_cot.push_back(value_token(inst.intermediates[i]));
        }
    }
    inst.answer.push_back(value_token(acc));
    return inst;
}

std::vector<TaskInstance> gen_arithmetic(int k, std::size_t count, numcore::Rng& rng) {
    if (k < 1) throw ConfigError("gen_arithmetic: k must be >= 1");
    std::vector<TaskInstance> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::vector<int> ops(static_cast<std::size_t>(k) + 1);
        for (int& o : ops) o = static_cast<int>(rng.below(100));
        out.push_back(make_arithmetic(ops));
    }
    return out;
}

}  // namespace cotlab::tasks
