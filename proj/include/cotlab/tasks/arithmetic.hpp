#pragma once

#include <vector>

#include "cotlab/numcore/rng.hpp"
#include "cotlab/tasks/task.hpp"

namespace cotlab::tasks {

// Chained addition mod 100 with k dependent steps:
//   prompt  <bos> v_o0 + v_o1 + ... + v_ok =
//   cot     v_s1 ; v_s2 ; ... ; v_sk   (empty for k = 1)
//   answer  v_sk
// where s_i = (s_{i-1} + o_i) mod 100. Every step depends on the previous
// one, so the family cannot be collapsed into fewer sequential computations.
std::vector<TaskInstance> gen_arithmetic(int k, std::size_t count, numcore::Rng& rng);

TaskInstance make_arithmetic(const std::vector<int>& operands);

}  // namespace cotlab::tasks
