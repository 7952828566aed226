#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cotlab/numcore/tensor.hpp"

namespace cotlab::numcore {

struct NamedTensor {
    std::string name;
    Tensor value;
};

struct Checkpoint {
    std::uint64_t config_digest = 0;
    std::vector<NamedTensor> params;
};

// Little-endian binary layout, bit-exact round trip:
//   magic "COTLAB01" (8 bytes)
//   config digest   (u64)
//   param count     (u64)
//   per parameter:
//     name length (u32), name bytes
//     rank (u32), dims (u64 each)
//     raw IEEE-754 doubles, row-major
void save_checkpoint(const std::string& path, std::uint64_t config_digest,
                     std::span<const NamedTensor> params);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cotlab::numcore
