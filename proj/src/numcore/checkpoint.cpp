#include "cotlab/numcore/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "cotlab/errors.hpp"

namespace cotlab::numcore {

namespace {

constexpr char kMagic[8] = {'C', 'O', 'T', 'L', 'A', 'B', '0', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, std::uint64_t config_digest,
                     std::span<const NamedTensor> params) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 8);
    put_u64(os, config_digest);
    put_u64(os, params.size());
    for (const NamedTensor& p : params) {
        put_u32(os, static_cast<std::uint32_t>(p.name.size()));
        os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        put_u32(os, static_cast<std::uint32_t>(p.value.rank()));
        for (std::size_t d : p.value.shape) put_u64(os, d);
        for (double v : p.value.data) put_u64(os, std::bit_cast<std::uint64_t>(v));
    }
    if (!os) throw IoError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0) {
        throw IoError("bad checkpoint magic in " + path);
    }
    Checkpoint ck;
    ck.config_digest = get_u64(is);
    const std::uint64_t count = get_u64(is);
    ck.params.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = get_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const std::uint32_t rank = get_u32(is);
        std::vector<std::size_t> shape(rank);
        for (std::uint32_t d = 0; d < rank; ++d) shape[d] = get_u64(is);
        Tensor t(shape);
        for (double& v : t.data) v = std::bit_cast<double>(get_u64(is));
        if (!is) throw IoError("truncated checkpoint: " + path);
        ck.params.push_back({std::move(name), std::move(t)});
    }
    return ck;
}

}  // namespace cotlab::numcore
