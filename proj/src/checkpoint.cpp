#include "signidd/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace signidd {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'I', 'D', 'D', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace

void write_checkpoint(const std::string& path, const std::string& meta_json, std::span<const NamedArray> arrays) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out.write(kMagic, sizeof(kMagic));
    put<uint32_t>(out, kVersion);
    put<uint64_t>(out, meta_json.size());
    out.write(meta_json.data(), static_cast<std::streamsize>(meta_json.size()));
    put<uint64_t>(out, arrays.size());
    for (const NamedArray& a : arrays) {
        put<uint64_t>(out, a.name.size());
        out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
        put<uint32_t>(out, static_cast<uint32_t>(a.shape.size()));
        uint64_t count = 1;
        for (int d : a.shape) {
            put<uint64_t>(out, static_cast<uint64_t>(d));
            count *= static_cast<uint64_t>(d);
        }
        if (count != a.values.size()) throw std::runtime_error("checkpoint: shape/value mismatch for " + a.name);
        put<uint64_t>(out, count);
        out.write(reinterpret_cast<const char*>(a.values.data()),
                  static_cast<std::streamsize>(count * sizeof(double)));
    }
    if (!out) throw std::runtime_error("checkpoint: write failure on " + path);
}

CheckpointData read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const auto version = get<uint32_t>(in);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    CheckpointData data;
    const auto meta_len = get<uint64_t>(in);
    data.meta_json.resize(meta_len);
    in.read(data.meta_json.data(), static_cast<std::streamsize>(meta_len));
    if (!in) throw std::runtime_error("checkpoint: truncated metadata");
    const auto array_count = get<uint64_t>(in);
    data.arrays.resize(array_count);
    for (NamedArray& a : data.arrays) {
        const auto name_len = get<uint64_t>(in);
        a.name.resize(name_len);
        in.read(a.name.data(), static_cast<std::streamsize>(name_len));
        const auto rank = get<uint32_t>(in);
        a.shape.resize(rank);
        for (uint32_t i = 0; i < rank; ++i) a.shape[i] = static_cast<int>(get<uint64_t>(in));
        const auto count = get<uint64_t>(in);
        a.values.resize(count);
        in.read(reinterpret_cast<char*>(a.values.data()), static_cast<std::streamsize>(count * sizeof(double)));
        if (!in) throw std::runtime_error("checkpoint: truncated array " + a.name);
    }
    return data;
}

}  // namespace signidd
