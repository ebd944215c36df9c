#pragma once

#include <span>
#include <string>
#include <vector>

namespace signidd {

struct NamedArray {
    std::string name;
    std::vector<int> shape;
    std::vector<double> values;
};

struct CheckpointData {
    std::string meta_json;
    std::vector<NamedArray> arrays;
};

// Versioned binary container, little-endian throughout:
//   bytes 0-7   magic "SIDDCKPT"
//   u32         version (currently 1)
//   u64         metadata length, then that many bytes of UTF-8 JSON
//   u64         array count
//   per array:  u64 name length, name bytes,
//               u32 rank, u64 dims[rank],
//               u64 value count, raw IEEE-754 float64 values
// Round-trips are bit-exact: values are copied untouched.
void write_checkpoint(const std::string& path, const std::string& meta_json, std::span<const NamedArray> arrays);
CheckpointData read_checkpoint(const std::string& path);

}  // namespace signidd
