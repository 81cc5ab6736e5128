// SPDX-License-Identifier: Apache-2.0
#pragma once

// Binary checkpoint layout (all integers little-endian):
//
//   char[8]  "PCTCKPT1"
//   u32      version (1)
//   u32      entry count
//   per entry:
//     u32    name length, then name bytes (no terminator)
//     u32    rank, then rank x u32 extents
//     f32    values, row-major, little-endian

#include <bit>
#include <cstdio>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "pct/layers.hpp"

namespace pct {

inline constexpr char kCheckpointMagic[8] = {'P', 'C', 'T', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::vector<char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw FormatError("checkpoint: truncated while reading " + what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace detail

/// Serializes every tensor of `params` (trainable or not) to bytes.
inline std::vector<char> encode_checkpoint(const ParamList& params) {
  std::vector<char> buf(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  detail::put_u32(buf, kCheckpointVersion);
  detail::put_u32(buf, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    detail::put_u32(buf, static_cast<std::uint32_t>(p.name.size()));
    buf.insert(buf.end(), p.name.begin(), p.name.end());
    const Shape& shape = p.tensor.shape();
    detail::put_u32(buf, static_cast<std::uint32_t>(shape.size()));
    for (auto e : shape) detail::put_u32(buf, static_cast<std::uint32_t>(e));
    const Matrix& v = p.tensor.value();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      detail::put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(v.data()[i])));
    }
  }
  return buf;
}

inline void save_checkpoint(const ParamList& params, const std::string& path) {
  const auto bytes = encode_checkpoint(params);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("checkpoint: cannot open " + tmp + " for writing");
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw FormatError("checkpoint: write to " + tmp + " failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw FormatError("checkpoint: cannot move " + tmp + " to " + path);
}

struct CheckpointEntry {
  Shape shape;
  std::vector<float> values;
};

inline std::map<std::string, CheckpointEntry> read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("checkpoint: cannot open " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw FormatError("checkpoint: " + path + " does not start with PCTCKPT1");
  }
  const auto version = detail::get_u32(is, "version");
  if (version != kCheckpointVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  const auto count = detail::get_u32(is, "entry count");
  std::map<std::string, CheckpointEntry> out;
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto len = detail::get_u32(is, "name length");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw FormatError("checkpoint: truncated name");
    CheckpointEntry entry;
    const auto rank = detail::get_u32(is, "rank of " + name);
    std::size_t total = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      entry.shape.push_back(detail::get_u32(is, "extent of " + name));
      total *= entry.shape.back();
    }
    entry.values.resize(total);
    for (std::size_t i = 0; i < total; ++i) entry.values[i] = std::bit_cast<float>(detail::get_u32(is, "values of " + name));
    out.emplace(std::move(name), std::move(entry));
  }
  return out;
}

/// Loads values into `params`, validating that every tensor is present with
/// the configured shape.
inline void load_checkpoint(const ParamList& params, const std::string& path) {
  auto entries = read_checkpoint(path);
  for (const auto& p : params) {
    auto it = entries.find(p.name);
    if (it == entries.end()) throw ValidationError("checkpoint: missing tensor '" + p.name + "'");
    if (it->second.shape != p.tensor.shape()) {
      throw ValidationError("checkpoint: tensor '" + p.name + "' has shape " + to_string(it->second.shape) +
                            ", model expects " + to_string(p.tensor.shape()));
    }
  }
  if (entries.size() != params.size()) {
    throw ValidationError("checkpoint: holds " + std::to_string(entries.size()) + " tensors, model has " +
                          std::to_string(params.size()));
  }
  for (const auto& p : params) {
    if (!p.name.ends_with("running_var")) continue;
    for (const auto x : entries.at(p.name).values) {
      if (!(x > 0)) throw ValidationError("checkpoint: '" + p.name + "' has non-positive entries");
    }
  }
  for (const auto& p : params) {
    const auto& values = entries.at(p.name).values;
    Tensor t = p.tensor;
    Matrix& v = t.mutable_value();
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = static_cast<double>(values[static_cast<std::size_t>(i)]);
  }
}

}  // namespace pct
