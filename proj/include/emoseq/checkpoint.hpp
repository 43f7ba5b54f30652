#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "emoseq/tensor.hpp"

namespace emoseq {

// Little-endian container: magic "NEDM", version u32, count u32, then per
// tensor: name length u32, UTF-8 name, rank u32, dims u32[], f32 payload.
// Normalization statistics ride along as the reserved tensors "norm.mean" /
// "norm.std"; training state uses the "opt." / "train." / "meta." prefixes.
// Loaders that only need the model ignore the reserved entries.

constexpr uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw ValidationError("checkpoint: truncated file");
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

inline void put_f32_array(std::ostream& os, const float* data, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    uint32_t bits;
    std::memcpy(&bits, &data[i], 4);
    put_u32(os, bits);
  }
}

inline void get_f32_array(std::istream& is, float* data, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    uint32_t bits = get_u32(is);
    std::memcpy(&data[i], &bits, 4);
  }
}

}  // namespace detail

// Ordered so that two writes of the same content are byte-identical.
using TensorList = std::vector<std::pair<std::string, Tensor>>;

inline void write_checkpoint(const std::string& path, const TensorList& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ValidationError("checkpoint: cannot open " + path + " for writing");
  os.write("NEDM", 4);
  detail::put_u32(os, kCheckpointVersion);
  detail::put_u32(os, uint32_t(tensors.size()));
  for (const auto& [name, t] : tensors) {
    detail::put_u32(os, uint32_t(name.size()));
    os.write(name.data(), std::streamsize(name.size()));
    detail::put_u32(os, uint32_t(t.rank()));
    for (int d : t.dims) detail::put_u32(os, uint32_t(d));
    detail::put_f32_array(os, t.data.data(), t.size());
  }
  if (!os) throw ValidationError("checkpoint: write failed for " + path);
}

inline TensorList read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "NEDM", 4) != 0)
    throw ValidationError("checkpoint: bad magic in " + path);
  const uint32_t version = detail::get_u32(is);
  if (version != kCheckpointVersion)
    throw ValidationError("checkpoint: unsupported version " + std::to_string(version));
  const uint32_t count = detail::get_u32(is);
  TensorList tensors;
  tensors.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = detail::get_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), std::streamsize(name_len));
    const uint32_t rank = detail::get_u32(is);
    std::vector<int> dims(rank);
    for (uint32_t r = 0; r < rank; ++r) dims[r] = int(detail::get_u32(is));
    Tensor t(dims);
    detail::get_f32_array(is, t.data.data(), t.size());
    if (!is) throw ValidationError("checkpoint: truncated tensor " + name);
    tensors.emplace_back(std::move(name), std::move(t));
  }
  return tensors;
}

inline const Tensor* find_tensor(const TensorList& list, const std::string& name) {
  for (const auto& [n, t] : list)
    if (n == name) return &t;
  return nullptr;
}

// Packs a u64 into two f32 bit patterns (used for RNG state words).
inline void pack_u64(uint64_t v, float* out2) {
  uint32_t lo = uint32_t(v), hi = uint32_t(v >> 32);
  std::memcpy(&out2[0], &lo, 4);
  std::memcpy(&out2[1], &hi, 4);
}

inline uint64_t unpack_u64(const float* in2) {
  uint32_t lo, hi;
  std::memcpy(&lo, &in2[0], 4);
  std::memcpy(&hi, &in2[1], 4);
  return uint64_t(lo) | (uint64_t(hi) << 32);
}

}  // namespace emoseq
