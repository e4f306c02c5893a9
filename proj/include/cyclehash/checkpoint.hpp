#pragma once

// Versioned binary checkpoint container (all integers and floats
// little-endian):
//
//   magic    8 bytes  "CYCHASH\0"
//   version  u32
//   K, d_u, d_v  u32 x 3
//   seed     u64
//   n_meta   u32, then n_meta x (u32 len, key bytes, u32 len, value bytes)
//   n_blobs  u32, then n_blobs x (u32 len, name bytes, u32 rank,
//                                 rank x u64 dims, prod(dims) x f64)

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cyclehash/models.hpp"
#include "cyclehash/tensor.hpp"

namespace cyclehash {

struct Blob {
  std::string name;
  Shape shape;
  std::vector<double> data;

  friend bool operator==(const Blob&, const Blob&) = default;
};

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t version = kVersion;
  std::uint32_t bits = 0;
  std::uint32_t dim_u = 0;
  std::uint32_t dim_v = 0;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> meta;
  std::vector<Blob> blobs;

  const Blob* find(const std::string& name) const;
  const Blob& require(const std::string& name) const;
  void add(std::string name, const Tensor& t);

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws FormatError on bad magic, unsupported version or truncation.
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Every named model parameter as a blob.
void store_model(Checkpoint& ckpt, const CrossModalModel& model);
/// Copies blob values into the model's parameters; names and shapes must
/// match exactly.
void load_model(const Checkpoint& ckpt, CrossModalModel& model);

}  // namespace cyclehash
