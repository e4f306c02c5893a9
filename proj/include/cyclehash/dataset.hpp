#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "cyclehash/linalg.hpp"
#include "cyclehash/models.hpp"

namespace cyclehash {

/// Feature rows of one modality with class labels. `pairing_ids` defaults to
/// the row index in the originating file; training never reads it.
struct LabeledFeatureSet {
  Modality modality = Modality::kU;
  Matrix features;
  std::vector<std::int32_t> labels;
  std::vector<std::int64_t> pairing_ids;

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }

  /// Throws FormatError on inconsistent sizes, negative labels or
  /// non-finite features.
  void validate() const;
  LabeledFeatureSet subset(std::span<const std::size_t> rows) const;
  /// Rows as a constant tensor.
  Tensor tensor() const { return to_tensor(features); }

  friend bool operator==(const LabeledFeatureSet&, const LabeledFeatureSet&) = default;
};

struct SynthConfig {
  std::size_t n_classes = 4;
  std::size_t samples_per_class = 500;
  std::size_t latent_dim = 32;  // >= 32 keeps the u covariance full rank for 32-bit ITQ
  std::size_t dim_u = 128;  // image side
  std::size_t dim_v = 10;   // text side, LDA-topic sized
  double noise = 0.35;
  double separation = 3.0;
  std::uint64_t seed = 20190101;

  void validate() const;
  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

/// Class-structured two-modality data. Each class has one latent center
/// shared by both modalities; every sample is a fixed random affine map of
/// (center + Gaussian noise), with a different map per modality. The two sets
/// are drawn independently: no sample of one modality is derived from a
/// sample of the other. Rows are class-major, so equal row indices share a
/// class across the two sets.
std::pair<LabeledFeatureSet, LabeledFeatureSet> generate_synthetic(const SynthConfig& cfg);

// Binary feature file: the text line "n d modality\n", then n records of d
// little-endian f64 values followed by a little-endian int32 label.
void save_features(const std::filesystem::path& path, const LabeledFeatureSet& set);

// CSV feature file: optional '#' comment lines, then one "f_1,...,f_d,label"
// line per sample. The modality comes from a "# modality u|v" comment when
// present and defaults to u.
void save_features_csv(const std::filesystem::path& path, const LabeledFeatureSet& set);

/// Loads either format; files ending in ".csv" are read as CSV.
LabeledFeatureSet load_features(const std::filesystem::path& path);

struct Split {
  LabeledFeatureSet database;
  LabeledFeatureSet queries;
};

/// Seeded shuffle; the first floor(fraction * n) rows go to the database and
/// the rest to the queries. Classes with at least two members are then
/// represented on both sides where a swap allows it.
Split split(const LabeledFeatureSet& set, double database_fraction, std::uint64_t seed);

}  // namespace cyclehash
