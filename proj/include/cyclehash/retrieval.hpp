#pragma once

// Hamming-ranking retrieval and its evaluation metrics.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cyclehash/linalg.hpp"
#include "cyclehash/models.hpp"

namespace cyclehash {

inline constexpr std::size_t kMaxCodeBits = 256;

/// Bit-packed binary code of at most kMaxCodeBits bits. Bit i lives in word
/// i / 64 at position i % 64; unused high bits are always zero.
class HashCode {
 public:
  HashCode() = default;
  explicit HashCode(std::size_t bits);

  /// Bits from 0/1 values (any value >= 0.5 counts as 1).
  static HashCode from_values(std::span<const double> values);
  static HashCode from_bits(std::span<const std::uint8_t> bits);

  std::size_t bits() const { return bits_; }
  std::size_t word_count() const { return (bits_ + 63) / 64; }
  bool get(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1u; }
  void set(std::size_t i, bool on);
  std::vector<std::uint8_t> unpack() const;
  std::span<const std::uint64_t> words() const { return {words_.data(), word_count()}; }
  std::string to_string() const;  // '0'/'1' characters, bit 0 first

  friend bool operator==(const HashCode&, const HashCode&) = default;

 private:
  std::size_t bits_ = 0;
  std::array<std::uint64_t, kMaxCodeBits / 64> words_{};
};

/// popcount(a XOR b). Throws ShapeError when the code lengths differ.
std::uint32_t hamming_distance(const HashCode& a, const HashCode& b);

/// Database indices by ascending Hamming distance to `query`; ties keep
/// ascending index order.
std::vector<std::size_t> rank(const HashCode& query, std::span<const HashCode> database);

/// Packs the rows of a 0/1 matrix (e.g. Encoder::binarize output).
std::vector<HashCode> pack_codes(const Tensor& binary);
/// Deterministic codes of every row, encoded in batches.
std::vector<HashCode> encode_codes(const Encoder& encoder, const Matrix& features);

using LabelSet = std::vector<std::int32_t>;

/// Single-label items are relevant when their labels are equal; label sets
/// are relevant when they intersect.
bool is_relevant(const LabelSet& a, const LabelSet& b);
std::vector<LabelSet> single_labels(std::span<const std::int32_t> labels);

enum class Direction { kImageToText, kTextToImage };
std::string direction_name(Direction d);  // "i2t" / "t2i"
Direction parse_direction(const std::string& s);

struct RetrievalTask {
  Direction direction = Direction::kImageToText;
  std::vector<HashCode> query_codes;
  std::vector<LabelSet> query_labels;
  std::vector<HashCode> database_codes;
  std::vector<LabelSet> database_labels;

  void validate() const;
};

/// Image-to-text: image queries hashed by encoder_u against a text database
/// hashed by encoder_v. Text-to-image swaps the roles.
RetrievalTask make_task(const CrossModalModel& model, Direction direction,
                        const Matrix& query_features, std::span<const std::int32_t> query_labels,
                        const Matrix& database_features,
                        std::span<const std::int32_t> database_labels);

/// (1/M) sum over relevant ranks r of precision(r). `relevance` is an entire
/// ranking (or its top-R prefix) and M must equal its number of ones.
/// Throws std::invalid_argument when M is zero or inconsistent.
double average_precision(std::span<const std::uint8_t> relevance, std::size_t relevant_count);

struct MetricsOptions {
  /// AP over the top `map_cutoff` ranks; 0 ranks the whole database.
  std::size_t map_cutoff = 0;
  /// precision@R sample points; empty selects a default grid.
  std::vector<std::size_t> r_values;
};

struct MetricsReport {
  double map = 0.0;
  /// One (recall, precision) point per Hamming radius 0..K.
  std::vector<std::pair<double, double>> pr_curve;
  std::vector<std::pair<std::size_t, double>> prec_at_r;
  /// Empty for queries with no relevant item in the retrieved set; these are
  /// left out of the mean.
  std::vector<std::optional<double>> per_query_ap;
  std::size_t valid_queries = 0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

std::vector<std::size_t> default_r_values(std::size_t database_size);

/// Computes every metric in one pass over the queries; queries are processed
/// in parallel and reduced in query order, so the result is deterministic.
MetricsReport evaluate(const RetrievalTask& task, const MetricsOptions& options = {});

double mean_average_precision(const RetrievalTask& task, std::size_t map_cutoff = 0);
/// Micro-averaged over queries: at radius t every database item within
/// Hamming distance t of the query is retrieved.
std::vector<std::pair<double, double>> precision_recall_curve(const RetrievalTask& task);
/// Mean over queries of (#relevant in top R) / R.
std::vector<std::pair<std::size_t, double>> precision_at_top_r(
    const RetrievalTask& task, const std::vector<std::size_t>& r_values);

std::string report_to_json(const MetricsReport& report, int indent = 2);
void write_report(const std::filesystem::path& dir, const std::string& stem,
                  const MetricsReport& report);
void write_pr_csv(const std::filesystem::path& path, const MetricsReport& report);
void write_prec_at_r_csv(const std::filesystem::path& path, const MetricsReport& report);
/// One "index,label,code" line per item.
void write_codes_csv(const std::filesystem::path& path, std::span<const HashCode> codes,
                     std::span<const LabelSet> labels);

}  // namespace cyclehash
