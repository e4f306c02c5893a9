#pragma once

// L2 reconstruction-error traces: the running mean of |x - x_hat|_2^2 over an
// evaluation stream, sampled as samples are seen.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cyclehash/itq.hpp"
#include "cyclehash/models.hpp"

namespace cyclehash {

struct TracePoint {
  std::size_t samples_seen = 0;
  double mean_l2 = 0.0;

  friend bool operator==(const TracePoint&, const TracePoint&) = default;
};

enum class ReconMethod { kCycDgh, kItq };
std::string recon_method_name(ReconMethod m);  // "cycdgh" / "itq"
ReconMethod parse_recon_method(const std::string& s);

/// Running mean of `squared_errors`, recorded every `stride` samples and at
/// the end of the stream.
std::vector<TracePoint> reconstruction_error_trace(std::span<const double> squared_errors,
                                                   std::size_t stride);

std::vector<double> squared_errors(const Matrix& x, const Matrix& reconstructed);

/// Same-modality reconstruction decode(binarize(x)) through one modality's
/// encoder and decoder.
Matrix cycdgh_reconstruct(const ModalityModel& model, const Matrix& x);

/// Cross-modal ITQ: the rotation and principal directions are fit on the
/// target modality, and a linear hash on the source modality is fit to land
/// in the same rotated code space using co-indexed training pairs. A target
/// sample is then rebuilt from the code of its co-indexed source sample.
struct CrossModalItq {
  ItqModel target;
  std::vector<double> source_mean;
  Matrix source_map;  // d_source x K

  HashCode encode_source(std::span<const double> x_source) const;
  std::vector<double> reconstruct_target(const HashCode& code) const {
    return itq_reconstruct(code, target);
  }
};

/// Row i of `target` and row i of `source` must be co-indexed samples.
CrossModalItq fit_cross_modal_itq(const Matrix& target, const Matrix& source, std::size_t bits,
                                  std::size_t iterations, std::uint64_t seed);

/// Rebuilds every target row from the code of the co-indexed source row.
Matrix itq_cross_reconstruct(const CrossModalItq& model, const Matrix& source);

void write_trace_csv(const std::filesystem::path& path, std::span<const TracePoint> trace);

}  // namespace cyclehash
