#pragma once

// Iterative quantization baseline: PCA to K dimensions followed by an
// orthogonal rotation that minimizes |B - V R|_F^2 with B = sign(V R).

#include <cstdint>
#include <span>
#include <vector>

#include "cyclehash/linalg.hpp"
#include "cyclehash/retrieval.hpp"

namespace cyclehash {

struct ItqModel {
  std::size_t bits = 0;
  std::vector<double> mean;  // d
  Matrix projection;         // d x K, orthonormal principal directions
  Matrix rotation;           // K x K, orthogonal
  /// |B - V R|_F^2 after each iteration.
  std::vector<double> quantization_loss;
  /// max |R^T R - I| after each iteration.
  std::vector<double> orthogonality_error;

  std::size_t dim() const { return mean.size(); }
  bool trained() const { return bits > 0 && !rotation.empty(); }
};

inline constexpr std::size_t kDefaultItqIterations = 50;

/// Fits ITQ on the rows of `features` (n x d). Requires n > K and a
/// covariance of rank >= K; otherwise throws NumericError.
ItqModel itq_train(const Matrix& features, std::size_t bits,
                   std::size_t iterations = kDefaultItqIterations, std::uint64_t seed = 0);

/// Centered rows projected onto the principal directions: (X - mean) W.
Matrix itq_project(const ItqModel& model, const Matrix& features);

/// bits = (sign((x - mean)^T W R) + 1) / 2 with sign(0) = +1.
HashCode itq_encode(std::span<const double> x, const ItqModel& model);
std::vector<HashCode> itq_encode_all(const Matrix& features, const ItqModel& model);

/// mean + W R b with b = 2h - 1.
std::vector<double> itq_reconstruct(const HashCode& code, const ItqModel& model);

}  // namespace cyclehash
