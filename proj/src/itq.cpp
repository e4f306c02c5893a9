#include "cyclehash/itq.hpp"

#include <cmath>
#include <random>

#include "cyclehash/errors.hpp"

namespace cyclehash {

namespace {

Matrix sign_matrix(const Matrix& m) {
  Matrix b(m.rows(), m.cols());
  for (std::size_t i = 0; i < b.storage().size(); ++i) {
    b.storage()[i] = m.storage()[i] >= 0.0 ? 1.0 : -1.0;
  }
  return b;
}

void check_model(const ItqModel& model, std::size_t dim) {
  if (!model.trained()) throw std::invalid_argument("ITQ model is not trained");
  if (dim != model.dim()) {
    throw ShapeError("ITQ: input has " + std::to_string(dim) + " features, model expects " +
                     std::to_string(model.dim()));
  }
}

}  // namespace

ItqModel itq_train(const Matrix& features, std::size_t bits, std::size_t iterations,
                   std::uint64_t seed) {
  const std::size_t n = features.rows(), d = features.cols();
  if (bits == 0 || bits > kMaxCodeBits) throw std::invalid_argument("itq_train: invalid K");
  if (n <= bits) {
    throw std::invalid_argument("itq_train: need more samples than bits (n=" +
                                std::to_string(n) + ", K=" + std::to_string(bits) + ")");
  }
  if (d < bits) {
    throw NumericError("itq_train: covariance rank " + std::to_string(d) +
                       " is below K=" + std::to_string(bits));
  }

  ItqModel model;
  model.bits = bits;
  model.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) model.mean[j] += features(i, j);
  }
  for (auto& m : model.mean) m /= static_cast<double>(n);

  Matrix centered(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) centered(i, j) = features(i, j) - model.mean[j];
  }
  Matrix cov = centered.transposed() * centered;
  for (auto& c : cov.storage()) c /= static_cast<double>(n);

  const SymmetricEigen eig = symmetric_eigen(cov, 1e-10);
  const double top = std::max(eig.values.front(), 0.0);
  if (!(eig.values[bits - 1] > 1e-12 * std::max(top, 1e-300))) {
    throw NumericError("itq_train: degenerate covariance, rank below K=" + std::to_string(bits));
  }
  model.projection = Matrix(d, bits);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t k = 0; k < bits; ++k) model.projection(i, k) = eig.vectors(i, k);
  }

  const Matrix v = centered * model.projection;
  std::mt19937_64 rng(seed);
  model.rotation = random_orthogonal(bits, rng);

  for (std::size_t it = 0; it < iterations; ++it) {
    const Matrix b = sign_matrix(v * model.rotation);
    // Orthogonal Procrustes: with V^T B = P S Q^T, R = P Q^T maximizes
    // tr(B^T V R) and so minimizes |B - V R|_F.
    const Svd s = svd(v.transposed() * b);
    model.rotation = s.u * s.v.transposed();
    model.quantization_loss.push_back(frobenius_norm_squared(b - v * model.rotation));
    model.orthogonality_error.push_back(orthogonality_error(model.rotation));
  }
  return model;
}

Matrix itq_project(const ItqModel& model, const Matrix& features) {
  check_model(model, features.cols());
  Matrix centered = features;
  for (std::size_t i = 0; i < centered.rows(); ++i) {
    for (std::size_t j = 0; j < centered.cols(); ++j) centered(i, j) -= model.mean[j];
  }
  return centered * model.projection;
}

HashCode itq_encode(std::span<const double> x, const ItqModel& model) {
  check_model(model, x.size());
  Matrix row(1, x.size(), std::vector<double>(x.begin(), x.end()));
  const Matrix rotated = itq_project(model, row) * model.rotation;
  HashCode code(model.bits);
  for (std::size_t k = 0; k < model.bits; ++k) code.set(k, rotated(0, k) >= 0.0);
  return code;
}

std::vector<HashCode> itq_encode_all(const Matrix& features, const ItqModel& model) {
  const Matrix rotated = itq_project(model, features) * model.rotation;
  std::vector<HashCode> out;
  out.reserve(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    HashCode code(model.bits);
    for (std::size_t k = 0; k < model.bits; ++k) code.set(k, rotated(i, k) >= 0.0);
    out.push_back(code);
  }
  return out;
}

std::vector<double> itq_reconstruct(const HashCode& code, const ItqModel& model) {
  if (!model.trained()) throw std::invalid_argument("ITQ model is not trained");
  if (code.bits() != model.bits) throw ShapeError("itq_reconstruct: code length mismatch");
  std::vector<double> b(model.bits);
  for (std::size_t k = 0; k < model.bits; ++k) b[k] = code.get(k) ? 1.0 : -1.0;
  // R b, then W (R b).
  std::vector<double> rb(model.bits, 0.0);
  for (std::size_t i = 0; i < model.bits; ++i) {
    for (std::size_t k = 0; k < model.bits; ++k) rb[i] += model.rotation(i, k) * b[k];
  }
  std::vector<double> x = model.mean;
  for (std::size_t j = 0; j < x.size(); ++j) {
    for (std::size_t i = 0; i < model.bits; ++i) x[j] += model.projection(j, i) * rb[i];
  }
  return x;
}

}  // namespace cyclehash
