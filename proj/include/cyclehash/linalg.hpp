#pragma once

// Small dense linear algebra on plain row-major matrices (no autodiff).

#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace cyclehash {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  Matrix transposed() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);

double frobenius_norm_squared(const Matrix& m);
/// max_ij |(M^T M - I)_ij|
double orthogonality_error(const Matrix& m);

struct SymmetricEigen {
  std::vector<double> values;  // descending
  Matrix vectors;              // column j pairs with values[j]
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Iterates until the
/// off-diagonal Frobenius norm falls below `tolerance` times the matrix norm.
SymmetricEigen symmetric_eigen(const Matrix& a, double tolerance = 1e-10,
                               int max_sweeps = 100);

struct Svd {
  Matrix u;               // m x n, orthonormal columns
  std::vector<double> s;  // n singular values, descending
  Matrix v;               // n x n orthogonal
};

/// One-sided Jacobi SVD of an m x n matrix with m >= n: A = U diag(s) V^T.
/// Columns of U for zero singular values are completed to an orthonormal set.
Svd svd(const Matrix& a, double tolerance = 1e-14, int max_sweeps = 100);

/// Orthogonal factor of the QR decomposition of a Gaussian matrix, with the
/// sign convention that makes the distribution Haar.
Matrix random_orthogonal(std::size_t n, std::mt19937_64& rng);

/// Solves A X = B for symmetric positive definite A via Cholesky.
/// Throws NumericError when A is not positive definite.
Matrix solve_spd(const Matrix& a, const Matrix& b);

}  // namespace cyclehash
