#include "cyclehash/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cyclehash/errors.hpp"
#include "cyclehash/kernels.hpp"

namespace cyclehash {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("Matrix: data size does not match rows x cols");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  }
  return t;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("Matrix product: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  kernels::gemm({.m = a.rows(), .n = b.cols(), .k = a.cols()}, a.data(),
                b.data(), c.data());
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("Matrix difference: shapes differ");
  }
  Matrix c(a.rows(), a.cols());
  for (std::size_t i = 0; i < c.storage().size(); ++i) {
    c.storage()[i] = a.storage()[i] - b.storage()[i];
  }
  return c;
}

double frobenius_norm_squared(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return s;
}

double orthogonality_error(const Matrix& m) {
  const Matrix g = m.transposed() * m;
  double worst = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i) {
    for (std::size_t j = 0; j < g.cols(); ++j) {
      worst = std::max(worst, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

SymmetricEigen symmetric_eigen(const Matrix& input, double tolerance,
                               int max_sweeps) {
  const std::size_t n = input.rows();
  if (input.cols() != n) throw ShapeError("symmetric_eigen: matrix is not square");
  Matrix a = input;
  Matrix v = Matrix::identity(n);
  const double scale = std::sqrt(std::max(frobenius_norm_squared(a), 1e-300));

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += 2.0 * a(p, q) * a(p, q);
    }
    if (std::sqrt(off) <= tolerance * scale) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (std::size_t k = 0; k < n; ++k) out.vectors(k, j) = v(k, order[j]);
  }
  return out;
}

namespace {

double column_dot(const Matrix& m, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (std::size_t k = 0; k < m.rows(); ++k) s += m(k, i) * m(k, j);
  return s;
}

// Replaces column j of `u` with a unit vector orthogonal to columns [0, j).
void complete_column(Matrix& u, std::size_t j) {
  for (std::size_t e = 0; e < u.rows(); ++e) {
    for (std::size_t k = 0; k < u.rows(); ++k) u(k, j) = (k == e) ? 1.0 : 0.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i < j; ++i) {
        const double d = column_dot(u, i, j);
        for (std::size_t k = 0; k < u.rows(); ++k) u(k, j) -= d * u(k, i);
      }
    }
    const double norm = std::sqrt(column_dot(u, j, j));
    if (norm > 1e-6) {
      for (std::size_t k = 0; k < u.rows(); ++k) u(k, j) /= norm;
      return;
    }
  }
  throw NumericError("svd: could not complete orthonormal basis");
}

}  // namespace

Svd svd(const Matrix& a, double tolerance, int max_sweeps) {
  const std::size_t m = a.rows(), n = a.cols();
  if (m < n) throw ShapeError("svd: expected rows >= cols");
  Matrix u = a;
  Matrix v = Matrix::identity(n);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double alpha = column_dot(u, i, i);
        const double beta = column_dot(u, j, j);
        const double gamma = column_dot(u, i, j);
        if (std::abs(gamma) <= tolerance * std::sqrt(alpha * beta) ||
            gamma == 0.0) {
          continue;
        }
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t k = 0; k < m; ++k) {
          const double ui = u(k, i), uj = u(k, j);
          u(k, i) = c * ui - s * uj;
          u(k, j) = s * ui + c * uj;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vi = v(k, i), vj = v(k, j);
          v(k, i) = c * vi - s * vj;
          v(k, j) = s * vi + c * vj;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sv(n);
  for (std::size_t j = 0; j < n; ++j) sv[j] = std::sqrt(column_dot(u, j, j));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return sv[i] > sv[j]; });

  Svd out{Matrix(m, n), std::vector<double>(n), Matrix(n, n)};
  const double smax = n > 0 ? sv[order[0]] : 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    out.s[j] = sv[src];
    for (std::size_t k = 0; k < n; ++k) out.v(k, j) = v(k, src);
    for (std::size_t k = 0; k < m; ++k) out.u(k, j) = u(k, src);
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (out.s[j] > 1e-13 * std::max(smax, 1e-300)) {
      for (std::size_t k = 0; k < m; ++k) out.u(k, j) /= out.s[j];
    } else {
      out.s[j] = 0.0;
      complete_column(out.u, j);
    }
  }
  return out;
}

Matrix random_orthogonal(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix q(n, n);
  for (auto& x : q.storage()) x = dist(rng);
  // Modified Gram-Schmidt with one reorthogonalization pass; the diagonal of
  // R is positive by construction, which is the Haar sign convention.
  for (std::size_t j = 0; j < n; ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i < j; ++i) {
        const double d = column_dot(q, i, j);
        for (std::size_t k = 0; k < n; ++k) q(k, j) -= d * q(k, i);
      }
    }
    const double norm = std::sqrt(column_dot(q, j, j));
    if (norm < 1e-12) {
      complete_column(q, j);
    } else {
      for (std::size_t k = 0; k < n; ++k) q(k, j) /= norm;
    }
  }
  return q;
}

Matrix solve_spd(const Matrix& a, const Matrix& b) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.rows() != n) throw ShapeError("solve_spd: shape mismatch");
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) throw NumericError("solve_spd: matrix is not positive definite");
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  Matrix x = b;
  for (std::size_t c = 0; c < b.cols(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = x(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
      x(i, c) = s / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = x(ii, c);
      for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x(k, c);
      x(ii, c) = s / l(ii, ii);
    }
  }
  return x;
}

}  // namespace cyclehash
