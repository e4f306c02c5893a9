#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cyclehash/errors.hpp"
#include "cyclehash/itq.hpp"

namespace cyclehash {
namespace {

Matrix gaussian_data(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix x(n, d);
  // Anisotropic so that the principal directions are well separated.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x(i, j) = g(rng) * (1.0 + 0.3 * j) + 0.5 * j;
  }
  return x;
}

// Points on the {-1,1}^K cube, every vertex present.
Matrix lattice(std::size_t k, std::size_t copies = 1) {
  const std::size_t vertices = std::size_t{1} << k;
  Matrix x(vertices * copies, k);
  for (std::size_t c = 0; c < copies; ++c) {
    for (std::size_t v = 0; v < vertices; ++v) {
      for (std::size_t j = 0; j < k; ++j) x(c * vertices + v, j) = (v >> j) & 1u ? 1.0 : -1.0;
    }
  }
  return x;
}

TEST(Itq, LossIsNonIncreasingAndRotationStaysOrthogonal) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 5; ++rep) {
    const Matrix x = gaussian_data(200, 20, rng);
    const ItqModel m = itq_train(x, 8, 50, rep);
    ASSERT_EQ(m.quantization_loss.size(), 50u);
    for (std::size_t i = 1; i < m.quantization_loss.size(); ++i) {
      EXPECT_LE(m.quantization_loss[i], m.quantization_loss[i - 1] * (1 + 1e-12));
    }
    for (double e : m.orthogonality_error) EXPECT_LT(e, 1e-8);
    EXPECT_LT(orthogonality_error(m.projection), 1e-8);
  }
}

// From K = 3 on, the cube has non-zero fixed points of the alternation that
// a random start can land in, so exact recovery is only guaranteed below.
TEST(Itq, LatticeFixtureIsQuantizedExactly) {
  for (std::size_t seed = 0; seed < 20; ++seed) {
    for (std::size_t k : {1u, 2u}) {
      const Matrix x = lattice(k, 3);
      const ItqModel m = itq_train(x, k, 50, seed);
      ASSERT_LT(m.quantization_loss.back(), 1e-6) << "K=" << k << " seed=" << seed;
      // R maps the cube onto itself, so it is a signed permutation.
      const Matrix wr = m.projection * m.rotation;
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          const double a = std::abs(wr(i, j));
          EXPECT_TRUE(a < 1e-6 || std::abs(a - 1.0) < 1e-6);
        }
      }
      // Every lattice point survives the round trip.
      for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto back = itq_reconstruct(itq_encode(x.row(i), m), m);
        for (std::size_t j = 0; j < k; ++j) EXPECT_NEAR(back[j], x(i, j), 1e-9);
      }
    }
  }
}

TEST(Itq, OneBitRotationIsPlusOrMinusOne) {
  std::mt19937_64 rng(5);
  const Matrix x = gaussian_data(50, 1, rng);
  const ItqModel m = itq_train(x, 1, 10, 0);
  EXPECT_NEAR(std::abs(m.rotation(0, 0)), 1.0, 1e-12);
}

TEST(Itq, MeanEncodesToAllOnes) {
  std::mt19937_64 rng(6);
  const ItqModel m = itq_train(gaussian_data(100, 6, rng), 4, 20, 0);
  const HashCode c = itq_encode(m.mean, m);
  EXPECT_EQ(c.to_string(), "1111");
}

TEST(Itq, ReflectionAboutTheMeanFlipsEveryBit) {
  std::mt19937_64 rng(7);
  const Matrix x = gaussian_data(100, 6, rng);
  const ItqModel m = itq_train(x, 4, 20, 0);
  for (std::size_t i = 0; i < 10; ++i) {
    std::vector<double> flipped(6);
    for (std::size_t j = 0; j < 6; ++j) flipped[j] = 2 * m.mean[j] - x(i, j);
    const auto a = itq_encode(x.row(i), m).unpack();
    const auto b = itq_encode(flipped, m).unpack();
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NE(a[k], b[k]);
  }
}

TEST(Itq, EncodeMatchesHandPipeline) {
  std::mt19937_64 rng(8);
  const Matrix x = gaussian_data(80, 5, rng);
  const ItqModel m = itq_train(x, 3, 30, 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    std::vector<double> centered(5), projected(3, 0.0), rotated(3, 0.0);
    for (std::size_t j = 0; j < 5; ++j) centered[j] = x(i, j) - m.mean[j];
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t j = 0; j < 5; ++j) projected[k] += centered[j] * m.projection(j, k);
    }
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t l = 0; l < 3; ++l) rotated[k] += projected[l] * m.rotation(l, k);
    }
    const HashCode c = itq_encode(x.row(i), m);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(c.get(k), rotated[k] >= 0.0);
  }
  EXPECT_EQ(itq_encode_all(x, m)[7], itq_encode(x.row(7), m));
}

TEST(Itq, ComplementReconstructsToReflection) {
  std::mt19937_64 rng(9);
  const ItqModel m = itq_train(gaussian_data(60, 7, rng), 3, 10, 0);
  const HashCode h = HashCode::from_bits(std::vector<std::uint8_t>{1, 0, 1});
  const HashCode hc = HashCode::from_bits(std::vector<std::uint8_t>{0, 1, 0});
  const auto a = itq_reconstruct(h, m), b = itq_reconstruct(hc, m);
  ASSERT_EQ(a.size(), 7u);
  for (std::size_t j = 0; j < 7; ++j) EXPECT_NEAR(a[j] + b[j], 2 * m.mean[j], 1e-12);
}

TEST(Itq, RoundTripErrorEqualsQuantizationResidual) {
  std::mt19937_64 rng(10);
  const Matrix x = gaussian_data(120, 4, rng);  // d == K: projection loses nothing
  const ItqModel m = itq_train(x, 4, 25, 2);
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto back = itq_reconstruct(itq_encode(x.row(i), m), m);
    for (std::size_t j = 0; j < 4; ++j) total += (back[j] - x(i, j)) * (back[j] - x(i, j));
  }
  // The recorded loss uses the codes from before the last rotation update.
  const Matrix v = itq_project(m, x) * m.rotation;
  double residual = 0.0;
  for (std::size_t i = 0; i < v.rows(); ++i) {
    for (std::size_t k = 0; k < 4; ++k) {
      const double b = v(i, k) >= 0 ? 1.0 : -1.0;
      residual += (b - v(i, k)) * (b - v(i, k));
    }
  }
  EXPECT_NEAR(total, residual, 1e-9 * residual);
}

TEST(Itq, Errors) {
  std::mt19937_64 rng(12);
  EXPECT_THROW(itq_train(gaussian_data(3, 5, rng), 4), std::invalid_argument);
  EXPECT_THROW(itq_train(gaussian_data(30, 3, rng), 4), NumericError);
  Matrix rank_two(40, 6);
  for (std::size_t i = 0; i < 40; ++i) {
    rank_two(i, 0) = static_cast<double>(i % 7);
    rank_two(i, 1) = static_cast<double>(i % 3);
  }
  EXPECT_THROW(itq_train(rank_two, 4), NumericError);
  const ItqModel m = itq_train(gaussian_data(30, 5, rng), 2, 5, 0);
  EXPECT_THROW(itq_encode(std::vector<double>(4), m), ShapeError);
  EXPECT_THROW(itq_reconstruct(HashCode(3), m), ShapeError);
  EXPECT_THROW(itq_encode(std::vector<double>(5), ItqModel{}), std::invalid_argument);
}

}  // namespace
}  // namespace cyclehash
