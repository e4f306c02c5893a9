#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "cyclehash/errors.hpp"
#include "cyclehash/models.hpp"

namespace cyclehash {
namespace {

CrossModalModel small_model(std::size_t bits = 4, std::uint64_t seed = 1) {
  ArchitectureConfig arch;
  arch.bits = bits;
  arch.disc_hidden = {5};
  std::mt19937_64 rng(seed);
  return CrossModalModel::create(arch, 6, 3, rng);
}

TEST(Encoder, BinarizeUsesSignWithZeroMappedToOne) {
  std::mt19937_64 rng(1);
  Encoder enc(2, 3, {}, rng);
  auto w = enc.weight().mutable_values();  // 2 x 3
  const std::vector<double> values{1, -1, 0, 2, 1, 0};
  std::copy(values.begin(), values.end(), w.begin());
  const Tensor x = Tensor::constant({2, 2}, {1, 0, -1, 0.5});
  const Tensor h = enc.binarize(x);
  // Row 0: (1, -1, 0) -> 1 0 1. Row 1: (0, 1.5, 0) -> 1 1 1.
  EXPECT_EQ(std::vector<double>(h.values().begin(), h.values().end()),
            (std::vector<double>{1, 0, 1, 1, 1, 1}));
  EXPECT_FALSE(h.requires_grad());
  const Tensor p = enc.probabilities(x);
  EXPECT_NEAR(p.at(0, 0), 1 / (1 + std::exp(-1.0)), 1e-15);
  EXPECT_THROW(enc.binarize(Tensor::zeros({1, 3})), ShapeError);
}

TEST(Encoder, OptionalStemChangesTheFeatureWidth) {
  std::mt19937_64 rng(2);
  Encoder enc(5, 4, {7, 3}, rng);
  EXPECT_EQ(enc.weight().shape(), (Shape{3, 4}));
  EXPECT_EQ(enc.pre_activation(Tensor::zeros({2, 5})).shape(), (Shape{2, 4}));
}

TEST(Decoder, LogJointMatchesTheGaussianBernoulliFormula) {
  std::mt19937_64 rng(3);
  Decoder dec(3, 2, rng, 0.5);
  dec.log_rho().mutable_values()[0] = 0.3;
  dec.beta().mutable_values()[0] = -0.4;
  dec.beta().mutable_values()[1] = 1.1;
  const Tensor x = Tensor::constant({1, 3}, {0.5, -1.0, 2.0});
  const Tensor h = Tensor::constant({1, 2}, {1, 0});
  const auto u = dec.codebook().values();  // 3 x 2
  const double rho = std::exp(0.3);
  double sq = 0;
  for (int i = 0; i < 3; ++i) {
    const double r = x.values()[i] - u[i * 2 + 0];
    sq += r * r;
  }
  const double prior = -0.4 - std::log1p(std::exp(-0.4)) - std::log1p(std::exp(1.1));
  const double expect =
      -sq / (2 * rho * rho) - 1.5 * std::log(2 * std::numbers::pi * rho * rho) + prior;
  EXPECT_NEAR(dec.log_joint(x, h).item(), expect, 1e-12);
  const Tensor xhat = dec.decode(h);
  EXPECT_EQ(xhat.shape(), (Shape{1, 3}));
  EXPECT_NEAR(xhat.values()[2], u[4], 1e-15);
}

TEST(Discriminator, ScoresOneValuePerRow) {
  std::mt19937_64 rng(4);
  Discriminator d(4, {8, 4}, rng);
  EXPECT_EQ(d.score(Tensor::zeros({3, 4})).shape(), (Shape{3, 1}));
  EXPECT_EQ(d.net().layers().size(), 3u);
}

TEST(CrossModalModel, SharedCodeSpaceAndStableNames) {
  const CrossModalModel m = small_model();
  EXPECT_EQ(m.u.encoder.bits(), m.v.decoder.bits());
  const auto named = m.named_parameters();
  std::set<std::string> names;
  for (const auto& [n, t] : named) names.insert(n);
  EXPECT_EQ(names.size(), named.size());
  EXPECT_TRUE(names.count("u.encoder.W"));
  EXPECT_TRUE(names.count("v.decoder.U"));
  EXPECT_TRUE(names.count("u.disc.1.bias"));
  EXPECT_EQ(m.generator_parameters().size(), 8u);
}

TEST(CrossModalModel, InitialisationIsSeeded) {
  const auto a = small_model(4, 7).named_parameters();
  const auto b = small_model(4, 7).named_parameters();
  const auto c = small_model(4, 8).named_parameters();
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(std::equal(a[i].second.values().begin(), a[i].second.values().end(),
                           b[i].second.values().begin()));
    differs |= !std::equal(a[i].second.values().begin(), a[i].second.values().end(),
                           c[i].second.values().begin());
  }
  EXPECT_TRUE(differs);
}

TEST(Translate, MapsBetweenModalities) {
  const CrossModalModel m = small_model();
  std::mt19937_64 rng(5);
  const Tensor xu = Tensor::full({2, 6}, 0.3);
  EXPECT_EQ(translate(xu, m.u, m.v, TranslateMode::kStochastic, &rng).shape(), (Shape{2, 3}));
  EXPECT_EQ(translate(xu, m.u, m.v, TranslateMode::kDeterministic).shape(), (Shape{2, 3}));
  EXPECT_THROW(translate(xu, m.u, m.v, TranslateMode::kStochastic), std::invalid_argument);
  const CrossModalModel other = small_model(5);
  EXPECT_THROW(translate(xu, m.u, other.v, TranslateMode::kDeterministic), ShapeError);
}

TEST(SampleHash, EmpiricalMeanTracksProbability) {
  std::mt19937_64 rng(6);
  const std::vector<double> z{0.05, 0.3, 0.5, 0.95};
  const std::size_t draws = 20000;
  std::vector<double> rows;
  for (std::size_t i = 0; i < draws; ++i) rows.insert(rows.end(), z.begin(), z.end());
  const Tensor h = sample_hash(Tensor::constant({draws, 4}, rows), rng);
  for (std::size_t k = 0; k < 4; ++k) {
    double s = 0;
    for (std::size_t i = 0; i < draws; ++i) s += h.at(i, k);
    const double sigma = std::sqrt(z[k] * (1 - z[k]) / draws);
    EXPECT_NEAR(s / draws, z[k], 3 * sigma);
  }
}

TEST(Conversions, MatrixTensorRoundTrip) {
  const Matrix m(2, 2, {1, 2, 3, 4});
  EXPECT_EQ(to_matrix(to_tensor(m)), m);
}

}  // namespace
}  // namespace cyclehash
