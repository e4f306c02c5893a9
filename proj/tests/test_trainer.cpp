#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "cyclehash/errors.hpp"
#include "cyclehash/trainer.hpp"

namespace cyclehash {
namespace {

std::pair<LabeledFeatureSet, LabeledFeatureSet> two_class_data(std::size_t per_class = 100) {
  SynthConfig s;
  s.n_classes = 2;
  s.samples_per_class = per_class;
  s.latent_dim = 8;
  s.dim_u = 24;
  s.dim_v = 6;
  s.seed = 5;
  return generate_synthetic(s);
}

TrainConfig quick_config(std::size_t flat, std::size_t decay) {
  TrainConfig cfg;
  cfg.arch.bits = 8;
  cfg.arch.disc_hidden = {16, 8};
  cfg.epochs_flat = flat;
  cfg.epochs_decay = decay;
  cfg.seed = 77;
  return cfg;
}

TEST(LrSchedule, FlatThenLinearDecay) {
  const TrainConfig cfg;  // 100 + 100 epochs at 2e-4
  EXPECT_DOUBLE_EQ(lr_schedule(0, cfg), 0.0002);
  EXPECT_DOUBLE_EQ(lr_schedule(99, cfg), 0.0002);
  EXPECT_DOUBLE_EQ(lr_schedule(100, cfg), 0.0002);
  EXPECT_NEAR(lr_schedule(150, cfg), 0.0001, 1e-18);
  EXPECT_NEAR(lr_schedule(199, cfg), 2e-6, 1e-18);
  EXPECT_THROW(lr_schedule(200, cfg), std::out_of_range);
}

TEST(LrSchedule, SingleDecayEpochIsWellDefined) {
  TrainConfig cfg;
  cfg.epochs_flat = 3;
  cfg.epochs_decay = 1;
  const double lr = lr_schedule(3, cfg);
  EXPECT_TRUE(std::isfinite(lr));
  // The ramp (1 - 0/1) has not started decaying yet at its only epoch.
  EXPECT_EQ(lr, cfg.base_lr);
  cfg.epochs_flat = 0;
  EXPECT_TRUE(std::isfinite(lr_schedule(0, cfg)));
}

TEST(TrainConfig, ValidationNamesTheField) {
  TrainConfig cfg;
  cfg.base_lr = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.lambda = -1;
  try {
    cfg.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("lambda"), std::string::npos);
  }
  cfg = {};
  cfg.batch_size = 1;
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Trainer, SmoothedLossDecreases) {
  const auto [u, v] = two_class_data();
  TrainConfig cfg = quick_config(20, 20);
  cfg.arch.bits = 16;
  const TrainResult r = train(cfg, u, v);
  const auto& it = r.log.iterations;
  ASSERT_GE(it.size(), 20u);
  auto window = [&](std::size_t start) {
    double s = 0;
    for (std::size_t i = start; i < start + 10; ++i) s += it[i].loss.total;
    return s / 10;
  };
  EXPECT_LT(window(it.size() - 10), window(0));
}

TEST(Trainer, LogHasOneEntryPerIterationAndFollowsTheSchedule) {
  const auto [u, v] = two_class_data(30);  // 60 rows per modality
  TrainConfig cfg = quick_config(2, 3);
  cfg.batch_size = 16;
  const TrainResult r = train(cfg, u, v);
  const std::size_t per_epoch = 4;  // ceil(60 / 16)
  ASSERT_EQ(r.log.iterations.size(), per_epoch * 5);
  for (std::size_t i = 0; i < r.log.iterations.size(); ++i) {
    const auto& rec = r.log.iterations[i];
    EXPECT_EQ(rec.iteration, i);
    EXPECT_EQ(rec.epoch, i / per_epoch);
    EXPECT_EQ(rec.lr, lr_schedule(rec.epoch, cfg));
  }
  ASSERT_EQ(r.log.epoch_lr.size(), 5u);
  for (std::size_t e = 0; e < 5; ++e) EXPECT_EQ(r.log.epoch_lr[e], lr_schedule(e, cfg));
}

TEST(Trainer, UnequalUnpairedSetSizesAreFine) {
  auto [u, v] = two_class_data(30);
  std::vector<std::size_t> rows(17);
  std::iota(rows.begin(), rows.end(), std::size_t{20});
  v = v.subset(rows);
  TrainConfig cfg = quick_config(1, 1);
  cfg.batch_size = 8;
  const TrainResult r = train(cfg, u, v);
  EXPECT_EQ(r.log.iterations.size(), 2u * 8u);  // ceil(60 / 8) per epoch
}

TEST(Trainer, AblatedTermsStayZero) {
  const auto [u, v] = two_class_data(20);
  TrainConfig cfg = quick_config(1, 1);
  cfg.lambda = 0;
  cfg.sgh_weight = 0;
  const TrainResult r = train(cfg, u, v);
  for (const auto& rec : r.log.iterations) {
    EXPECT_EQ(rec.loss.cycle, 0.0);
    EXPECT_EQ(rec.loss.sgh_u, 0.0);
    EXPECT_EQ(rec.loss.sgh_v, 0.0);
    EXPECT_DOUBLE_EQ(rec.loss.total, rec.loss.gan_u_to_v + rec.loss.gan_v_to_u);
  }
}

TEST(Trainer, SameSeedGivesBitIdenticalLogsAndParameters) {
  const auto [u, v] = two_class_data(20);
  const TrainConfig cfg = quick_config(2, 1);
  const TrainResult a = train(cfg, u, v);
  const TrainResult b = train(cfg, u, v);
  EXPECT_EQ(a.log.iterations, b.log.iterations);
  const auto pa = a.model.named_parameters();
  const auto pb = b.model.named_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_TRUE(std::equal(pa[i].second.values().begin(), pa[i].second.values().end(),
                           pb[i].second.values().begin()));
  }
  TrainConfig other = cfg;
  other.seed = 78;
  EXPECT_NE(train(other, u, v).log.iterations, a.log.iterations);
}

TEST(Trainer, ResumeFromCheckpointIsExact) {
  const auto [u, v] = two_class_data(20);
  const TrainConfig cfg = quick_config(2, 2);
  const TrainResult straight = train(cfg, u, v);

  Trainer first(cfg, u.dim(), v.dim());
  TrainLog log;
  first.run_epoch(u, v, log);
  first.run_epoch(u, v, log);
  const auto path = std::filesystem::temp_directory_path() / "cyclehash_resume.ckpt";
  write_checkpoint(path, first.checkpoint());

  Trainer second(cfg, read_checkpoint(path));
  EXPECT_EQ(second.next_epoch(), 2u);
  EXPECT_EQ(second.next_iteration(), log.iterations.size());
  second.train(u, v, log);
  EXPECT_EQ(log.iterations, straight.log.iterations);
  const auto pa = straight.model.named_parameters();
  const auto pb = second.model().named_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_TRUE(std::equal(pa[i].second.values().begin(), pa[i].second.values().end(),
                           pb[i].second.values().begin()))
        << pa[i].first;
  }
}

TEST(Trainer, OptimizersOwnDisjointParameterSets) {
  const Trainer t(quick_config(1, 1), 24, 6);
  auto contains = [](const Adam& opt, const Tensor& p) {
    for (const auto& q : opt.params()) {
      if (q.same_node(p)) return true;
    }
    return false;
  };
  for (const auto& p : t.model().generator_parameters()) {
    EXPECT_FALSE(contains(t.discriminator_optimizer(Modality::kU), p));
    EXPECT_FALSE(contains(t.discriminator_optimizer(Modality::kV), p));
  }
  for (const auto* side : {&t.model().u, &t.model().v}) {
    for (const auto& p : side->discriminator_parameters()) {
      EXPECT_FALSE(contains(t.generator_optimizer(), p));
    }
  }
  EXPECT_EQ(t.generator_optimizer().params().size(), t.model().generator_parameters().size());
}

// The discriminator loss is built from detached fakes, so its backward pass
// leaves the generator untouched; a generator step leaves the discriminator
// weights unchanged.
TEST(Trainer, DiscriminatorAndGeneratorUpdatesAreIsolated) {
  const auto [u, v] = two_class_data(10);
  Trainer t(quick_config(1, 1), u.dim(), v.dim());
  CrossModalModel& m = t.model();
  std::mt19937_64 rng(1);
  const Tensor xu = u.tensor(), xv = v.tensor();
  for (auto& p : m.generator_parameters()) p.zero_grad();
  const GeneratorPass pass = forward_generators(xu, xv, m, {}, rng);
  const Tensor fake = to_tensor(to_matrix(pass.fake_u));
  backward(lsgan_discriminator_loss(m.u.discriminator.score(xu), m.u.discriminator.score(fake)));
  for (const auto& p : m.generator_parameters()) {
    for (double g : p.grad()) EXPECT_EQ(g, 0.0);
  }

  std::vector<std::vector<double>> before;
  for (const auto& p : m.u.discriminator_parameters()) {
    before.emplace_back(p.values().begin(), p.values().end());
  }
  Adam gen(m.generator_parameters(), {});
  backward(assemble_objective(pass, m, {}).total);
  gen.step(0.1);
  const auto after = m.u.discriminator_parameters();
  for (std::size_t i = 0; i < after.size(); ++i) {
    EXPECT_TRUE(std::equal(before[i].begin(), before[i].end(), after[i].values().begin()));
  }
}

TEST(Trainer, DivergenceAbortsWithDiagnostic) {
  auto [u, v] = two_class_data(10);
  for (auto& x : u.features.storage()) x *= 1e200;
  try {
    train(quick_config(1, 1), u, v);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 0"), std::string::npos) << e.what();
  }
}

TEST(Trainer, RejectsEmptyOrMismatchedData) {
  auto [u, v] = two_class_data(10);
  Trainer t(quick_config(1, 1), u.dim(), v.dim());
  TrainLog log;
  LabeledFeatureSet empty;
  empty.modality = Modality::kV;
  EXPECT_THROW(t.run_epoch(u, empty, log), std::invalid_argument);
  EXPECT_THROW(t.run_epoch(v, u, log), ShapeError);
}

TEST(TrainLog, CsvRoundTrip) {
  const auto [u, v] = two_class_data(10);
  const TrainResult r = train(quick_config(1, 1), u, v);
  const auto path = std::filesystem::temp_directory_path() / "cyclehash_log.csv";
  r.log.write_csv(path);
  const TrainLog back = TrainLog::read_csv(path);
  ASSERT_EQ(back.iterations.size(), r.log.iterations.size());
  for (std::size_t i = 0; i < back.iterations.size(); ++i) {
    EXPECT_EQ(back.iterations[i].loss.total, r.log.iterations[i].loss.total);
    EXPECT_EQ(back.iterations[i].lr, r.log.iterations[i].lr);
  }
}

}  // namespace
}  // namespace cyclehash
