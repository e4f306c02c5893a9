#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <vector>

#include "cyclehash/adam.hpp"
#include "cyclehash/checkpoint.hpp"
#include "cyclehash/dataset.hpp"
#include "cyclehash/history_buffer.hpp"
#include "cyclehash/losses.hpp"
#include "cyclehash/models.hpp"

namespace cyclehash {

struct TrainConfig {
  ArchitectureConfig arch;  // bits, optional encoder stems, discriminator sizes
  std::size_t epochs_flat = 100;
  std::size_t epochs_decay = 100;
  double base_lr = 2e-4;
  std::size_t batch_size = 16;
  double lambda = 10.0;
  double sgh_weight = 1.0;
  std::size_t n_samples = 1;
  std::size_t history_capacity = 50;
  std::uint64_t seed = 20190101;
  AdamHyper adam;
  std::size_t d_steps = 1;
  double clip_norm = 0.0;  // 0 disables global-norm clipping
  std::size_t checkpoint_every = 0;

  std::size_t total_epochs() const { return epochs_flat + epochs_decay; }
  ObjectiveWeights weights() const { return {lambda, sgh_weight, n_samples}; }
  /// Throws ConfigError naming the offending field.
  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// base_lr during the flat phase, then base_lr * (1 - (epoch - flat) / decay),
/// so the rate would hit zero at the boundary right after the final epoch.
double lr_schedule(std::size_t epoch, const TrainConfig& cfg);

struct IterationRecord {
  std::uint64_t iteration = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  LossBreakdown loss;
  double disc_u = 0.0;
  double disc_v = 0.0;

  friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

struct TrainLog {
  std::vector<IterationRecord> iterations;
  std::vector<double> epoch_lr;
  std::vector<double> epoch_seconds;  // wall clock, excluded from the CSV

  /// Columns: iteration,epoch,lr,gan_u_to_v,gan_v_to_u,cycle,sgh_u,sgh_v,total
  void write_csv(const std::filesystem::path& path) const;
  static TrainLog read_csv(const std::filesystem::path& path);
};

/// Builds a generator seeded from (seed, stream, index) so that every
/// consumer of randomness gets an independent, reproducible stream.
std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0);

class Trainer {
 public:
  Trainer(TrainConfig cfg, std::size_t dim_u, std::size_t dim_v);
  /// Continues from a checkpoint produced by checkpoint(); the config must
  /// describe the same architecture.
  Trainer(TrainConfig cfg, const Checkpoint& ckpt);

  /// One pass over ceil(max(n_u, n_v) / batch) iterations. Batches of the
  /// two modalities are drawn from independent permutations, so no pairing
  /// between the sets is implied.
  void run_epoch(const LabeledFeatureSet& set_u, const LabeledFeatureSet& set_v,
                 TrainLog& log);

  using EpochCallback = std::function<void(const Trainer&, std::size_t epoch)>;
  /// Runs the remaining epochs; `on_epoch` fires after each one.
  void train(const LabeledFeatureSet& set_u, const LabeledFeatureSet& set_v,
             TrainLog& log, const EpochCallback& on_epoch = {});

  Checkpoint checkpoint() const;

  const TrainConfig& config() const { return cfg_; }
  CrossModalModel& model() { return model_; }
  const CrossModalModel& model() const { return model_; }
  std::size_t next_epoch() const { return next_epoch_; }
  std::uint64_t next_iteration() const { return next_iteration_; }
  bool finished() const { return next_epoch_ >= cfg_.total_epochs(); }
  const Adam& generator_optimizer() const { return gen_opt_; }
  const Adam& discriminator_optimizer(Modality m) const {
    return m == Modality::kU ? disc_u_opt_ : disc_v_opt_;
  }

 private:
  void iterate(const Tensor& x_u, const Tensor& x_v, double lr,
               std::mt19937_64& rng, IterationRecord& rec);

  TrainConfig cfg_;
  CrossModalModel model_;
  Adam gen_opt_;
  Adam disc_u_opt_;
  Adam disc_v_opt_;
  HistoryBuffer history_u_;  // fakes F(x_v) shown to the u discriminator
  HistoryBuffer history_v_;  // fakes G(x_u) shown to the v discriminator
  std::size_t next_epoch_ = 0;
  std::uint64_t next_iteration_ = 0;
};

struct TrainResult {
  CrossModalModel model;
  TrainLog log;
};

/// Trains from scratch. Labels and pairing ids are never read.
TrainResult train(const TrainConfig& cfg, const LabeledFeatureSet& set_u,
                  const LabeledFeatureSet& set_v);

}  // namespace cyclehash
