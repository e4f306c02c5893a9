#pragma once

// Run configuration: flat "key = value" text, one setting per line, '#'
// starts a comment. Lists are comma separated ("disc_hidden = 64,32"); an
// empty list is written as "none". Unknown keys and malformed values raise
// ConfigError naming the key.
//
// Keys:
//   data:      n_classes samples_per_class latent_dim d_u d_v noise separation
//   training:  bits epochs_flat epochs_decay base_lr batch_size lambda
//              sgh_weight n_samples history_capacity d_steps clip_norm
//              checkpoint_every adam_beta1 adam_beta2 adam_eps
//              disc_hidden stem_u stem_v
//   eval:      database_fraction map_cutoff
//   shared:    seed (drives data generation, splitting and training)

#include <filesystem>
#include <string>
#include <vector>

#include "cyclehash/dataset.hpp"
#include "cyclehash/trainer.hpp"

namespace cyclehash {

struct RunConfig {
  SynthConfig synth;
  TrainConfig train;
  double database_fraction = 0.75;
  std::size_t map_cutoff = 0;

  std::uint64_t seed() const { return train.seed; }
  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Every recognised key, in documentation order.
const std::vector<std::string>& config_keys();

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
/// Applies every line of `text` on top of `base`.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Canonical text form; parse_config(config_to_text(c)) == c.
std::string config_to_text(const RunConfig& cfg);
/// Key -> value-string map used in run manifests.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg);

}  // namespace cyclehash
