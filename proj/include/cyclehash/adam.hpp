#pragma once

#include <cstdint>
#include <vector>

#include "cyclehash/tensor.hpp"

namespace cyclehash {

struct AdamHyper {
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  friend bool operator==(const AdamHyper&, const AdamHyper&) = default;
};

/// Moment buffers for a fixed list of parameters.
struct AdamState {
  AdamHyper hyper;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

/// Zero-initialized state matching the shapes of `params`.
AdamState make_adam_state(const std::vector<Tensor>& params, AdamHyper hyper);

/// One bias-corrected Adam update of every parameter from its accumulated
/// gradient (a parameter without a gradient buffer counts as zero gradient).
void adam_step(std::vector<Tensor>& params, AdamState& state,
               double learning_rate);

/// Owns a parameter list and its state.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamHyper hyper);

  void zero_grad();
  void step(double learning_rate) { adam_step(params_, state_, learning_rate); }

  /// Rescales all gradients so their joint L2 norm is at most max_norm.
  /// Returns the norm before clipping.
  double clip_grad_norm(double max_norm);

  const std::vector<Tensor>& params() const { return params_; }
  AdamState& state() { return state_; }
  const AdamState& state() const { return state_; }

 private:
  std::vector<Tensor> params_;
  AdamState state_;
};

}  // namespace cyclehash
