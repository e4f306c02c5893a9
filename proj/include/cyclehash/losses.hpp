#pragma once

#include <cstddef>
#include <random>

#include "cyclehash/models.hpp"
#include "cyclehash/tensor.hpp"

namespace cyclehash {

/// mean((s - 1)^2) over the fake scores.
Tensor lsgan_generator_loss(const Tensor& fake_scores);

/// mean((real - 1)^2) + mean(fake^2).
Tensor lsgan_discriminator_loss(const Tensor& real_scores, const Tensor& fake_scores);

/// mean_i |reconstructed_u_i - x_u_i|_1 + mean_j |reconstructed_v_j - x_v_j|_1.
Tensor cycle_loss(const Tensor& x_u, const Tensor& reconstructed_u,
                  const Tensor& x_v, const Tensor& reconstructed_v);

/// Full cycle: F(G(x_u)) against x_u and G(F(x_v)) against x_v, with both
/// mappings run through the stochastic neuron.
Tensor cycle_loss(const Tensor& x_u, const Tensor& x_v,
                  const CrossModalModel& model, std::mt19937_64& rng);

enum class Expectation {
  kMonteCarlo,  // n_samples draws of the stochastic neuron
  kEnumerate,   // exact sum over all 2^K codes, K <= kMaxEnumerationBits
};

inline constexpr std::size_t kMaxEnumerationBits = 10;

/// Helmholtz free energy E_q[log q(h|x) - log p(x, h)], averaged over the
/// rows of x. This is the negated variational lower bound, so lower is
/// better. Monte-Carlo gradients reach the encoder through the
/// straight-through stochastic neuron.
Tensor sgh_free_energy(const Tensor& x, const ModalityModel& model,
                       std::size_t n_samples, std::mt19937_64& rng,
                       Expectation mode = Expectation::kMonteCarlo);

/// log q(h|x) per row (n x 1) for the encoder's Bernoulli posterior.
Tensor log_posterior(const Tensor& pre_activation, const Tensor& h);

struct LossBreakdown {
  double gan_u_to_v = 0;
  double gan_v_to_u = 0;
  double cycle = 0;
  double sgh_u = 0;
  double sgh_v = 0;
  double total = 0;
  double lambda = 0;

  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

struct ObjectiveWeights {
  double lambda = 10.0;
  double sgh_weight = 1.0;
  std::size_t n_samples = 1;
};

/// Generator-side forward pass: translations in both directions and, when
/// their weights are nonzero, the cycle and free-energy terms.
struct GeneratorPass {
  Tensor fake_v;  // G(x_u)
  Tensor fake_u;  // F(x_v)
  Tensor cycle;   // undefined when lambda == 0
  Tensor sgh_u;   // undefined when sgh_weight == 0
  Tensor sgh_v;
};

GeneratorPass forward_generators(const Tensor& x_u, const Tensor& x_v,
                                 const CrossModalModel& model,
                                 const ObjectiveWeights& weights,
                                 std::mt19937_64& rng);

struct Objective {
  Tensor gan_u_to_v;
  Tensor gan_v_to_u;
  Tensor total;
  LossBreakdown breakdown;
};

/// Adds the generator adversarial terms, scored by the current
/// discriminators, to a generator pass:
///   total = gan_u_to_v + gan_v_to_u + lambda * cycle
///           + sgh_weight * (sgh_u + sgh_v)
Objective assemble_objective(const GeneratorPass& pass, const CrossModalModel& model,
                             const ObjectiveWeights& weights);

/// forward_generators followed by assemble_objective.
Objective total_objective(const Tensor& x_u, const Tensor& x_v,
                          const CrossModalModel& model,
                          const ObjectiveWeights& weights, std::mt19937_64& rng);

}  // namespace cyclehash
