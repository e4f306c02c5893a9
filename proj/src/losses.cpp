#include "cyclehash/losses.hpp"

#include <stdexcept>

#include "cyclehash/errors.hpp"

namespace cyclehash {

namespace {

Tensor one_minus(const Tensor& t) { return add_scalar(scale(t, -1.0), 1.0); }

// Mean over rows of the per-row L1 norm.
Tensor mean_row_l1(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("cycle_loss: reconstruction shape " + shape_string(a.shape()) +
                     " differs from input " + shape_string(b.shape()));
  }
  return scale(sum(abs(sub(a, b))), 1.0 / static_cast<double>(a.rows()));
}

}  // namespace

// Tensors always hold at least one element, so an empty batch is rejected
// when it is built rather than here.

Tensor lsgan_generator_loss(const Tensor& fake_scores) {
  return mean(square(add_scalar(fake_scores, -1.0)));
}

Tensor lsgan_discriminator_loss(const Tensor& real_scores, const Tensor& fake_scores) {
  return add(mean(square(add_scalar(real_scores, -1.0))), mean(square(fake_scores)));
}

Tensor cycle_loss(const Tensor& x_u, const Tensor& reconstructed_u,
                  const Tensor& x_v, const Tensor& reconstructed_v) {
  return add(mean_row_l1(reconstructed_u, x_u), mean_row_l1(reconstructed_v, x_v));
}

Tensor cycle_loss(const Tensor& x_u, const Tensor& x_v,
                  const CrossModalModel& model, std::mt19937_64& rng) {
  const auto st = TranslateMode::kStochastic;
  const Tensor fake_v = translate(x_u, model.u, model.v, st, &rng);
  const Tensor fake_u = translate(x_v, model.v, model.u, st, &rng);
  const Tensor back_u = translate(fake_v, model.v, model.u, st, &rng);
  const Tensor back_v = translate(fake_u, model.u, model.v, st, &rng);
  return cycle_loss(x_u, back_u, x_v, back_v);
}

Tensor log_posterior(const Tensor& pre_activation, const Tensor& h) {
  // h log z + (1 - h) log(1 - z) with z = sigmoid(a) and
  // log(1 - z) = log_sigmoid(-a).
  const Tensor on = mul(h, log_sigmoid(pre_activation));
  const Tensor off = mul(one_minus(h), log_sigmoid(scale(pre_activation, -1.0)));
  return sum(add(on, off), 1);
}

Tensor sgh_free_energy(const Tensor& x, const ModalityModel& model,
                       std::size_t n_samples, std::mt19937_64& rng,
                       Expectation mode) {
  const std::size_t n = x.rows();
  const std::size_t bits = model.encoder.bits();
  const Tensor pre = model.encoder.pre_activation(x);

  if (mode == Expectation::kEnumerate) {
    if (bits > kMaxEnumerationBits) {
      throw std::invalid_argument("sgh_free_energy: enumeration needs K <= 10");
    }
    Tensor total;
    for (std::size_t code = 0; code < (std::size_t{1} << bits); ++code) {
      std::vector<double> hv(n * bits);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < bits; ++k) hv[i * bits + k] = (code >> k) & 1u;
      }
      const Tensor h = Tensor::constant({n, bits}, std::move(hv));
      const Tensor log_q = log_posterior(pre, h);
      const Tensor term =
          mul(exp(log_q), sub(log_q, model.decoder.log_joint(x, h)));
      const Tensor s = sum(term);
      total = code == 0 ? s : add(total, s);
    }
    return scale(total, 1.0 / static_cast<double>(n));
  }

  if (n_samples == 0) throw std::invalid_argument("sgh_free_energy: n_samples must be >= 1");
  const Tensor probs = sigmoid(pre);
  Tensor total;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const Tensor h = sample_hash(probs, rng);
    const Tensor value =
        mean(sub(log_posterior(pre, h), model.decoder.log_joint(x, h)));
    total = s == 0 ? value : add(total, value);
  }
  return scale(total, 1.0 / static_cast<double>(n_samples));
}

GeneratorPass forward_generators(const Tensor& x_u, const Tensor& x_v,
                                 const CrossModalModel& model,
                                 const ObjectiveWeights& weights,
                                 std::mt19937_64& rng) {
  if (x_u.rows() == 0 || x_v.rows() == 0) throw ShapeError("empty batch");
  const auto st = TranslateMode::kStochastic;
  GeneratorPass pass;
  pass.fake_v = translate(x_u, model.u, model.v, st, &rng);
  pass.fake_u = translate(x_v, model.v, model.u, st, &rng);
  if (weights.lambda != 0.0) {
    const Tensor back_u = translate(pass.fake_v, model.v, model.u, st, &rng);
    const Tensor back_v = translate(pass.fake_u, model.u, model.v, st, &rng);
    pass.cycle = cycle_loss(x_u, back_u, x_v, back_v);
  }
  if (weights.sgh_weight != 0.0) {
    pass.sgh_u = sgh_free_energy(x_u, model.u, weights.n_samples, rng);
    pass.sgh_v = sgh_free_energy(x_v, model.v, weights.n_samples, rng);
  }
  return pass;
}

Objective assemble_objective(const GeneratorPass& pass, const CrossModalModel& model,
                             const ObjectiveWeights& weights) {
  Objective obj;
  obj.gan_u_to_v = lsgan_generator_loss(model.v.discriminator.score(pass.fake_v));
  obj.gan_v_to_u = lsgan_generator_loss(model.u.discriminator.score(pass.fake_u));
  obj.total = add(obj.gan_u_to_v, obj.gan_v_to_u);

  auto& b = obj.breakdown;
  b.lambda = weights.lambda;
  b.gan_u_to_v = obj.gan_u_to_v.item();
  b.gan_v_to_u = obj.gan_v_to_u.item();
  b.total = b.gan_u_to_v + b.gan_v_to_u;
  if (weights.lambda != 0.0) {
    obj.total = add(obj.total, scale(pass.cycle, weights.lambda));
    b.cycle = pass.cycle.item();
    b.total += weights.lambda * b.cycle;
  }
  if (weights.sgh_weight != 0.0) {
    const Tensor sgh = add(pass.sgh_u, pass.sgh_v);
    obj.total = add(obj.total, scale(sgh, weights.sgh_weight));
    b.sgh_u = pass.sgh_u.item();
    b.sgh_v = pass.sgh_v.item();
    b.total += weights.sgh_weight * (b.sgh_u + b.sgh_v);
  }
  return obj;
}

Objective total_objective(const Tensor& x_u, const Tensor& x_v,
                          const CrossModalModel& model,
                          const ObjectiveWeights& weights, std::mt19937_64& rng) {
  return assemble_objective(forward_generators(x_u, x_v, model, weights, rng), model,
                            weights);
}

}  // namespace cyclehash
