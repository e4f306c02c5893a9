#include "cyclehash/models.hpp"

#include <cmath>
#include <numbers>

#include "cyclehash/errors.hpp"

namespace cyclehash {

std::string modality_name(Modality m) { return m == Modality::kU ? "u" : "v"; }

Mlp::Mlp(const std::vector<std::size_t>& sizes, Activation hidden,
         bool activate_last, std::mt19937_64& rng, double init_stddev)
    : hidden_(hidden), activate_last_(activate_last) {
  if (sizes.size() < 2) throw ShapeError("Mlp: need at least input and output sizes");
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    DenseLayer layer;
    layer.weight = Tensor::gaussian({sizes[i], sizes[i + 1]}, init_stddev, rng, true);
    layer.bias = Tensor::parameter({1, sizes[i + 1]},
                                   std::vector<double>(sizes[i + 1], 0.0));
    layers_.push_back(std::move(layer));
  }
}

Tensor Mlp::forward(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = add_row(matmul(h, layers_[i].weight), layers_[i].bias);
    if (i + 1 < layers_.size() || activate_last_) {
      h = hidden_ == Activation::kRelu ? relu(h) : tanh(h);
    }
  }
  return h;
}

std::size_t Mlp::input_dim() const {
  return layers_.empty() ? 0 : layers_.front().weight.shape()[0];
}

std::size_t Mlp::output_dim() const {
  return layers_.empty() ? 0 : layers_.back().weight.shape()[1];
}

void Mlp::append_named(const std::string& prefix,
                       std::vector<std::pair<std::string, Tensor>>& out) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    out.emplace_back(prefix + "." + std::to_string(i) + ".weight", layers_[i].weight);
    out.emplace_back(prefix + "." + std::to_string(i) + ".bias", layers_[i].bias);
  }
}

namespace {

void check_cols(const Tensor& x, std::size_t expected, const char* what) {
  if (x.rank() != 2 || x.cols() != expected) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(expected) +
                     " columns, got shape " + shape_string(x.shape()));
  }
}

}  // namespace

Encoder::Encoder(std::size_t input_dim, std::size_t bits,
                 const std::vector<std::size_t>& stem_hidden,
                 std::mt19937_64& rng, double init_stddev)
    : input_dim_(input_dim), bits_(bits) {
  if (input_dim == 0 || bits == 0) throw ShapeError("Encoder: dimensions must be positive");
  std::size_t feature_dim = input_dim;
  if (!stem_hidden.empty()) {
    std::vector<std::size_t> sizes{input_dim};
    sizes.insert(sizes.end(), stem_hidden.begin(), stem_hidden.end());
    stem_ = Mlp(sizes, Activation::kTanh, true, rng, init_stddev);
    feature_dim = stem_hidden.back();
  }
  weight_ = Tensor::gaussian({feature_dim, bits}, init_stddev, rng, true);
}

Tensor Encoder::pre_activation(const Tensor& x) const {
  check_cols(x, input_dim_, "Encoder");
  const Tensor features = stem_.empty() ? x : stem_.forward(x);
  return matmul(features, weight_);
}

Tensor Encoder::probabilities(const Tensor& x) const {
  return sigmoid(pre_activation(x));
}

Tensor Encoder::binarize(const Tensor& x) const {
  const Tensor pre = pre_activation(x);
  std::vector<double> bits(pre.numel());
  const auto values = pre.values();
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = values[i] >= 0.0 ? 1.0 : 0.0;
  return Tensor::constant(pre.shape(), std::move(bits));
}

void Encoder::append_named(const std::string& prefix,
                           std::vector<std::pair<std::string, Tensor>>& out) const {
  stem_.append_named(prefix + ".stem", out);
  out.emplace_back(prefix + ".W", weight_);
}

Decoder::Decoder(std::size_t output_dim, std::size_t bits, std::mt19937_64& rng,
                 double init_stddev)
    : output_dim_(output_dim), bits_(bits) {
  if (output_dim == 0 || bits == 0) throw ShapeError("Decoder: dimensions must be positive");
  codebook_ = Tensor::gaussian({output_dim, bits}, init_stddev, rng, true);
  log_rho_ = Tensor::parameter({1}, {0.0});
  beta_ = Tensor::parameter({1, bits}, std::vector<double>(bits, 0.0));
}

Tensor Decoder::decode(const Tensor& h) const {
  check_cols(h, bits_, "Decoder");
  return matmul(h, transpose(codebook_));
}

Tensor Decoder::log_joint(const Tensor& x, const Tensor& h) const {
  check_cols(x, output_dim_, "Decoder::log_joint");
  if (h.rows() != x.rows()) {
    throw ShapeError("Decoder::log_joint: x and h have different row counts");
  }
  const double d = static_cast<double>(output_dim_);
  const Tensor residual = sub(x, decode(h));
  const Tensor sq = sum(square(residual), 1);                 // n x 1
  const Tensor inv_var = exp(scale(log_rho_, -2.0));           // 1 / rho^2
  const Tensor quadratic = scale(mul(sq, inv_var), -0.5);
  const Tensor normalizer =
      add_scalar(scale(log_rho_, -d), -0.5 * d * std::log(2.0 * std::numbers::pi));
  const Tensor prior = sub(matmul(h, transpose(beta_)), sum(softplus(beta_)));
  return add(add(quadratic, normalizer), prior);
}

void Decoder::append_named(const std::string& prefix,
                           std::vector<std::pair<std::string, Tensor>>& out) const {
  out.emplace_back(prefix + ".U", codebook_);
  out.emplace_back(prefix + ".log_rho", log_rho_);
  out.emplace_back(prefix + ".beta", beta_);
}

Discriminator::Discriminator(std::size_t input_dim,
                             const std::vector<std::size_t>& hidden,
                             std::mt19937_64& rng, double init_stddev) {
  std::vector<std::size_t> sizes{input_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  net_ = Mlp(sizes, Activation::kRelu, false, rng, init_stddev);
}

Tensor Discriminator::score(const Tensor& x) const {
  check_cols(x, input_dim(), "Discriminator");
  return net_.forward(x);
}

std::vector<Tensor> ModalityModel::generator_parameters() const {
  std::vector<std::pair<std::string, Tensor>> named;
  encoder.append_named("e", named);
  decoder.append_named("d", named);
  std::vector<Tensor> out;
  for (auto& [name, t] : named) out.push_back(t);
  return out;
}

std::vector<Tensor> ModalityModel::discriminator_parameters() const {
  std::vector<std::pair<std::string, Tensor>> named;
  discriminator.net().append_named("D", named);
  std::vector<Tensor> out;
  for (auto& [name, t] : named) out.push_back(t);
  return out;
}

void ModalityModel::append_named(
    std::vector<std::pair<std::string, Tensor>>& out) const {
  const std::string p = modality_name(tag);
  encoder.append_named(p + ".encoder", out);
  decoder.append_named(p + ".decoder", out);
  discriminator.net().append_named(p + ".disc", out);
}

CrossModalModel CrossModalModel::create(const ArchitectureConfig& arch,
                                        std::size_t dim_u, std::size_t dim_v,
                                        std::mt19937_64& rng) {
  CrossModalModel model;
  model.bits = arch.bits;
  auto build = [&](Modality tag, std::size_t dim,
                   const std::vector<std::size_t>& stem) {
    ModalityModel m;
    m.tag = tag;
    m.dim = dim;
    m.encoder = Encoder(dim, arch.bits, stem, rng);
    m.decoder = Decoder(dim, arch.bits, rng);
    m.discriminator = Discriminator(dim, arch.disc_hidden, rng);
    return m;
  };
  model.u = build(Modality::kU, dim_u, arch.stem_u);
  model.v = build(Modality::kV, dim_v, arch.stem_v);
  return model;
}

std::vector<Tensor> CrossModalModel::generator_parameters() const {
  auto out = u.generator_parameters();
  auto rest = v.generator_parameters();
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

std::vector<std::pair<std::string, Tensor>> CrossModalModel::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  u.append_named(out);
  v.append_named(out);
  return out;
}

Tensor sample_hash(const Tensor& probs, std::mt19937_64& rng) {
  return stochastic_binary(probs, uniform_noise(probs.numel(), rng));
}

Tensor translate(const Tensor& x, const ModalityModel& src,
                 const ModalityModel& dst, TranslateMode mode,
                 std::mt19937_64* rng) {
  if (src.encoder.bits() != dst.decoder.bits()) {
    throw ShapeError("translate: models use different code lengths");
  }
  if (mode == TranslateMode::kDeterministic) {
    return dst.decoder.decode(src.encoder.binarize(x));
  }
  if (rng == nullptr) throw std::invalid_argument("translate: stochastic mode needs an rng");
  return dst.decoder.decode(sample_hash(src.encoder.probabilities(x), *rng));
}

Tensor to_tensor(const Matrix& m) {
  return Tensor::constant({m.rows(), m.cols()}, m.storage());
}

Matrix to_matrix(const Tensor& t) {
  return Matrix(t.rows(), t.cols(), std::vector<double>(t.values().begin(), t.values().end()));
}

}  // namespace cyclehash
