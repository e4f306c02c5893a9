#pragma once

// Per-modality hash models. Each modality owns a Bernoulli encoder
// (hash function), a Gaussian decoder over its own feature space, and a
// discriminator on that feature space. The cross-modal mappings reuse them:
//
//   G = decoder_v . encoder_u : x_u -> h_u -> x_v
//   F = decoder_u . encoder_v : x_v -> h_v -> x_u
//
// so both modalities hash into one shared Hamming space.

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cyclehash/linalg.hpp"
#include "cyclehash/tensor.hpp"

namespace cyclehash {

enum class Modality { kU, kV };
std::string modality_name(Modality m);

inline constexpr double kInitStddev = 0.02;

enum class Activation { kRelu, kTanh };

struct DenseLayer {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out
};

/// Affine stack; `hidden` is applied between layers and, when
/// activate_last is set, after the final layer too.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::vector<std::size_t>& sizes, Activation hidden,
      bool activate_last, std::mt19937_64& rng,
      double init_stddev = kInitStddev);

  Tensor forward(const Tensor& x) const;
  bool empty() const { return layers_.empty(); }
  std::size_t input_dim() const;
  std::size_t output_dim() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  void append_named(const std::string& prefix,
                    std::vector<std::pair<std::string, Tensor>>& out) const;

 private:
  std::vector<DenseLayer> layers_;
  Activation hidden_ = Activation::kRelu;
  bool activate_last_ = false;
};

/// q(h|x) = prod_k Bernoulli(sigmoid(w_k^T f(x))), where f is an optional
/// feature stem (identity by default).
class Encoder {
 public:
  Encoder() = default;
  Encoder(std::size_t input_dim, std::size_t bits,
          const std::vector<std::size_t>& stem_hidden, std::mt19937_64& rng,
          double init_stddev = kInitStddev);

  /// W^T f(x) for every row of x (n x d) -> n x K.
  Tensor pre_activation(const Tensor& x) const;
  /// sigmoid(W^T f(x)), each entry in (0, 1).
  Tensor probabilities(const Tensor& x) const;
  /// Deterministic codes (sign(W^T f(x)) + 1) / 2 as a 0/1 n x K constant;
  /// a zero pre-activation maps to bit 1.
  Tensor binarize(const Tensor& x) const;

  std::size_t input_dim() const { return input_dim_; }
  std::size_t bits() const { return bits_; }
  Tensor& weight() { return weight_; }
  const Tensor& weight() const { return weight_; }
  Mlp& stem() { return stem_; }
  const Mlp& stem() const { return stem_; }
  void append_named(const std::string& prefix,
                    std::vector<std::pair<std::string, Tensor>>& out) const;

 private:
  std::size_t input_dim_ = 0;
  std::size_t bits_ = 0;
  Mlp stem_;
  Tensor weight_;  // f-dim x K
};

/// p(x|h) = N(U h, rho^2 I), p(h) = prod_k Bernoulli(theta_k) with
/// beta = log(theta / (1 - theta)).
class Decoder {
 public:
  Decoder() = default;
  Decoder(std::size_t output_dim, std::size_t bits, std::mt19937_64& rng,
          double init_stddev = kInitStddev);

  /// U h for every row of h (n x K) -> n x d. `h` may be relaxed to [0,1].
  Tensor decode(const Tensor& h) const;
  /// log p(x, h) per row -> n x 1:
  ///   -|x - U h|^2 / (2 rho^2) - (d/2) log(2 pi rho^2) + beta^T h
  ///   - sum_k softplus(beta_k)
  Tensor log_joint(const Tensor& x, const Tensor& h) const;

  std::size_t output_dim() const { return output_dim_; }
  std::size_t bits() const { return bits_; }
  Tensor& codebook() { return codebook_; }
  const Tensor& codebook() const { return codebook_; }
  Tensor& log_rho() { return log_rho_; }
  const Tensor& log_rho() const { return log_rho_; }
  Tensor& beta() { return beta_; }
  const Tensor& beta() const { return beta_; }
  void append_named(const std::string& prefix,
                    std::vector<std::pair<std::string, Tensor>>& out) const;

 private:
  std::size_t output_dim_ = 0;
  std::size_t bits_ = 0;
  Tensor codebook_;  // d x K
  Tensor log_rho_;   // 1
  Tensor beta_;      // 1 x K
};

/// Feature-vector discriminator: relu MLP, unbounded scalar score per row.
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                std::mt19937_64& rng, double init_stddev = kInitStddev);

  Tensor score(const Tensor& x) const;  // n x 1
  std::size_t input_dim() const { return net_.input_dim(); }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

 private:
  Mlp net_;
};

struct ModalityModel {
  Modality tag = Modality::kU;
  std::size_t dim = 0;
  Encoder encoder;
  Decoder decoder;
  Discriminator discriminator;

  std::vector<Tensor> generator_parameters() const;
  std::vector<Tensor> discriminator_parameters() const;
  void append_named(std::vector<std::pair<std::string, Tensor>>& out) const;
};

struct ArchitectureConfig {
  std::size_t bits = 16;
  std::vector<std::size_t> stem_u;
  std::vector<std::size_t> stem_v;
  std::vector<std::size_t> disc_hidden{64, 32};

  friend bool operator==(const ArchitectureConfig&, const ArchitectureConfig&) = default;
};

struct CrossModalModel {
  std::size_t bits = 0;
  ModalityModel u;
  ModalityModel v;

  static CrossModalModel create(const ArchitectureConfig& arch,
                                std::size_t dim_u, std::size_t dim_v,
                                std::mt19937_64& rng);

  const ModalityModel& side(Modality m) const { return m == Modality::kU ? u : v; }
  ModalityModel& side(Modality m) { return m == Modality::kU ? u : v; }

  /// Encoder and decoder parameters of both modalities.
  std::vector<Tensor> generator_parameters() const;
  /// Every parameter, with stable dotted names ("u.encoder.W", ...).
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
};

/// Draws h_k = 1[z_k >= xi_k] with xi ~ U(0,1) from `rng`; gradients pass
/// straight through to z.
Tensor sample_hash(const Tensor& probs, std::mt19937_64& rng);

enum class TranslateMode { kStochastic, kDeterministic };

/// decoder_dst(hash_src(x)). Stochastic mode samples the hash through the
/// stochastic neuron (needs rng); deterministic mode binarizes.
Tensor translate(const Tensor& x, const ModalityModel& src,
                 const ModalityModel& dst, TranslateMode mode,
                 std::mt19937_64* rng = nullptr);

/// Rows of a feature matrix as a constant tensor.
Tensor to_tensor(const Matrix& m);
Matrix to_matrix(const Tensor& t);

}  // namespace cyclehash
