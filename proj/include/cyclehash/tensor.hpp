#pragma once

// Dense f64 tensors with record-on-execute reverse-mode differentiation.
//
// A Tensor is a cheap handle to a graph node. Operations on tensors that
// require gradients record their inputs and a backward rule on the result;
// backward() walks the recorded graph from a scalar root in reverse
// topological order. Independent graphs share no state and may be built on
// different threads.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace cyclehash {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Adds d(root)/d(input) into each input's grad, given this node's grad.
  std::function<void(Node&)> backward_fn;

  std::vector<double>& ensure_grad();
};

}  // namespace detail

class Tensor {
 public:
  Tensor();

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  /// Leaf that accumulates gradients.
  static Tensor parameter(Shape shape, std::vector<double> values);
  /// Leaf filled with N(0, stddev^2) draws.
  static Tensor gaussian(Shape shape, double stddev, std::mt19937_64& rng,
                         bool requires_grad);

  const Shape& shape() const;
  std::size_t numel() const;
  std::size_t rank() const { return shape().size(); }
  /// Rows/cols of a rank-2 tensor; a rank-1 tensor is treated as one row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const;
  /// Direct write access, for optimizers and initialization. Does not record.
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t i, std::size_t j) const;

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Same values, cut from the graph.
  Tensor detach() const;

  const char* op_name() const;
  bool same_node(const Tensor& other) const { return node_ == other.node_; }
  /// False for a default-constructed handle.
  bool defined() const { return node_ != nullptr; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node);
  std::shared_ptr<detail::Node> node_;

  friend class OpBuilder;
  friend void backward(const Tensor& root);
};

/// Accumulates d(root)/d(leaf) into every requires_grad leaf reachable from
/// `root`. Throws ShapeError when root is not a scalar and std::logic_error
/// when root does not depend on any parameter.
void backward(const Tensor& root);

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Elementwise binary ops. Shapes must match, or one side must hold a single
// element (scalar broadcast).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// Elementwise unary ops.
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
Tensor exp(const Tensor& a);
/// log(1 + exp(a)), evaluated without overflow.
Tensor softplus(const Tensor& a);
/// log(sigmoid(a)) = -softplus(-a).
Tensor log_sigmoid(const Tensor& a);

/// Adds a length-n row vector to every row of an m x n matrix.
Tensor add_row(const Tensor& matrix, const Tensor& row);

/// Full reduction to a one-element tensor.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Reduction of a rank-2 tensor along axis 0 (result 1 x n) or 1 (m x 1).
Tensor sum(const Tensor& a, int axis);
Tensor mean(const Tensor& a, int axis);

/// Stochastic binary neuron: out_k = 1 if probs_k >= noise_k else 0.
/// Backward passes the incoming gradient straight through to `probs`.
/// `noise` holds U(0,1) draws with the same shape as `probs`.
Tensor stochastic_binary(const Tensor& probs, std::span<const double> noise);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator-(const Tensor& a) { return scale(a, -1.0); }

/// Uniform draw in [0, 1) with 53 random bits; independent of the standard
/// library's distribution implementations.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<double> uniform_noise(std::size_t count, std::mt19937_64& rng);

}  // namespace cyclehash
