#include "cyclehash/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>
#include <utility>

#include "cyclehash/errors.hpp"
#include "cyclehash/kernels.hpp"

namespace cyclehash {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::vector<double>& detail::Node::ensure_grad() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have rank >= 1");
  for (auto dim : shape) {
    if (dim == 0) throw ShapeError("tensor dimensions must be positive");
  }
}

void check_finite(const std::vector<double>& values, const char* op) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite value produced by ") + op);
    }
  }
}

double softplus_value(double x) {
  // log(1 + e^x) = max(x, 0) + log1p(e^{-|x|})
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// Builds op results; only graph-connected results keep their inputs.
class OpBuilder {
 public:
  static Tensor make(Shape shape, std::vector<double> values, const char* op,
                     std::vector<NodePtr> inputs,
                     std::function<void(Node&)> backward_fn) {
    check_finite(values, op);
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->op = op;
    for (const auto& in : inputs) {
      if (in->requires_grad) node->requires_grad = true;
    }
    if (node->requires_grad) {
      node->inputs = std::move(inputs);
      node->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(node));
  }

  static const NodePtr& node(const Tensor& t) {
    if (!t.node_) throw std::logic_error("use of an undefined tensor");
    return t.node_;
  }
};

namespace {

const NodePtr& N(const Tensor& t) { return OpBuilder::node(t); }

void accumulate(Node& target, std::size_t i, double g) {
  if (!target.requires_grad) return;
  target.ensure_grad()[i] += g;
}

// Elementwise binary op with scalar broadcast. `fwd(a, b)` computes the
// value, `da(a, b)` and `db(a, b)` the local partials.
template <class Fwd, class Da, class Db>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* op, Fwd fwd,
                 Da da, Db db) {
  const auto& na = N(a);
  const auto& nb = N(b);
  const std::size_t sa = na->value.size();
  const std::size_t sb = nb->value.size();
  Shape shape;
  if (na->shape == nb->shape || sb == 1) {
    shape = na->shape;
  } else if (sa == 1) {
    shape = nb->shape;
  } else {
    throw ShapeError(std::string(op) + ": incompatible shapes " +
                     shape_string(na->shape) + " and " +
                     shape_string(nb->shape));
  }
  const std::size_t n = shape_numel(shape);
  auto ia = [sa](std::size_t i) { return sa == 1 ? 0 : i; };
  auto ib = [sb](std::size_t i) { return sb == 1 ? 0 : i; };
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = fwd(na->value[ia(i)], nb->value[ib(i)]);
  }
  return OpBuilder::make(
      std::move(shape), std::move(out), op, {na, nb},
      [ia, ib, da, db](Node& self) {
        Node& x = *self.inputs[0];
        Node& y = *self.inputs[1];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          const double g = self.grad[i];
          const double xv = x.value[ia(i)];
          const double yv = y.value[ib(i)];
          accumulate(x, ia(i), g * da(xv, yv));
          accumulate(y, ib(i), g * db(xv, yv));
        }
      });
}

// Elementwise unary op; `deriv(x, y)` gets the input and output values.
template <class Fwd, class Deriv>
Tensor unary_op(const Tensor& a, const char* op, Fwd fwd, Deriv deriv) {
  const auto& na = N(a);
  std::vector<double> out(na->value.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(na->value[i]);
  return OpBuilder::make(na->shape, std::move(out), op, {na},
                         [deriv](Node& self) {
                           Node& x = *self.inputs[0];
                           for (std::size_t i = 0; i < self.grad.size(); ++i) {
                             accumulate(x, i,
                                        self.grad[i] *
                                            deriv(x.value[i], self.value[i]));
                           }
                         });
}

std::pair<std::size_t, std::size_t> matrix_dims(const Node& n) {
  if (n.shape.size() == 1) return {1, n.shape[0]};
  if (n.shape.size() == 2) return {n.shape[0], n.shape[1]};
  throw ShapeError("expected a rank-1 or rank-2 tensor, got " +
                   shape_string(n.shape));
}

}  // namespace

Tensor::Tensor() = default;
Tensor::Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  check_shape(shape);
  if (values.size() != shape_numel(shape)) {
    throw ShapeError("constant: " + std::to_string(values.size()) +
                     " values for shape " + shape_string(shape));
  }
  check_finite(values, "constant");
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  check_shape(shape);
  const auto n = shape_numel(shape);
  return constant(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return constant({1}, {value}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

Tensor Tensor::gaussian(Shape shape, double stddev, std::mt19937_64& rng,
                        bool requires_grad) {
  check_shape(shape);
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = dist(rng);
  Tensor t = constant(std::move(shape), std::move(values));
  t.node_->requires_grad = requires_grad;
  return t;
}

const Shape& Tensor::shape() const { return N(*this)->shape; }
std::size_t Tensor::numel() const { return N(*this)->value.size(); }
std::size_t Tensor::rows() const { return matrix_dims(*N(*this)).first; }
std::size_t Tensor::cols() const { return matrix_dims(*N(*this)).second; }
std::span<const double> Tensor::values() const { return N(*this)->value; }
std::span<double> Tensor::mutable_values() { return N(*this)->value; }

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_string(shape()));
  }
  return N(*this)->value[0];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  const auto [r, c] = matrix_dims(*N(*this));
  if (i >= r || j >= c) throw ShapeError("at(): index out of range");
  return N(*this)->value[i * c + j];
}

bool Tensor::requires_grad() const { return N(*this)->requires_grad; }
bool Tensor::has_grad() const { return !N(*this)->grad.empty(); }
std::span<const double> Tensor::grad() const { return N(*this)->grad; }
std::span<double> Tensor::mutable_grad() { return N(*this)->ensure_grad(); }

void Tensor::zero_grad() {
  auto& g = N(*this)->grad;
  std::fill(g.begin(), g.end(), 0.0);
}

Tensor Tensor::detach() const {
  return constant(shape(), N(*this)->value);
}

const char* Tensor::op_name() const { return N(*this)->op; }

void backward(const Tensor& root) {
  const auto& rn = N(root);
  if (rn->value.size() != 1) {
    throw ShapeError("backward: root must be a scalar, got shape " +
                     shape_string(rn->shape));
  }
  if (!rn->requires_grad) {
    throw std::logic_error("backward: root does not depend on any parameter");
  }

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{rn.get(), 0}};
  visited.insert(rn.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  rn->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (!node->backward_fn) continue;  // leaf
    if (!node->grad.empty()) {
      node->backward_fn(*node);
      check_finite(node->grad, node->op);
    }
    // Interior gradients are consumed exactly once.
    node->grad.clear();
  }
  for (Node* node : order) {
    if (!node->backward_fn) check_finite(node->grad, "backward");
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto& na = N(a);
  const auto& nb = N(b);
  if (na->shape.size() != 2 || nb->shape.size() != 2) {
    throw ShapeError("matmul: expected rank-2 operands, got " +
                     shape_string(na->shape) + " and " +
                     shape_string(nb->shape));
  }
  const std::size_t m = na->shape[0], k = na->shape[1], n = nb->shape[1];
  if (nb->shape[0] != k) {
    throw ShapeError("matmul: inner dimensions differ, " +
                     shape_string(na->shape) + " x " +
                     shape_string(nb->shape));
  }
  std::vector<double> out(m * n);
  kernels::gemm({.m = m, .n = n, .k = k}, na->value, nb->value, out);
  return OpBuilder::make({m, n}, std::move(out), "matmul", {na, nb},
                         [m, n, k](Node& self) {
                           Node& x = *self.inputs[0];
                           Node& y = *self.inputs[1];
                           if (x.requires_grad) {
                             // dA = dC * B^T
                             kernels::gemm({.trans_b = true, .m = m, .n = k,
                                            .k = n, .accumulate = true},
                                           self.grad, y.value, x.ensure_grad());
                           }
                           if (y.requires_grad) {
                             // dB = A^T * dC
                             kernels::gemm({.trans_a = true, .m = k, .n = n,
                                            .k = m, .accumulate = true},
                                           x.value, self.grad, y.ensure_grad());
                           }
                         });
}

Tensor transpose(const Tensor& a) {
  const auto& na = N(a);
  const auto [m, n] = matrix_dims(*na);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = na->value[i * n + j];
  }
  return OpBuilder::make({n, m}, std::move(out), "transpose", {na},
                         [m, n](Node& self) {
                           Node& x = *self.inputs[0];
                           auto& g = x.ensure_grad();
                           for (std::size_t i = 0; i < m; ++i) {
                             for (std::size_t j = 0; j < n; ++j) {
                               g[i * n + j] += self.grad[j * m + i];
                             }
                           }
                         });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary_op(
      a, "scale", [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return unary_op(
      a, "add_scalar", [offset](double x) { return x + offset; },
      [](double, double) { return 1.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(a, "sigmoid", sigmoid_value,
                  [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary_op(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary_op(
      a, "relu", [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor abs(const Tensor& a) {
  return unary_op(
      a, "abs", [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& a) {
  return unary_op(
      a, "square", [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Tensor exp(const Tensor& a) {
  return unary_op(
      a, "exp", [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor softplus(const Tensor& a) {
  return unary_op(a, "softplus", softplus_value,
                  [](double x, double) { return sigmoid_value(x); });
}

Tensor log_sigmoid(const Tensor& a) {
  return unary_op(
      a, "log_sigmoid", [](double x) { return -softplus_value(-x); },
      [](double x, double) { return sigmoid_value(-x); });
}

Tensor add_row(const Tensor& matrix, const Tensor& row) {
  const auto& nm = N(matrix);
  const auto& nr = N(row);
  const auto [m, n] = matrix_dims(*nm);
  if (nr->value.size() != n) {
    throw ShapeError("add_row: row of " + std::to_string(nr->value.size()) +
                     " elements for matrix " + shape_string(nm->shape));
  }
  std::vector<double> out(nm->value);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += nr->value[j];
  }
  return OpBuilder::make(nm->shape, std::move(out), "add_row", {nm, nr},
                         [m, n](Node& self) {
                           Node& x = *self.inputs[0];
                           Node& r = *self.inputs[1];
                           for (std::size_t i = 0; i < m * n; ++i) {
                             accumulate(x, i, self.grad[i]);
                             accumulate(r, i % n, self.grad[i]);
                           }
                         });
}

Tensor sum(const Tensor& a) {
  const auto& na = N(a);
  double total = 0.0;
  for (double v : na->value) total += v;
  return OpBuilder::make({1}, {total}, "sum", {na}, [](Node& self) {
    Node& x = *self.inputs[0];
    auto& g = x.ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor sum(const Tensor& a, int axis) {
  const auto& na = N(a);
  if (na->shape.size() != 2 || (axis != 0 && axis != 1)) {
    throw ShapeError("sum: invalid axis " + std::to_string(axis) +
                     " for shape " + shape_string(na->shape));
  }
  const std::size_t m = na->shape[0], n = na->shape[1];
  Shape shape = axis == 0 ? Shape{1, n} : Shape{m, 1};
  std::vector<double> out(axis == 0 ? n : m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out[axis == 0 ? j : i] += na->value[i * n + j];
    }
  }
  return OpBuilder::make(std::move(shape), std::move(out), "sum_axis", {na},
                         [m, n, axis](Node& self) {
                           Node& x = *self.inputs[0];
                           auto& g = x.ensure_grad();
                           for (std::size_t i = 0; i < m; ++i) {
                             for (std::size_t j = 0; j < n; ++j) {
                               g[i * n + j] += self.grad[axis == 0 ? j : i];
                             }
                           }
                         });
}

Tensor mean(const Tensor& a, int axis) {
  Tensor s = sum(a, axis);
  const std::size_t count = axis == 0 ? a.shape()[0] : a.shape()[1];
  return scale(s, 1.0 / static_cast<double>(count));
}

Tensor stochastic_binary(const Tensor& probs, std::span<const double> noise) {
  const auto& np = N(probs);
  if (noise.size() != np->value.size()) {
    throw ShapeError("stochastic_binary: noise size does not match probs");
  }
  std::vector<double> out(np->value.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double z = np->value[i];
    // Closed interval: sigmoid saturates to exactly 0 or 1 in f64.
    if (!(z >= 0.0 && z <= 1.0)) {
      throw NumericError("stochastic_binary: probability outside [0,1]");
    }
    out[i] = z >= noise[i] ? 1.0 : 0.0;
  }
  return OpBuilder::make(np->shape, std::move(out), "stochastic_binary", {np},
                         [](Node& self) {
                           Node& z = *self.inputs[0];
                           auto& g = z.ensure_grad();
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             g[i] += self.grad[i];
                           }
                         });
}

std::vector<double> uniform_noise(std::size_t count, std::mt19937_64& rng) {
  std::vector<double> out(count);
  for (auto& v : out) v = uniform01(rng);
  return out;
}

}  // namespace cyclehash
