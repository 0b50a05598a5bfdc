#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace tbm {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until backward first touches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backprop;

  std::size_t size() const { return data.size(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

/// Dense row-major tensor of doubles with reverse-mode automatic
/// differentiation. A Tensor is a cheap handle: copies share storage and
/// gradient. Operations record the gradient graph whenever an input has
/// requires_grad set; calling backward() on a scalar result accumulates
/// d(result)/d(leaf) into each reachable leaf's grad.
class Tensor {
 public:
  Tensor();  // empty: shape {0}, no elements
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor from_node(std::shared_ptr<detail::TensorNode> node);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->data.size(); }

  const std::vector<double>& values() const { return node_->data; }
  std::vector<double>& values() { return node_->data; }
  double operator[](std::size_t flat_index) const { return node_->data[flat_index]; }

  /// Value of a single-element tensor. Throws NotScalar otherwise.
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on);

  bool has_grad() const { return !node_->grad.empty(); }
  /// Accumulated gradient. Throws EmptyGradient if backward never reached
  /// this tensor and zero_grad was never called.
  const std::vector<double>& grad() const;
  void zero_grad();

  /// Reverse-mode sweep from a scalar. Gradients accumulate across calls
  /// until cleared.
  void backward();

  std::shared_ptr<detail::TensorNode> node() const { return node_; }

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

// --- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor exp(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
/// Clamp to [lo, hi]; gradient is passed through inside the interval and
/// zero outside.
Tensor clamp(const Tensor& a, double lo, double hi);

// --- reductions ------------------------------------------------------------

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
/// [, n] -> []: mean over the last dimension.
Tensor mean_lastdim(const Tensor& a);
/// Softmax over the last dimension; rows sum to 1.
Tensor softmax(const Tensor& a);

// --- shape -----------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape new_shape);
/// Concatenate along the last dimension (ranks 1 and 2).
Tensor concat_lastdim(const Tensor& a, const Tensor& b);
/// Keep the trailing `keep` entries of the last dimension.
Tensor crop_tail(const Tensor& a, std::size_t keep);

// --- linear algebra ----------------------------------------------------------

/// [batch, m] x [m, n] -> [batch, n]
Tensor matmul(const Tensor& a, const Tensor& b);

}  // namespace tbm
