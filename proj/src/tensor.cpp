#include "tbm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>
#include <utility>

#include "tbm/errors.hpp"

namespace tbm {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Tensor::Tensor() {
  node_ = std::make_shared<detail::TensorNode>();
  node_->shape = Shape{0};
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad) {
  node_ = std::make_shared<detail::TensorNode>();
  node_->data.assign(shape_size(shape), fill);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_size(shape) != values.size())
    throw ShapeMismatch("tensor data length " + std::to_string(values.size()) +
                        " does not match shape product " + std::to_string(shape_size(shape)));
  node_ = std::make_shared<detail::TensorNode>();
  node_->shape = std::move(shape);
  node_->data = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{1}, std::vector<double>{value}); }

Tensor Tensor::vector(std::vector<double> values) {
  Shape s{values.size()};
  return Tensor(std::move(s), std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

Tensor Tensor::from_node(std::shared_ptr<detail::TensorNode> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

double Tensor::item() const {
  if (size() != 1) throw NotScalar("item() on tensor of size " + std::to_string(size()));
  return node_->data[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
  node_->requires_grad = on;
  return *this;
}

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) throw EmptyGradient();
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

void Tensor::backward() {
  if (size() != 1) throw NotScalar("backward() requires a scalar loss");
  if (!node_->requires_grad) return;  // no differentiable leaves reachable

  // Post-order over the recorded graph, then propagate in reverse.
  std::vector<detail::TensorNode*> order;
  std::unordered_set<detail::TensorNode*> visited;
  std::vector<std::pair<detail::TensorNode*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto [node, next] = stack.back();
    if (next < node->parents.size()) {
      ++stack.back().second;
      detail::TensorNode* parent = node->parents[next].get();
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backprop) (*it)->backprop(**it);
  }
}

namespace {

using NodePtr = std::shared_ptr<detail::TensorNode>;

Tensor make_result(Shape shape, std::vector<double> data, std::vector<NodePtr> parents,
                   std::function<void(detail::TensorNode&)> backprop) {
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  bool track = false;
  for (const auto& p : parents)
    if (p->requires_grad) track = true;
  if (track) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backprop = std::move(backprop);
  }
  return Tensor::from_node(node);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeMismatch(std::string(op) + ": operand shapes differ");
}

// Shared implementation for elementwise unary ops. `dfdy` maps (x, y) to the
// local derivative, where y is the already-computed output value.
template <typename Fwd, typename Dfdy>
Tensor unary_op(const Tensor& a, Fwd fwd, Dfdy dfdy) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a[i]);
  auto pa = a.node();
  return make_result(a.shape(), std::move(out), {pa}, [pa, dfdy](detail::TensorNode& self) {
    pa->ensure_grad();
    for (std::size_t i = 0; i < self.data.size(); ++i)
      pa->grad[i] += self.grad[i] * dfdy(pa->data[i], self.data[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  auto pa = a.node();
  auto pb = b.node();
  return make_result(a.shape(), std::move(out), {pa, pb}, [pa, pb](detail::TensorNode& self) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < self.data.size(); ++i) pa->grad[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < self.data.size(); ++i) pb->grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  auto pa = a.node();
  auto pb = b.node();
  return make_result(a.shape(), std::move(out), {pa, pb}, [pa, pb](detail::TensorNode& self) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < self.data.size(); ++i) pa->grad[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < self.data.size(); ++i) pb->grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  auto pa = a.node();
  auto pb = b.node();
  return make_result(a.shape(), std::move(out), {pa, pb}, [pa, pb](detail::TensorNode& self) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < self.data.size(); ++i)
        pa->grad[i] += self.grad[i] * pb->data[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < self.data.size(); ++i)
        pb->grad[i] += self.grad[i] * pa->data[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary_op(
      a, [factor](double x) { return x * factor; },
      [factor](double, double) { return factor; });
}

Tensor exp(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor relu(const Tensor& a) {
  return unary_op(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary_op(
      a, [lo, hi](double x) { return std::min(hi, std::max(lo, x)); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Tensor sum_all(const Tensor& a) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += a[i];
  auto pa = a.node();
  return make_result(Shape{1}, {total}, {pa}, [pa](detail::TensorNode& self) {
    pa->ensure_grad();
    for (double& g : pa->grad) g += self.grad[0];
  });
}

Tensor mean_all(const Tensor& a) {
  if (a.size() == 0) throw ShapeMismatch("mean_all: empty tensor");
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += a[i];
  const double inv = 1.0 / static_cast<double>(a.size());
  auto pa = a.node();
  return make_result(Shape{1}, {total * inv}, {pa}, [pa, inv](detail::TensorNode& self) {
    pa->ensure_grad();
    for (double& g : pa->grad) g += self.grad[0] * inv;
  });
}

Tensor mean_lastdim(const Tensor& a) {
  if (a.rank() == 0) throw ShapeMismatch("mean_lastdim: rank-0 tensor");
  const std::size_t n = a.shape().back();
  if (n == 0) throw ShapeMismatch("mean_lastdim: empty last dimension");
  const std::size_t slices = a.size() / n;
  std::vector<double> out(slices, 0.0);
  for (std::size_t s = 0; s < slices; ++s) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += a[s * n + i];
    out[s] = total / static_cast<double>(n);
  }
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  auto pa = a.node();
  return make_result(std::move(out_shape), std::move(out), {pa}, [pa, n](detail::TensorNode& self) {
    pa->ensure_grad();
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t s = 0; s < self.data.size(); ++s)
      for (std::size_t i = 0; i < n; ++i) pa->grad[s * n + i] += self.grad[s] * inv;
  });
}

Tensor softmax(const Tensor& a) {
  if (a.rank() == 0 || a.shape().back() == 0) throw ShapeMismatch("softmax: empty last dimension");
  const std::size_t n = a.shape().back();
  const std::size_t slices = a.size() / n;
  std::vector<double> out(a.size());
  for (std::size_t s = 0; s < slices; ++s) {
    const std::size_t base = s * n;
    double hi = a[base];
    for (std::size_t i = 1; i < n; ++i) hi = std::max(hi, a[base + i]);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      out[base + i] = std::exp(a[base + i] - hi);
      total += out[base + i];
    }
    for (std::size_t i = 0; i < n; ++i) out[base + i] /= total;
  }
  auto pa = a.node();
  return make_result(a.shape(), std::move(out), {pa}, [pa, n](detail::TensorNode& self) {
    pa->ensure_grad();
    const std::size_t slices = self.data.size() / n;
    for (std::size_t s = 0; s < slices; ++s) {
      const std::size_t base = s * n;
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += self.grad[base + i] * self.data[base + i];
      for (std::size_t i = 0; i < n; ++i)
        pa->grad[base + i] += self.data[base + i] * (self.grad[base + i] - dot);
    }
  });
}

Tensor reshape(const Tensor& a, Shape new_shape) {
  if (shape_size(new_shape) != a.size())
    throw ShapeMismatch("reshape: size " + std::to_string(a.size()) + " to incompatible shape");
  auto pa = a.node();
  return make_result(std::move(new_shape), a.values(), {pa}, [pa](detail::TensorNode& self) {
    pa->ensure_grad();
    for (std::size_t i = 0; i < self.data.size(); ++i) pa->grad[i] += self.grad[i];
  });
}

Tensor concat_lastdim(const Tensor& a, const Tensor& b) {
  if (a.rank() != b.rank() || a.rank() == 0 || a.rank() > 2)
    throw ShapeMismatch("concat_lastdim: supports matching rank-1/rank-2 operands");
  if (a.rank() == 2 && a.shape()[0] != b.shape()[0])
    throw ShapeMismatch("concat_lastdim: leading dimensions differ");
  const std::size_t rows = a.rank() == 2 ? a.shape()[0] : 1;
  const std::size_t na = a.shape().back();
  const std::size_t nb = b.shape().back();
  std::vector<double> out(rows * (na + nb));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < na; ++i) out[r * (na + nb) + i] = a[r * na + i];
    for (std::size_t i = 0; i < nb; ++i) out[r * (na + nb) + na + i] = b[r * nb + i];
  }
  Shape out_shape = a.shape();
  out_shape.back() = na + nb;
  auto pa = a.node();
  auto pb = b.node();
  return make_result(std::move(out_shape), std::move(out), {pa, pb},
                     [pa, pb, rows, na, nb](detail::TensorNode& self) {
                       if (pa->requires_grad) {
                         pa->ensure_grad();
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t i = 0; i < na; ++i)
                             pa->grad[r * na + i] += self.grad[r * (na + nb) + i];
                       }
                       if (pb->requires_grad) {
                         pb->ensure_grad();
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t i = 0; i < nb; ++i)
                             pb->grad[r * nb + i] += self.grad[r * (na + nb) + na + i];
                       }
                     });
}

Tensor crop_tail(const Tensor& a, std::size_t keep) {
  if (a.rank() == 0) throw ShapeMismatch("crop_tail: rank-0 tensor");
  const std::size_t n = a.shape().back();
  if (keep > n) throw ShapeMismatch("crop_tail: keep exceeds last dimension");
  const std::size_t slices = a.size() / n;
  const std::size_t skip = n - keep;
  std::vector<double> out(slices * keep);
  for (std::size_t s = 0; s < slices; ++s)
    for (std::size_t i = 0; i < keep; ++i) out[s * keep + i] = a[s * n + skip + i];
  Shape out_shape = a.shape();
  out_shape.back() = keep;
  auto pa = a.node();
  return make_result(std::move(out_shape), std::move(out), {pa},
                     [pa, n, keep, skip](detail::TensorNode& self) {
                       pa->ensure_grad();
                       const std::size_t slices = self.data.size() / keep;
                       for (std::size_t s = 0; s < slices; ++s)
                         for (std::size_t i = 0; i < keep; ++i)
                           pa->grad[s * n + skip + i] += self.grad[s * keep + i];
                     });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeMismatch("matmul: rank-2 operands required");
  const std::size_t rows = a.shape()[0], inner = a.shape()[1];
  if (b.shape()[0] != inner) throw ShapeMismatch("matmul: inner dimensions differ");
  const std::size_t cols = b.shape()[1];
  std::vector<double> out(rows * cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < inner; ++k) {
      const double av = a[r * inner + k];
      if (av == 0.0) continue;
      const std::size_t bo = k * cols;
      for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += av * b[bo + c];
    }
  }
  auto pa = a.node();
  auto pb = b.node();
  return make_result(Shape{rows, cols}, std::move(out), {pa, pb},
                     [pa, pb, rows, inner, cols](detail::TensorNode& self) {
                       if (pa->requires_grad) {
                         pa->ensure_grad();
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t k = 0; k < inner; ++k) {
                             double acc = 0.0;
                             for (std::size_t c = 0; c < cols; ++c)
                               acc += self.grad[r * cols + c] * pb->data[k * cols + c];
                             pa->grad[r * inner + k] += acc;
                           }
                       }
                       if (pb->requires_grad) {
                         pb->ensure_grad();
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t k = 0; k < inner; ++k) {
                             const double av = pa->data[r * inner + k];
                             if (av == 0.0) continue;
                             for (std::size_t c = 0; c < cols; ++c)
                               pb->grad[k * cols + c] += av * self.grad[r * cols + c];
                           }
                       }
                     });
}

}  // namespace tbm
