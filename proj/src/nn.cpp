#include "tbm/nn.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>

#include "tbm/errors.hpp"

namespace tbm {

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

constexpr double kBceClamp = 1e-7;

}  // namespace

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.rank() != 2 || weight.rank() != 2 || bias.rank() != 1)
    throw ShapeMismatch("linear: expected input [b, m], weight [m, n], bias [n]");
  const std::size_t batch = input.shape()[0], d_in = input.shape()[1];
  if (weight.shape()[0] != d_in) throw ShapeMismatch("linear: input/weight inner dim differs");
  const std::size_t d_out = weight.shape()[1];
  if (bias.shape()[0] != d_out) throw ShapeMismatch("linear: bias length differs from d_out");

  std::vector<double> out(batch * d_out);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < d_out; ++j) out[b * d_out + j] = bias[j];
    for (std::size_t i = 0; i < d_in; ++i) {
      const double xv = input[b * d_in + i];
      if (xv == 0.0) continue;
      const std::size_t wo = i * d_out;
      for (std::size_t j = 0; j < d_out; ++j) out[b * d_out + j] += xv * weight[wo + j];
    }
  }
  auto px = input.node();
  auto pw = weight.node();
  auto pb = bias.node();
  return make_result(
      Shape{batch, d_out}, std::move(out), {px, pw, pb},
      [px, pw, pb, batch, d_in, d_out](detail::TensorNode& self) {
        if (px->requires_grad) {
          px->ensure_grad();
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < d_in; ++i) {
              double acc = 0.0;
              for (std::size_t j = 0; j < d_out; ++j)
                acc += self.grad[b * d_out + j] * pw->data[i * d_out + j];
              px->grad[b * d_in + i] += acc;
            }
        }
        if (pw->requires_grad) {
          pw->ensure_grad();
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < d_in; ++i) {
              const double xv = px->data[b * d_in + i];
              if (xv == 0.0) continue;
              for (std::size_t j = 0; j < d_out; ++j)
                pw->grad[i * d_out + j] += xv * self.grad[b * d_out + j];
            }
        }
        if (pb->requires_grad) {
          pb->ensure_grad();
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t j = 0; j < d_out; ++j) pb->grad[j] += self.grad[b * d_out + j];
        }
      });
}

Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  if (input.rank() != 3 || kernels.rank() != 3 || bias.rank() != 1)
    throw ShapeMismatch("conv1d: expected input [b, c_in, len], kernels [c_out, c_in, k]");
  const std::size_t batch = input.shape()[0];
  const std::size_t c_in = input.shape()[1];
  const std::size_t len = input.shape()[2];
  const std::size_t c_out = kernels.shape()[0];
  const std::size_t k = kernels.shape()[2];
  if (kernels.shape()[1] != c_in) throw ShapeMismatch("conv1d: kernel channel count differs");
  if (bias.shape()[0] != c_out) throw ShapeMismatch("conv1d: bias length differs from c_out");
  if (k < 1) throw ShapeMismatch("conv1d: kernel length must be at least 1");
  if (k > len) throw KernelTooLong("conv1d: kernel length " + std::to_string(k) +
                                   " exceeds input length " + std::to_string(len));
  const std::size_t out_len = len - k + 1;

  std::vector<double> out(batch * c_out * out_len);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < c_out; ++o) {
      double* dst = out.data() + (b * c_out + o) * out_len;
      for (std::size_t t = 0; t < out_len; ++t) dst[t] = bias[o];
      for (std::size_t c = 0; c < c_in; ++c) {
        const double* src = input.values().data() + (b * c_in + c) * len;
        const double* ker = kernels.values().data() + (o * c_in + c) * k;
        for (std::size_t t = 0; t < out_len; ++t) {
          double acc = 0.0;
          for (std::size_t j = 0; j < k; ++j) acc += src[t + j] * ker[j];
          dst[t] += acc;
        }
      }
    }
  }
  auto px = input.node();
  auto pk = kernels.node();
  auto pb = bias.node();
  return make_result(
      Shape{batch, c_out, out_len}, std::move(out), {px, pk, pb},
      [px, pk, pb, batch, c_in, len, c_out, k, out_len](detail::TensorNode& self) {
        if (px->requires_grad) px->ensure_grad();
        if (pk->requires_grad) pk->ensure_grad();
        if (pb->requires_grad) pb->ensure_grad();
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t o = 0; o < c_out; ++o) {
            const double* gout = self.grad.data() + (b * c_out + o) * out_len;
            if (pb->requires_grad) {
              double acc = 0.0;
              for (std::size_t t = 0; t < out_len; ++t) acc += gout[t];
              pb->grad[o] += acc;
            }
            for (std::size_t c = 0; c < c_in; ++c) {
              const double* src = px->data.data() + (b * c_in + c) * len;
              const double* ker = pk->data.data() + (o * c_in + c) * k;
              if (px->requires_grad) {
                double* gin = px->grad.data() + (b * c_in + c) * len;
                for (std::size_t t = 0; t < out_len; ++t)
                  for (std::size_t j = 0; j < k; ++j) gin[t + j] += gout[t] * ker[j];
              }
              if (pk->requires_grad) {
                double* gker = pk->grad.data() + (o * c_in + c) * k;
                for (std::size_t j = 0; j < k; ++j) {
                  double acc = 0.0;
                  for (std::size_t t = 0; t < out_len; ++t) acc += src[t + j] * gout[t];
                  gker[j] += acc;
                }
              }
            }
          }
        }
      });
}

Tensor dropout(const Tensor& input, double p, bool training, std::mt19937_64& rng) {
  if (p < 0.0 || p >= 1.0)
    throw InvalidProbability("dropout: p = " + std::to_string(p) + " outside [0, 1)");
  if (!training) return input;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(input.size());
  std::vector<double> out(input.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = uniform(rng) < p ? 0.0 : keep_scale;
    out[i] = input[i] * mask[i];
  }
  auto px = input.node();
  return make_result(input.shape(), std::move(out), {px},
                     [px, mask = std::move(mask)](detail::TensorNode& self) {
                       px->ensure_grad();
                       for (std::size_t i = 0; i < self.data.size(); ++i)
                         px->grad[i] += self.grad[i] * mask[i];
                     });
}

Tensor scale_channels(const Tensor& input, const Tensor& scores) {
  if (input.rank() != 3 || scores.rank() != 2)
    throw ShapeMismatch("scale_channels: expected input [b, c, t], scores [b, c]");
  const std::size_t batch = input.shape()[0], channels = input.shape()[1], len = input.shape()[2];
  if (scores.shape()[0] != batch || scores.shape()[1] != channels)
    throw ShapeMismatch("scale_channels: score shape differs from input channels");
  std::vector<double> out(input.size());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c) {
      const double s = scores[b * channels + c];
      const std::size_t base = (b * channels + c) * len;
      for (std::size_t t = 0; t < len; ++t) out[base + t] = input[base + t] * s;
    }
  auto px = input.node();
  auto ps = scores.node();
  return make_result(input.shape(), std::move(out), {px, ps},
                     [px, ps, batch, channels, len](detail::TensorNode& self) {
                       if (px->requires_grad) px->ensure_grad();
                       if (ps->requires_grad) ps->ensure_grad();
                       for (std::size_t b = 0; b < batch; ++b)
                         for (std::size_t c = 0; c < channels; ++c) {
                           const std::size_t base = (b * channels + c) * len;
                           const double s = ps->data[b * channels + c];
                           double acc = 0.0;
                           for (std::size_t t = 0; t < len; ++t) {
                             if (px->requires_grad) px->grad[base + t] += self.grad[base + t] * s;
                             acc += self.grad[base + t] * px->data[base + t];
                           }
                           if (ps->requires_grad) ps->grad[b * channels + c] += acc;
                         }
                     });
}

Tensor channel_attention(const Tensor& input, const Tensor& w1, const Tensor& w2) {
  if (input.rank() != 3) throw ShapeMismatch("channel_attention: expected input [b, c, t]");
  const std::size_t channels = input.shape()[1];
  if (w1.rank() != 2 || w1.shape()[0] != channels)
    throw ShapeMismatch("channel_attention: w1 must be [channels, r]");
  if (w2.rank() != 2 || w2.shape()[0] != w1.shape()[1] || w2.shape()[1] != channels)
    throw ShapeMismatch("channel_attention: w2 must be [r, channels]");
  Tensor pooled = mean_lastdim(input);                               // [b, c]
  Tensor scores = softmax(matmul(relu(matmul(pooled, w1)), w2));     // [b, c]
  return scale_channels(input, scale(scores, static_cast<double>(channels)));
}

LstmState lstm_zero_state(std::size_t hidden_dim) {
  return {Tensor(Shape{hidden_dim}), Tensor(Shape{hidden_dim})};
}

LstmState lstm_zero_state(std::size_t batch, std::size_t hidden_dim) {
  return {Tensor(Shape{batch, hidden_dim}), Tensor(Shape{batch, hidden_dim})};
}

LstmState lstm_step(const Tensor& input, const LstmState& state, const LstmWeights& w) {
  const bool single = input.rank() == 1;
  if (!single && input.rank() != 2) throw ShapeMismatch("lstm_step: input must be rank 1 or 2");
  if (state.hidden.shape() != state.cell.shape())
    throw ShapeMismatch("lstm_step: hidden/cell shapes differ");

  Tensor x = single ? reshape(input, Shape{1, input.shape()[0]}) : input;
  Tensor h = single ? reshape(state.hidden, Shape{1, state.hidden.shape()[0]}) : state.hidden;
  Tensor c = single ? reshape(state.cell, Shape{1, state.cell.shape()[0]}) : state.cell;

  const std::size_t d_in = x.shape()[1];
  const std::size_t hidden = h.shape()[1];
  if (w.w_i.shape() != Shape{d_in, hidden} || w.u_i.shape() != Shape{hidden, hidden} ||
      w.b_i.shape() != Shape{hidden})
    throw ShapeMismatch("lstm_step: gate weight shapes do not conform");

  auto gate = [&](const Tensor& wx, const Tensor& uh, const Tensor& b) {
    return add(linear(x, wx, b), matmul(h, uh));
  };
  Tensor i = sigmoid(gate(w.w_i, w.u_i, w.b_i));
  Tensor f = sigmoid(gate(w.w_f, w.u_f, w.b_f));
  Tensor g = tanh(gate(w.w_g, w.u_g, w.b_g));
  Tensor o = sigmoid(gate(w.w_o, w.u_o, w.b_o));
  Tensor c_next = add(mul(f, c), mul(i, g));
  Tensor h_next = mul(o, tanh(c_next));
  if (single) {
    h_next = reshape(h_next, Shape{hidden});
    c_next = reshape(c_next, Shape{hidden});
  }
  return {h_next, c_next};
}

Tensor smooth_l1_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) throw ShapeMismatch("smooth_l1_loss: shapes differ");
  if (pred.size() == 0) throw ShapeMismatch("smooth_l1_loss: empty input");
  const std::size_t n = pred.size();
  double total = 0.0;
  for (std::size_t idx = 0; idx < n; ++idx) {
    const double x = pred[idx] - target[idx];
    total += std::abs(x) < 1.0 ? 0.5 * x * x : std::abs(x) - 0.5;
  }
  const double inv = 1.0 / static_cast<double>(n);
  auto pp = pred.node();
  auto pt = target.node();
  return make_result(Shape{1}, {total * inv}, {pp, pt}, [pp, pt, n, inv](detail::TensorNode& self) {
    const double g = self.grad[0] * inv;
    if (pp->requires_grad) pp->ensure_grad();
    if (pt->requires_grad) pt->ensure_grad();
    for (std::size_t idx = 0; idx < n; ++idx) {
      const double x = pp->data[idx] - pt->data[idx];
      const double d = std::abs(x) < 1.0 ? x : (x > 0.0 ? 1.0 : -1.0);
      if (pp->requires_grad) pp->grad[idx] += g * d;
      if (pt->requires_grad) pt->grad[idx] -= g * d;
    }
  });
}

Tensor bce_loss(const Tensor& x_hat, const Tensor& x) {
  return bce_loss(x_hat, x, std::vector<double>(x.shape().empty() ? 1 : x.shape().back(), 1.0));
}

Tensor bce_loss(const Tensor& x_hat, const Tensor& x, const std::vector<double>& feature_weights) {
  if (x_hat.shape() != x.shape()) throw ShapeMismatch("bce_loss: shapes differ");
  if (x.size() == 0) throw ShapeMismatch("bce_loss: empty input");
  const std::size_t d = x.shape().back();
  if (feature_weights.size() != d)
    throw ShapeMismatch("bce_loss: feature weight count differs from last dimension");
  const std::size_t n = x.size();
  for (std::size_t idx = 0; idx < n; ++idx)
    if (x[idx] < 0.0 || x[idx] > 1.0)
      throw RangeViolation("bce_loss: target outside [0,1] at index " + std::to_string(idx));

  double total = 0.0;
  for (std::size_t idx = 0; idx < n; ++idx) {
    const double p = std::clamp(x_hat[idx], kBceClamp, 1.0 - kBceClamp);
    const double w = feature_weights[idx % d];
    total -= w * (x[idx] * std::log(p) + (1.0 - x[idx]) * std::log(1.0 - p));
  }
  const double inv = 1.0 / static_cast<double>(n);
  auto pp = x_hat.node();
  auto pt = x.node();
  return make_result(
      Shape{1}, {total * inv}, {pp, pt},
      [pp, pt, n, d, inv, weights = feature_weights](detail::TensorNode& self) {
        const double g = self.grad[0] * inv;
        if (pp->requires_grad) pp->ensure_grad();
        if (pt->requires_grad) pt->ensure_grad();
        for (std::size_t idx = 0; idx < n; ++idx) {
          const double raw = pp->data[idx];
          const double p = std::clamp(raw, kBceClamp, 1.0 - kBceClamp);
          const double w = weights[idx % d];
          if (pp->requires_grad && raw > kBceClamp && raw < 1.0 - kBceClamp)
            pp->grad[idx] += g * w * (-pt->data[idx] / p + (1.0 - pt->data[idx]) / (1.0 - p));
          if (pt->requires_grad) pt->grad[idx] += g * w * (std::log(1.0 - p) - std::log(p));
        }
      });
}

Tensor kl_loss(const Tensor& mu, const Tensor& log_var) {
  if (mu.shape() != log_var.shape()) throw ShapeMismatch("kl_loss: shapes differ");
  if (mu.size() == 0) throw ShapeMismatch("kl_loss: empty input");
  if (mu.rank() > 2) throw ShapeMismatch("kl_loss: expected [latent] or [batch, latent]");
  const std::size_t batch = mu.rank() == 2 ? mu.shape()[0] : 1;
  const std::size_t n = mu.size();
  double total = 0.0;
  for (std::size_t idx = 0; idx < n; ++idx) {
    const double s2 = std::exp(log_var[idx]);
    total += 0.5 * (-log_var[idx] + mu[idx] * mu[idx] + s2 - 1.0);
  }
  const double inv = 1.0 / static_cast<double>(batch);
  auto pm = mu.node();
  auto pv = log_var.node();
  return make_result(Shape{1}, {total * inv}, {pm, pv}, [pm, pv, n, inv](detail::TensorNode& self) {
    const double g = self.grad[0] * inv;
    if (pm->requires_grad) {
      pm->ensure_grad();
      for (std::size_t idx = 0; idx < n; ++idx) pm->grad[idx] += g * pm->data[idx];
    }
    if (pv->requires_grad) {
      pv->ensure_grad();
      for (std::size_t idx = 0; idx < n; ++idx)
        pv->grad[idx] += g * 0.5 * (std::exp(pv->data[idx]) - 1.0);
    }
  });
}

Tensor total_loss(const Tensor& recon, const Tensor& kl) { return add(recon, kl); }

Parameter::Parameter(std::string name_in, Tensor tensor_in)
    : name(std::move(name_in)), tensor(std::move(tensor_in)) {
  tensor.set_requires_grad(true);
  adam_m.assign(tensor.size(), 0.0);
  adam_v.assign(tensor.size(), 0.0);
}

void adam_step(const std::vector<Parameter*>& params, double lr, double beta1, double beta2,
               double eps) {
  for (const Parameter* p : params)
    if (!p->tensor.has_grad()) throw EmptyGradient("parameter '" + p->name + "' has no gradient");
  for (Parameter* p : params) {
    ++p->step_count;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(p->step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(p->step_count));
    const std::vector<double>& g = p->tensor.grad();
    std::vector<double>& data = p->tensor.values();
    for (std::size_t i = 0; i < data.size(); ++i) {
      p->adam_m[i] = beta1 * p->adam_m[i] + (1.0 - beta1) * g[i];
      p->adam_v[i] = beta2 * p->adam_v[i] + (1.0 - beta2) * g[i] * g[i];
      const double m_hat = p->adam_m[i] / bc1;
      const double v_hat = p->adam_v[i] / bc2;
      data[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
    p->tensor.zero_grad();
  }
}

Tensor xavier_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> uniform(-bound, bound);
  std::vector<double> values(shape_size(shape));
  for (double& v : values) v = uniform(rng);
  return Tensor(std::move(shape), std::move(values));
}

}  // namespace tbm
