#pragma once

#include <random>
#include <string>
#include <vector>

#include "tbm/tensor.hpp"

namespace tbm {

/// [batch, d_in] x [d_in, d_out] + bias[d_out] -> [batch, d_out]
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

/// Valid (no padding), stride-1 1-D convolution.
/// [batch, c_in, len] * [c_out, c_in, k] + bias[c_out] -> [batch, c_out, len-k+1]
Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias);

/// Inverted dropout: zeroes elements with probability p and scales survivors
/// by 1/(1-p) while training; identity at inference.
Tensor dropout(const Tensor& input, double p, bool training, std::mt19937_64& rng);

/// Rescale each channel of [batch, c, len] by scores[batch, c].
Tensor scale_channels(const Tensor& input, const Tensor& scores);

/// Squeeze-excitation style channel attention: mean-pool over time, two-layer
/// bottleneck (w1: [c, r], ReLU, w2: [r, c]), softmax over channels, then
/// rescale channels by score * c so uniform scores are an identity.
Tensor channel_attention(const Tensor& input, const Tensor& w1, const Tensor& w2);

// --- LSTM -------------------------------------------------------------------

struct LstmState {
  Tensor hidden;
  Tensor cell;
};

/// Per-gate weights. w_*: [d_in, hidden], u_*: [hidden, hidden], b_*: [hidden].
struct LstmWeights {
  Tensor w_i, u_i, b_i;
  Tensor w_f, u_f, b_f;
  Tensor w_g, u_g, b_g;
  Tensor w_o, u_o, b_o;
};

/// One LSTM cell update. Accepts a single step ([d_in] with state [hidden])
/// or a batch ([batch, d_in] with state [batch, hidden]).
LstmState lstm_step(const Tensor& input, const LstmState& state, const LstmWeights& weights);

LstmState lstm_zero_state(std::size_t hidden_dim);
LstmState lstm_zero_state(std::size_t batch, std::size_t hidden_dim);

// --- losses -----------------------------------------------------------------

/// Mean over elements of 0.5 x^2 for |x| < 1 and |x| - 0.5 otherwise,
/// x = pred - target.
Tensor smooth_l1_loss(const Tensor& pred, const Tensor& target);

/// Mean over elements of -w [x log x' + (1-x) log(1-x')] with predictions
/// clamped to [1e-7, 1-1e-7]. `feature_weights` applies along the last
/// dimension; the overload without it uses weight 1 everywhere. Targets must
/// lie in [0,1].
Tensor bce_loss(const Tensor& x_hat, const Tensor& x);
Tensor bce_loss(const Tensor& x_hat, const Tensor& x, const std::vector<double>& feature_weights);

/// 0.5 sum_d(-log s2 + mu^2 + s2 - 1) with s2 = exp(log_var), summed over the
/// latent dimension and averaged over the batch (rank-1 inputs are a batch of
/// one).
Tensor kl_loss(const Tensor& mu, const Tensor& log_var);

/// Unweighted sum of the reconstruction and KL terms.
Tensor total_loss(const Tensor& recon, const Tensor& kl);

// --- parameters / optimizer ---------------------------------------------------

struct Parameter {
  std::string name;
  Tensor tensor;  // requires_grad is forced on
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  long step_count = 0;

  Parameter(std::string name, Tensor tensor);
};

/// Standard Adam update with bias correction; increments step counts and
/// zeroes gradients afterwards. Throws EmptyGradient if any parameter was
/// never reached by backward().
void adam_step(const std::vector<Parameter*>& params, double lr = 1e-3, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

/// Uniform init in +-sqrt(6 / (fan_in + fan_out)).
Tensor xavier_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

}  // namespace tbm
