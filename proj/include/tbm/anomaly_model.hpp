#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "tbm/nn.hpp"

namespace tbm {

struct VaeModelConfig {
  int seq_len = 32;          // timesteps per window
  int lstm_hidden = 64;
  int latent_dim = 16;
  int decoder_hidden = 64;
  // A long AE phase and a short variational phase: the unweighted KL term
  // erases latent information at equilibrium, so the encoder's knowledge has
  // to come from pretraining.
  int pretrain_epochs = 30;
  int train_epochs = 15;
  double lr = 1e-3;
  int batch_size = 32;
  std::uint64_t seed = 42;
  double threshold_quantile = 0.99;
};

/// Windows of min-max normalized rows, each flat [seq_len * dim] row-major.
struct WindowSet {
  std::size_t seq_len = 0;
  std::size_t dim = 0;
  std::vector<std::vector<double>> windows;

  std::size_t size() const { return windows.size(); }
};

struct LatentDistribution {
  Tensor mu;       // [latent] or [batch, latent]
  Tensor log_var;  // clamped to [-10, 10]
};

struct AnomalyVerdict {
  int window_index = 0;
  long start_timestamp = 0;
  double score = 0.0;      // per-window mean BCE reconstruction error
  double threshold = 0.0;
  bool is_anomaly = false;
};

/// Values of the encoder parameters after autoencoder pretraining: both LSTM
/// heads plus the latent projection that seeds the VAE's mu head.
struct EncoderParams {
  std::vector<std::vector<double>> exc_lstm;  // 12 gate tensors, flat values
  std::vector<std::vector<double>> geo_lstm;
  std::vector<double> latent_w, latent_b;
};

/// Two-head LSTM encoder (excavation + geology) into a Gaussian latent,
/// with a two-layer sigmoid decoder that reconstructs the excavation head.
class AnomalyModel {
 public:
  AnomalyModel(const VaeModelConfig& config, int d_exc, int d_geo, std::uint64_t seed);

  /// Both inputs [seq_len, d] or [batch, seq_len, d]; outputs follow the
  /// batching of the inputs.
  LatentDistribution encode(const Tensor& window_exc, const Tensor& window_geo) const;

  /// [latent] -> [seq_len, d_exc] or [batch, latent] -> [batch, seq_len, d_exc],
  /// all outputs strictly inside (0, 1).
  Tensor decode(const Tensor& z) const;

  void apply_pretrained(const EncoderParams& encoder);
  EncoderParams export_encoder() const;

  std::vector<Parameter*> parameters();
  std::vector<Parameter*> encoder_and_decoder_params_for_ae();  // excludes the log_var head
  const std::vector<Parameter>& named_parameters() const { return params_; }
  void load_parameter(const std::string& name, const Shape& shape,
                      const std::vector<double>& data);

  const VaeModelConfig& config() const { return config_; }
  int d_exc() const { return d_exc_; }
  int d_geo() const { return d_geo_; }

 private:
  Parameter& add_param(const std::string& name, Tensor tensor);
  LstmWeights make_lstm(const std::string& prefix, std::size_t d_in, std::size_t hidden,
                        std::mt19937_64& rng);
  Tensor run_head(const LstmWeights& weights, const Tensor& window, std::size_t d_in) const;

  VaeModelConfig config_;
  int d_exc_ = 0, d_geo_ = 0;
  LstmWeights exc_lstm_, geo_lstm_;
  Tensor mu_w_, mu_b_, logvar_w_, logvar_b_;
  Tensor dec1_w_, dec1_b_, dec2_w_, dec2_b_;
  std::vector<Parameter> params_;
};

/// z = mu + exp(0.5 log_var) * eps with eps ~ N(0, 1); gradients flow through
/// mu and log_var only.
Tensor reparameterize(const LatentDistribution& dist, std::mt19937_64& rng);

struct VaeTrainingReport {
  std::vector<double> total;
  std::vector<double> recon;
  std::vector<double> kl;
};

/// Trains a plain autoencoder (deterministic latent, reconstruction BCE only)
/// on normal windows and returns the encoder parameters for VAE
/// initialization.
EncoderParams pretrain_lstm_ae(const VaeModelConfig& config, const WindowSet& exc,
                               const WindowSet& geo, VaeTrainingReport* report = nullptr);

/// Adam on BCE + KL over normal windows.
VaeTrainingReport train_vae(AnomalyModel& model, const WindowSet& exc, const WindowSet& geo);

/// Deterministic per-window mean BCE between decode(mu) and the excavation
/// input; no sampling at inference.
std::vector<double> score_windows(const AnomalyModel& model, const WindowSet& exc,
                                  const WindowSet& geo);

/// Nearest-rank quantile: sorted ascending, element at ceil(q*n) - 1.
double calibrate_threshold(const std::vector<double>& scores_on_normal_validation, double q);

std::vector<AnomalyVerdict> detect(const AnomalyModel& model, double threshold,
                                   const WindowSet& exc, const WindowSet& geo);

}  // namespace tbm
