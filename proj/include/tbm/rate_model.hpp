#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tbm/nn.hpp"
#include "tbm/preprocess.hpp"

namespace tbm {

struct RateModelConfig {
  int window_len = 16;                   // timesteps per input window
  std::vector<int> channels = {32, 32, 32};  // conv widths per block
  int kernel = 3;
  int attention_reduction = 8;           // bottleneck width r
  double dropout_p = 0.1;
  bool use_attention = true;
  bool use_residual = true;
  bool use_geology = true;
  double lr = 1e-3;
  int epochs = 50;
  int batch_size = 32;
  std::uint64_t seed = 42;
};

/// Sliding-window view of a fused sample sequence: window i holds the
/// trailing `window_len` timesteps of features (laid out [feature][time]) and
/// the target at the window's last timestep.
struct WindowDataset {
  std::size_t feature_dim = 0;
  std::size_t window_len = 0;
  std::vector<std::vector<double>> inputs;  // each [feature_dim * window_len]
  std::vector<double> targets;

  std::size_t size() const { return inputs.size(); }
};

WindowDataset make_rate_windows(const std::vector<FusedSample>& samples, int window_len);

struct TrainingReport {
  std::vector<double> train_loss;
  std::vector<double> valid_loss;
  int best_epoch = 0;
};

/// CNN with per-block channel attention and residual connections, mean-pooled
/// over time into a dropout + linear head producing one value per window.
class RateModel {
 public:
  RateModel(const RateModelConfig& config, int input_dim, std::uint64_t seed);

  /// [batch, features, window_len] -> [batch]. Training mode applies dropout
  /// from `rng`; inference is deterministic.
  Tensor forward(const Tensor& windows, bool training = false, std::mt19937_64* rng = nullptr);

  /// Deterministic forward pass on frozen parameters.
  std::vector<double> predict(const Tensor& windows);

  std::vector<Parameter*> parameters();
  const std::vector<Parameter>& named_parameters() const { return params_; }
  void load_parameter(const std::string& name, const Shape& shape,
                      const std::vector<double>& data);

  const RateModelConfig& config() const { return config_; }
  int input_dim() const { return input_dim_; }

 private:
  struct Block {
    Tensor conv_w, conv_b;
    Tensor attn_w1, attn_w2;
    Tensor proj_w, proj_b;
    bool has_attention = false;
    bool has_projection = false;
  };

  Parameter& add_param(const std::string& name, Tensor tensor);

  RateModelConfig config_;
  int input_dim_ = 0;
  std::vector<Block> blocks_;
  Tensor head_w_, head_b_;
  std::vector<Parameter> params_;
};

Tensor windows_to_tensor(const WindowDataset& data, const std::vector<std::size_t>& indices);

TrainingReport train_rate_model(RateModel& model, const WindowDataset& train,
                                const WindowDataset& valid);

/// Predictions over a whole dataset, batched.
std::vector<double> predict_rate(RateModel& model, const WindowDataset& data);

// --- ablation ------------------------------------------------------------------

struct AblationCell {
  bool geology = true;
  std::string modules;  // "attention+residual" | "attention" | "residual" | "cnn"
  double r2 = 0.0;
  double mse = 0.0;
  int best_epoch = 0;
};

struct AblationReport {
  std::vector<AblationCell> cells;
};

/// Trains the 2x4 grid (geology on/off x module subsets) with identical seeds
/// and reports test R^2 / MSE per cell. `feature_groups` tags each feature
/// column; geology-off cells keep only the "excavation" columns.
AblationReport run_ablation(const RateModelConfig& base_config,
                            const std::vector<FusedSample>& samples,
                            const std::vector<std::string>& feature_groups);

}  // namespace tbm
