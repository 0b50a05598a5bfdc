#include "tbm/rate_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tbm/errors.hpp"
#include "tbm/metrics.hpp"

namespace tbm {

WindowDataset make_rate_windows(const std::vector<FusedSample>& samples, int window_len) {
  if (window_len < 1) throw ConfigInvalid("window_len must be positive");
  WindowDataset data;
  data.window_len = static_cast<std::size_t>(window_len);
  if (samples.empty()) return data;
  data.feature_dim = samples.front().features.size();
  const std::size_t w = data.window_len;
  if (samples.size() < w) return data;
  for (std::size_t end = w - 1; end < samples.size(); ++end) {
    std::vector<double> input(data.feature_dim * w);
    for (std::size_t f = 0; f < data.feature_dim; ++f)
      for (std::size_t t = 0; t < w; ++t)
        input[f * w + t] = samples[end - (w - 1) + t].features[f];
    data.inputs.push_back(std::move(input));
    data.targets.push_back(samples[end].target);
  }
  return data;
}

Tensor windows_to_tensor(const WindowDataset& data, const std::vector<std::size_t>& indices) {
  const std::size_t per = data.feature_dim * data.window_len;
  std::vector<double> flat(indices.size() * per);
  for (std::size_t i = 0; i < indices.size(); ++i)
    std::copy(data.inputs[indices[i]].begin(), data.inputs[indices[i]].end(),
              flat.begin() + static_cast<std::ptrdiff_t>(i * per));
  return Tensor(Shape{indices.size(), data.feature_dim, data.window_len}, std::move(flat));
}

Parameter& RateModel::add_param(const std::string& name, Tensor tensor) {
  params_.emplace_back(name, std::move(tensor));
  return params_.back();
}

RateModel::RateModel(const RateModelConfig& config, int input_dim, std::uint64_t seed)
    : config_(config), input_dim_(input_dim) {
  if (input_dim < 1) throw ConfigInvalid("input_dim must be at least 1");
  if (config.kernel < 1) throw ConfigInvalid("kernel must be at least 1");
  if (config.window_len <= config.kernel)
    throw ConfigInvalid("window_len must exceed kernel size");
  if (config.channels.empty()) throw ConfigInvalid("at least one conv block required");
  for (int c : config.channels)
    if (c < 1) throw ConfigInvalid("channel widths must be at least 1");
  if (config.attention_reduction < 1) throw ConfigInvalid("attention_reduction must be >= 1");
  if (config.dropout_p < 0.0 || config.dropout_p >= 1.0)
    throw ConfigInvalid("dropout_p outside [0, 1)");
  if (config.lr <= 0.0 || config.epochs < 1 || config.batch_size < 1)
    throw ConfigInvalid("lr, epochs and batch_size must be positive");
  // Valid convs shrink the time axis by kernel-1 per block.
  const int shrink = (config.kernel - 1) * static_cast<int>(config.channels.size());
  if (config.window_len - shrink < 1)
    throw ConfigInvalid("window_len too short for the conv stack");

  std::mt19937_64 rng(seed);
  const std::size_t k = static_cast<std::size_t>(config.kernel);
  std::size_t in_ch = static_cast<std::size_t>(input_dim);
  for (std::size_t b = 0; b < config.channels.size(); ++b) {
    const std::size_t out_ch = static_cast<std::size_t>(config.channels[b]);
    const std::string prefix = "block" + std::to_string(b) + ".";
    Block block;
    block.conv_w = add_param(prefix + "conv.weight",
                             xavier_uniform(Shape{out_ch, in_ch, k}, in_ch * k, out_ch * k, rng))
                       .tensor;
    block.conv_b = add_param(prefix + "conv.bias", Tensor(Shape{out_ch})).tensor;
    if (config.use_attention) {
      const std::size_t r = static_cast<std::size_t>(config.attention_reduction);
      block.has_attention = true;
      block.attn_w1 =
          add_param(prefix + "attn.w1", xavier_uniform(Shape{out_ch, r}, out_ch, r, rng)).tensor;
      block.attn_w2 =
          add_param(prefix + "attn.w2", xavier_uniform(Shape{r, out_ch}, r, out_ch, rng)).tensor;
    }
    if (config.use_residual && in_ch != out_ch) {
      block.has_projection = true;
      block.proj_w = add_param(prefix + "proj.weight",
                               xavier_uniform(Shape{out_ch, in_ch, 1}, in_ch, out_ch, rng))
                         .tensor;
      block.proj_b = add_param(prefix + "proj.bias", Tensor(Shape{out_ch})).tensor;
    }
    blocks_.push_back(std::move(block));
    in_ch = out_ch;
  }
  head_w_ = add_param("head.weight", xavier_uniform(Shape{in_ch, 1}, in_ch, 1, rng)).tensor;
  head_b_ = add_param("head.bias", Tensor(Shape{1})).tensor;
}

Tensor RateModel::forward(const Tensor& windows, bool training, std::mt19937_64* rng) {
  if (windows.rank() != 3) throw DimMismatch("forward: expected [batch, features, window_len]");
  if (windows.shape()[1] != static_cast<std::size_t>(input_dim_))
    throw DimMismatch("forward: feature count " + std::to_string(windows.shape()[1]) +
                      " does not match model input_dim " + std::to_string(input_dim_));
  if (windows.shape()[2] != static_cast<std::size_t>(config_.window_len))
    throw DimMismatch("forward: window length mismatch");
  const std::size_t batch = windows.shape()[0];

  Tensor h = windows;
  for (Block& block : blocks_) {
    Tensor block_in = h;
    h = relu(conv1d(h, block.conv_w, block.conv_b));
    if (block.has_attention) h = channel_attention(h, block.attn_w1, block.attn_w2);
    if (config_.use_residual) {
      // Valid conv shortens the time axis; align on the trailing timesteps.
      Tensor shortcut = crop_tail(block_in, h.shape()[2]);
      if (block.has_projection) shortcut = conv1d(shortcut, block.proj_w, block.proj_b);
      h = add(h, shortcut);
    }
  }
  h = mean_lastdim(h);  // [batch, channels]
  if (training && config_.dropout_p > 0.0) {
    if (rng == nullptr) throw ConfigInvalid("training forward requires an rng for dropout");
    h = dropout(h, config_.dropout_p, true, *rng);
  }
  h = linear(h, head_w_, head_b_);  // [batch, 1]
  return reshape(h, Shape{batch});
}

std::vector<double> RateModel::predict(const Tensor& windows) {
  return forward(windows, false, nullptr).values();
}

std::vector<Parameter*> RateModel::parameters() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (Parameter& p : params_) out.push_back(&p);
  return out;
}

void RateModel::load_parameter(const std::string& name, const Shape& shape,
                               const std::vector<double>& data) {
  for (Parameter& p : params_) {
    if (p.name != name) continue;
    if (p.tensor.shape() != shape)
      throw DimMismatch("checkpoint parameter '" + name + "' has unexpected shape");
    p.tensor.values() = data;
    return;
  }
  throw DimMismatch("checkpoint parameter '" + name + "' not found in model");
}

namespace {

double dataset_loss(RateModel& model, const WindowDataset& data, std::size_t batch_size) {
  double total = 0.0;
  std::size_t done = 0;
  while (done < data.size()) {
    const std::size_t take = std::min(batch_size, data.size() - done);
    std::vector<std::size_t> idx(take);
    std::iota(idx.begin(), idx.end(), done);
    Tensor x = windows_to_tensor(data, idx);
    std::vector<double> y(take);
    for (std::size_t i = 0; i < take; ++i) y[i] = data.targets[done + i];
    Tensor pred = model.forward(x, false, nullptr);
    total += smooth_l1_loss(pred, Tensor::vector(std::move(y))).item() * static_cast<double>(take);
    done += take;
  }
  return total / static_cast<double>(data.size());
}

}  // namespace

TrainingReport train_rate_model(RateModel& model, const WindowDataset& train,
                                const WindowDataset& valid) {
  if (train.size() == 0 || valid.size() == 0) throw EmptyDataset("train_rate_model");
  if (train.feature_dim != static_cast<std::size_t>(model.input_dim()) ||
      valid.feature_dim != static_cast<std::size_t>(model.input_dim()))
    throw DimMismatch("train_rate_model: dataset feature dim differs from model input_dim");

  const RateModelConfig& cfg = model.config();
  std::mt19937_64 rng(cfg.seed + 0x9e3779b97f4a7c15ull);
  auto params = model.parameters();

  constexpr int kPatience = 10;
  TrainingReport report;
  double best_valid = std::numeric_limits<double>::infinity();
  int stale = 0;
  std::vector<std::vector<double>> best_params;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t done = 0;
    while (done < order.size()) {
      const std::size_t take = std::min(batch, order.size() - done);
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(done),
                                   order.begin() + static_cast<std::ptrdiff_t>(done + take));
      Tensor x = windows_to_tensor(train, idx);
      std::vector<double> y(take);
      for (std::size_t i = 0; i < take; ++i) y[i] = train.targets[idx[i]];
      Tensor loss = smooth_l1_loss(model.forward(x, true, &rng), Tensor::vector(std::move(y)));
      epoch_loss += loss.item() * static_cast<double>(take);
      loss.backward();
      adam_step(params, cfg.lr);
      done += take;
    }
    report.train_loss.push_back(epoch_loss / static_cast<double>(train.size()));
    const double valid_loss = dataset_loss(model, valid, batch);
    report.valid_loss.push_back(valid_loss);

    if (valid_loss < best_valid) {
      best_valid = valid_loss;
      report.best_epoch = epoch;
      stale = 0;
      best_params.clear();
      for (const Parameter* p : params) best_params.push_back(p->tensor.values());
    } else if (++stale >= kPatience) {
      break;
    }
  }
  if (!best_params.empty())
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->tensor.values() = best_params[i];
  return report;
}

std::vector<double> predict_rate(RateModel& model, const WindowDataset& data) {
  std::vector<double> out;
  out.reserve(data.size());
  std::size_t done = 0;
  const std::size_t batch = 256;
  while (done < data.size()) {
    const std::size_t take = std::min(batch, data.size() - done);
    std::vector<std::size_t> idx(take);
    std::iota(idx.begin(), idx.end(), done);
    const std::vector<double> pred = model.predict(windows_to_tensor(data, idx));
    out.insert(out.end(), pred.begin(), pred.end());
    done += take;
  }
  return out;
}

namespace {

std::vector<FusedSample> mask_to_excavation(const std::vector<FusedSample>& samples,
                                            const std::vector<std::string>& groups) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < groups.size(); ++i)
    if (groups[i] == "excavation") keep.push_back(i);
  std::vector<FusedSample> out;
  out.reserve(samples.size());
  for (const FusedSample& s : samples) {
    FusedSample reduced;
    reduced.ring = s.ring;
    reduced.target = s.target;
    reduced.features.reserve(keep.size());
    for (std::size_t i : keep) reduced.features.push_back(s.features[i]);
    out.push_back(std::move(reduced));
  }
  return out;
}

}  // namespace

AblationReport run_ablation(const RateModelConfig& base_config,
                            const std::vector<FusedSample>& samples,
                            const std::vector<std::string>& feature_groups) {
  if (!samples.empty() && feature_groups.size() != samples.front().features.size())
    throw DimMismatch("run_ablation: group tags do not match feature count");

  const std::vector<FusedSample> excavation_only = mask_to_excavation(samples, feature_groups);
  struct ModuleChoice {
    bool attention, residual;
    const char* name;
  };
  const ModuleChoice choices[] = {{true, true, "attention+residual"},
                                  {true, false, "attention"},
                                  {false, true, "residual"},
                                  {false, false, "cnn"}};

  AblationReport report;
  for (bool geology : {true, false}) {
    const std::vector<FusedSample>& data = geology ? samples : excavation_only;
    const DatasetSplit split = split_dataset(data, base_config.seed);
    const WindowDataset train = make_rate_windows(split.train, base_config.window_len);
    const WindowDataset valid = make_rate_windows(split.valid, base_config.window_len);
    const WindowDataset test = make_rate_windows(split.test, base_config.window_len);
    for (const ModuleChoice& choice : choices) {
      RateModelConfig cfg = base_config;
      cfg.use_geology = geology;
      cfg.use_attention = choice.attention;
      cfg.use_residual = choice.residual;
      RateModel model(cfg, static_cast<int>(train.feature_dim), cfg.seed);
      const TrainingReport training = train_rate_model(model, train, valid);
      const std::vector<double> y_hat = predict_rate(model, test);
      AblationCell cell;
      cell.geology = geology;
      cell.modules = choice.name;
      cell.r2 = r_squared(test.targets, y_hat);
      cell.mse = mse(test.targets, y_hat);
      cell.best_epoch = training.best_epoch;
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

}  // namespace tbm
