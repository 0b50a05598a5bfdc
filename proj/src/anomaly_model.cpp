#include "tbm/anomaly_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tbm/errors.hpp"

namespace tbm {

namespace {

constexpr double kLogVarClamp = 10.0;

void check_unit_range(const WindowSet& windows, const char* what) {
  for (const auto& w : windows.windows)
    for (double v : w)
      if (!(v >= 0.0 && v <= 1.0))
        throw RangeViolation(std::string(what) + ": window values must lie in [0,1]");
}

Tensor windowset_to_tensor(const WindowSet& ws, const std::vector<std::size_t>& indices) {
  const std::size_t per = ws.seq_len * ws.dim;
  std::vector<double> flat(indices.size() * per);
  for (std::size_t i = 0; i < indices.size(); ++i)
    std::copy(ws.windows[indices[i]].begin(), ws.windows[indices[i]].end(),
              flat.begin() + static_cast<std::ptrdiff_t>(i * per));
  return Tensor(Shape{indices.size(), ws.seq_len, ws.dim}, std::move(flat));
}

double window_bce(const std::vector<double>& x_hat, const double* x, std::size_t n) {
  constexpr double kClamp = 1e-7;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(x_hat[i], kClamp, 1.0 - kClamp);
    total -= x[i] * std::log(p) + (1.0 - x[i]) * std::log(1.0 - p);
  }
  return total / static_cast<double>(n);
}

}  // namespace

Parameter& AnomalyModel::add_param(const std::string& name, Tensor tensor) {
  params_.emplace_back(name, std::move(tensor));
  return params_.back();
}

LstmWeights AnomalyModel::make_lstm(const std::string& prefix, std::size_t d_in,
                                    std::size_t hidden, std::mt19937_64& rng) {
  auto input_mat = [&](const char* gate) {
    return add_param(prefix + ".w_" + gate, xavier_uniform(Shape{d_in, hidden}, d_in, hidden, rng))
        .tensor;
  };
  auto recur_mat = [&](const char* gate) {
    return add_param(prefix + ".u_" + gate,
                     xavier_uniform(Shape{hidden, hidden}, hidden, hidden, rng))
        .tensor;
  };
  auto bias_vec = [&](const char* gate) {
    return add_param(prefix + ".b_" + gate, Tensor(Shape{hidden})).tensor;
  };
  LstmWeights w;
  w.w_i = input_mat("i"); w.u_i = recur_mat("i"); w.b_i = bias_vec("i");
  w.w_f = input_mat("f"); w.u_f = recur_mat("f"); w.b_f = bias_vec("f");
  w.w_g = input_mat("g"); w.u_g = recur_mat("g"); w.b_g = bias_vec("g");
  w.w_o = input_mat("o"); w.u_o = recur_mat("o"); w.b_o = bias_vec("o");
  return w;
}

AnomalyModel::AnomalyModel(const VaeModelConfig& config, int d_exc, int d_geo, std::uint64_t seed)
    : config_(config), d_exc_(d_exc), d_geo_(d_geo) {
  if (d_exc < 1 || d_geo < 1) throw ConfigInvalid("head dimensions must be at least 1");
  if (config.seq_len < 1) throw ConfigInvalid("seq_len must be at least 1");
  if (config.lstm_hidden < 1 || config.decoder_hidden < 1)
    throw ConfigInvalid("hidden widths must be at least 1");
  if (config.latent_dim < 1 || config.latent_dim > config.lstm_hidden)
    throw ConfigInvalid("latent_dim must be in [1, lstm_hidden]");
  if (config.threshold_quantile <= 0.0 || config.threshold_quantile >= 1.0)
    throw ConfigInvalid("threshold_quantile outside (0, 1)");
  if (config.lr <= 0.0 || config.batch_size < 1 || config.pretrain_epochs < 0 ||
      config.train_epochs < 1)
    throw ConfigInvalid("invalid training settings");

  std::mt19937_64 rng(seed);
  const std::size_t hidden = static_cast<std::size_t>(config.lstm_hidden);
  const std::size_t latent = static_cast<std::size_t>(config.latent_dim);
  const std::size_t fused = 2 * hidden;
  const std::size_t dec_hidden = static_cast<std::size_t>(config.decoder_hidden);
  const std::size_t out = static_cast<std::size_t>(config.seq_len) *
                          static_cast<std::size_t>(d_exc);

  exc_lstm_ = make_lstm("enc_exc", static_cast<std::size_t>(d_exc), hidden, rng);
  geo_lstm_ = make_lstm("enc_geo", static_cast<std::size_t>(d_geo), hidden, rng);
  mu_w_ = add_param("enc.mu.weight", xavier_uniform(Shape{fused, latent}, fused, latent, rng))
              .tensor;
  mu_b_ = add_param("enc.mu.bias", Tensor(Shape{latent})).tensor;
  logvar_w_ =
      add_param("enc.logvar.weight", xavier_uniform(Shape{fused, latent}, fused, latent, rng))
          .tensor;
  logvar_b_ = add_param("enc.logvar.bias", Tensor(Shape{latent})).tensor;
  dec1_w_ = add_param("dec.fc1.weight",
                      xavier_uniform(Shape{latent, dec_hidden}, latent, dec_hidden, rng))
                .tensor;
  dec1_b_ = add_param("dec.fc1.bias", Tensor(Shape{dec_hidden})).tensor;
  dec2_w_ =
      add_param("dec.fc2.weight", xavier_uniform(Shape{dec_hidden, out}, dec_hidden, out, rng))
          .tensor;
  dec2_b_ = add_param("dec.fc2.bias", Tensor(Shape{out})).tensor;
}

Tensor AnomalyModel::run_head(const LstmWeights& weights, const Tensor& window,
                              std::size_t d_in) const {
  const std::size_t seq = static_cast<std::size_t>(config_.seq_len);
  const bool batched = window.rank() == 3;
  if (!batched && window.rank() != 2)
    throw ShapeMismatch("encode: window must be [seq_len, d] or [batch, seq_len, d]");
  const std::size_t batch = batched ? window.shape()[0] : 1;
  if (window.shape()[batched ? 1 : 0] != seq)
    throw ShapeMismatch("encode: window seq_len differs from config");
  if (window.shape()[batched ? 2 : 1] != d_in)
    throw ShapeMismatch("encode: window feature width differs from model head");

  const std::size_t hidden = static_cast<std::size_t>(config_.lstm_hidden);
  LstmState state = lstm_zero_state(batch, hidden);
  const std::vector<double>& src = window.values();
  for (std::size_t t = 0; t < seq; ++t) {
    // Step inputs are data, not differentiation targets: plain copies.
    std::vector<double> step(batch * d_in);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < d_in; ++j)
        step[b * d_in + j] = src[(b * seq + t) * d_in + j];
    state = lstm_step(Tensor(Shape{batch, d_in}, std::move(step)), state, weights);
  }
  return state.hidden;  // [batch, hidden]
}

LatentDistribution AnomalyModel::encode(const Tensor& window_exc, const Tensor& window_geo) const {
  const bool batched = window_exc.rank() == 3;
  if (window_geo.rank() != window_exc.rank())
    throw ShapeMismatch("encode: head windows must share batching");
  Tensor h_exc = run_head(exc_lstm_, window_exc, static_cast<std::size_t>(d_exc_));
  Tensor h_geo = run_head(geo_lstm_, window_geo, static_cast<std::size_t>(d_geo_));
  Tensor fused = concat_lastdim(h_exc, h_geo);  // [batch, 2*hidden]
  Tensor mu = linear(fused, mu_w_, mu_b_);
  Tensor log_var = clamp(linear(fused, logvar_w_, logvar_b_), -kLogVarClamp, kLogVarClamp);
  if (!batched) {
    const std::size_t latent = static_cast<std::size_t>(config_.latent_dim);
    mu = reshape(mu, Shape{latent});
    log_var = reshape(log_var, Shape{latent});
  }
  return {mu, log_var};
}

Tensor AnomalyModel::decode(const Tensor& z) const {
  const bool batched = z.rank() == 2;
  const std::size_t latent = static_cast<std::size_t>(config_.latent_dim);
  Tensor zz = batched ? z : reshape(z, Shape{1, latent});
  if (zz.shape()[1] != latent) throw ShapeMismatch("decode: latent width differs from config");
  const std::size_t batch = zz.shape()[0];
  Tensor h = relu(linear(zz, dec1_w_, dec1_b_));
  Tensor flat = sigmoid(linear(h, dec2_w_, dec2_b_));  // [batch, seq_len * d_exc]
  const std::size_t seq = static_cast<std::size_t>(config_.seq_len);
  const std::size_t de = static_cast<std::size_t>(d_exc_);
  return batched ? reshape(flat, Shape{batch, seq, de}) : reshape(flat, Shape{seq, de});
}

std::vector<Parameter*> AnomalyModel::parameters() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (Parameter& p : params_) out.push_back(&p);
  return out;
}

std::vector<Parameter*> AnomalyModel::encoder_and_decoder_params_for_ae() {
  std::vector<Parameter*> out;
  for (Parameter& p : params_)
    if (p.name.rfind("enc.logvar.", 0) != 0) out.push_back(&p);
  return out;
}

void AnomalyModel::load_parameter(const std::string& name, const Shape& shape,
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

std::vector<std::vector<double>> lstm_values(const LstmWeights& w) {
  return {w.w_i.values(), w.u_i.values(), w.b_i.values(), w.w_f.values(),
          w.u_f.values(), w.b_f.values(), w.w_g.values(), w.u_g.values(),
          w.b_g.values(), w.w_o.values(), w.u_o.values(), w.b_o.values()};
}

void load_lstm_values(LstmWeights& w, const std::vector<std::vector<double>>& values) {
  Tensor* slots[] = {&w.w_i, &w.u_i, &w.b_i, &w.w_f, &w.u_f, &w.b_f,
                     &w.w_g, &w.u_g, &w.b_g, &w.w_o, &w.u_o, &w.b_o};
  if (values.size() != std::size(slots))
    throw DimMismatch("pretrained encoder: expected 12 gate tensors per head");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (slots[i]->size() != values[i].size())
      throw DimMismatch("pretrained encoder: gate tensor size mismatch");
    slots[i]->values() = values[i];
  }
}

}  // namespace

EncoderParams AnomalyModel::export_encoder() const {
  EncoderParams enc;
  enc.exc_lstm = lstm_values(exc_lstm_);
  enc.geo_lstm = lstm_values(geo_lstm_);
  enc.latent_w = mu_w_.values();
  enc.latent_b = mu_b_.values();
  return enc;
}

void AnomalyModel::apply_pretrained(const EncoderParams& encoder) {
  load_lstm_values(exc_lstm_, encoder.exc_lstm);
  load_lstm_values(geo_lstm_, encoder.geo_lstm);
  if (encoder.latent_w.size() != mu_w_.size() || encoder.latent_b.size() != mu_b_.size())
    throw DimMismatch("pretrained encoder: latent projection size mismatch");
  mu_w_.values() = encoder.latent_w;
  mu_b_.values() = encoder.latent_b;
}

Tensor reparameterize(const LatentDistribution& dist, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> eps(dist.mu.size());
  for (double& e : eps) e = normal(rng);
  Tensor epsilon(dist.mu.shape(), std::move(eps));
  return add(dist.mu, mul(exp(scale(dist.log_var, 0.5)), epsilon));
}

namespace {

void check_window_pair(const WindowSet& exc, const WindowSet& geo, const VaeModelConfig& cfg) {
  if (exc.size() == 0 || geo.size() == 0) throw EmptyDataset("anomaly windows");
  if (exc.size() != geo.size())
    throw ShapeMismatch("excavation and geology window counts differ");
  if (exc.seq_len != static_cast<std::size_t>(cfg.seq_len) ||
      geo.seq_len != static_cast<std::size_t>(cfg.seq_len))
    throw ShapeMismatch("window seq_len differs from config");
}

}  // namespace

EncoderParams pretrain_lstm_ae(const VaeModelConfig& config, const WindowSet& exc,
                               const WindowSet& geo, VaeTrainingReport* report) {
  check_window_pair(exc, geo, config);
  check_unit_range(exc, "pretrain_lstm_ae");
  check_unit_range(geo, "pretrain_lstm_ae");

  AnomalyModel ae(config, static_cast<int>(exc.dim), static_cast<int>(geo.dim), config.seed);
  auto params = ae.encoder_and_decoder_params_for_ae();
  std::mt19937_64 rng(config.seed + 0x517cc1b727220a95ull);

  std::vector<std::size_t> order(exc.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.pretrain_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t done = 0;
    while (done < order.size()) {
      const std::size_t take = std::min(batch, order.size() - done);
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(done),
                                         order.begin() + static_cast<std::ptrdiff_t>(done + take));
      Tensor x_exc = windowset_to_tensor(exc, idx);
      Tensor x_geo = windowset_to_tensor(geo, idx);
      // Deterministic latent: the mu head doubles as the AE bottleneck.
      LatentDistribution latent = ae.encode(x_exc, x_geo);
      Tensor loss = bce_loss(ae.decode(latent.mu), x_exc);
      epoch_loss += loss.item() * static_cast<double>(take);
      loss.backward();
      adam_step(params, config.lr);
      done += take;
    }
    if (report) {
      report->recon.push_back(epoch_loss / static_cast<double>(exc.size()));
      report->kl.push_back(0.0);
      report->total.push_back(report->recon.back());
    }
  }
  return ae.export_encoder();
}

VaeTrainingReport train_vae(AnomalyModel& model, const WindowSet& exc, const WindowSet& geo) {
  const VaeModelConfig& config = model.config();
  check_window_pair(exc, geo, config);
  check_unit_range(exc, "train_vae");
  check_unit_range(geo, "train_vae");

  auto params = model.parameters();
  std::mt19937_64 rng(config.seed + 0x2545f4914f6cdd1dull);

  VaeTrainingReport report;
  std::vector<std::size_t> order(exc.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.train_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0.0, epoch_recon = 0.0, epoch_kl = 0.0;
    std::size_t done = 0;
    while (done < order.size()) {
      const std::size_t take = std::min(batch, order.size() - done);
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(done),
                                         order.begin() + static_cast<std::ptrdiff_t>(done + take));
      Tensor x_exc = windowset_to_tensor(exc, idx);
      Tensor x_geo = windowset_to_tensor(geo, idx);
      LatentDistribution latent = model.encode(x_exc, x_geo);
      Tensor z = reparameterize(latent, rng);
      Tensor recon = bce_loss(model.decode(z), x_exc);
      Tensor kl = kl_loss(latent.mu, latent.log_var);
      Tensor loss = total_loss(recon, kl);
      epoch_total += loss.item() * static_cast<double>(take);
      epoch_recon += recon.item() * static_cast<double>(take);
      epoch_kl += kl.item() * static_cast<double>(take);
      loss.backward();
      adam_step(params, config.lr);
      done += take;
    }
    const double n = static_cast<double>(exc.size());
    report.total.push_back(epoch_total / n);
    report.recon.push_back(epoch_recon / n);
    report.kl.push_back(epoch_kl / n);
  }
  return report;
}

std::vector<double> score_windows(const AnomalyModel& model, const WindowSet& exc,
                                  const WindowSet& geo) {
  check_window_pair(exc, geo, model.config());
  std::vector<double> scores;
  scores.reserve(exc.size());
  const std::size_t per = exc.seq_len * exc.dim;
  const std::size_t batch = 128;
  std::size_t done = 0;
  while (done < exc.size()) {
    const std::size_t take = std::min(batch, exc.size() - done);
    std::vector<std::size_t> idx(take);
    std::iota(idx.begin(), idx.end(), done);
    Tensor x_exc = windowset_to_tensor(exc, idx);
    Tensor x_geo = windowset_to_tensor(geo, idx);
    LatentDistribution latent = model.encode(x_exc, x_geo);
    Tensor recon = model.decode(latent.mu);  // deterministic: no sampling
    for (std::size_t i = 0; i < take; ++i) {
      std::vector<double> slice(recon.values().begin() + static_cast<std::ptrdiff_t>(i * per),
                                recon.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * per));
      scores.push_back(window_bce(slice, exc.windows[done + i].data(), per));
    }
    done += take;
  }
  return scores;
}

double calibrate_threshold(const std::vector<double>& scores, double q) {
  if (scores.empty()) throw EmptyScores();
  if (q <= 0.0 || q >= 1.0) throw Error("calibrate_threshold: quantile outside (0, 1)");
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  const double rank = std::ceil(q * static_cast<double>(sorted.size()));
  const std::size_t index = static_cast<std::size_t>(std::max(1.0, rank)) - 1;
  return sorted[std::min(index, sorted.size() - 1)];
}

std::vector<AnomalyVerdict> detect(const AnomalyModel& model, double threshold,
                                   const WindowSet& exc, const WindowSet& geo) {
  const std::vector<double> scores = score_windows(model, exc, geo);
  std::vector<AnomalyVerdict> verdicts;
  verdicts.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    AnomalyVerdict v;
    v.window_index = static_cast<int>(i);
    v.score = scores[i];
    v.threshold = threshold;
    v.is_anomaly = scores[i] > threshold;
    verdicts.push_back(v);
  }
  return verdicts;
}

}  // namespace tbm
