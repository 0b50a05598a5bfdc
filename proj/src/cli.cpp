#include "tbm/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "tbm/anomaly_model.hpp"
#include "tbm/errors.hpp"
#include "tbm/io.hpp"
#include "tbm/metrics.hpp"
#include "tbm/pipeline.hpp"
#include "tbm/rate_model.hpp"
#include "tbm/synth.hpp"

namespace tbm {

namespace {

using json = nlohmann::ordered_json;

// --- logging -----------------------------------------------------------------

int log_level() {
  static const int level = [] {
    const char* env = std::getenv("TBM_LOG");
    if (!env) return 1;
    const std::string v(env);
    if (v == "debug") return 0;
    if (v == "warn") return 2;
    return 1;
  }();
  return level;
}

void log_debug(const std::string& msg) {
  if (log_level() <= 0) std::cerr << "[tbm] " << msg << "\n";
}

void log_info(const std::string& msg) {
  if (log_level() <= 1) std::cerr << "[tbm] " << msg << "\n";
}

// --- config file handling -------------------------------------------------------

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot open config file '" + path + "'");
  try {
    json j;
    in >> j;
    if (!j.is_object()) throw ConfigInvalid("config root must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw ConfigInvalid(std::string("config parse failure: ") + e.what());
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigInvalid("config field '" + key + "' has the wrong type");
  }
}

std::string require_path(const json& j, const std::string& key) {
  const std::string value = get_or<std::string>(j, key, "");
  if (value.empty()) throw ConfigInvalid("config field '" + key + "' is required");
  return value;
}

void emit_report(const json& report, const std::string& path, bool to_stdout) {
  if (!path.empty()) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << report.dump(2) << "\n";
    if (!out) throw IoError("failed writing '" + path + "'");
  }
  if (to_stdout) std::cout << report.dump(2) << std::endl;
}

// --- model config (de)serialization ------------------------------------------------

RateModelConfig rate_config_from_json(const json& j) {
  RateModelConfig cfg;
  cfg.window_len = get_or(j, "window_len", cfg.window_len);
  cfg.channels = get_or(j, "channels", cfg.channels);
  cfg.kernel = get_or(j, "kernel", cfg.kernel);
  cfg.attention_reduction = get_or(j, "attention_reduction", cfg.attention_reduction);
  cfg.dropout_p = get_or(j, "dropout_p", cfg.dropout_p);
  cfg.use_attention = get_or(j, "use_attention", cfg.use_attention);
  cfg.use_residual = get_or(j, "use_residual", cfg.use_residual);
  cfg.use_geology = get_or(j, "use_geology", cfg.use_geology);
  cfg.lr = get_or(j, "lr", cfg.lr);
  cfg.epochs = get_or(j, "epochs", cfg.epochs);
  cfg.batch_size = get_or(j, "batch_size", cfg.batch_size);
  cfg.seed = get_or(j, "seed", cfg.seed);
  return cfg;
}

json rate_config_to_json(const RateModelConfig& cfg) {
  json j;
  j["window_len"] = cfg.window_len;
  j["channels"] = cfg.channels;
  j["kernel"] = cfg.kernel;
  j["attention_reduction"] = cfg.attention_reduction;
  j["dropout_p"] = cfg.dropout_p;
  j["use_attention"] = cfg.use_attention;
  j["use_residual"] = cfg.use_residual;
  j["use_geology"] = cfg.use_geology;
  j["lr"] = cfg.lr;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  return j;
}

VaeModelConfig vae_config_from_json(const json& j) {
  VaeModelConfig cfg;
  cfg.seq_len = get_or(j, "seq_len", cfg.seq_len);
  cfg.lstm_hidden = get_or(j, "lstm_hidden", cfg.lstm_hidden);
  cfg.latent_dim = get_or(j, "latent_dim", cfg.latent_dim);
  cfg.decoder_hidden = get_or(j, "decoder_hidden", cfg.decoder_hidden);
  cfg.pretrain_epochs = get_or(j, "pretrain_epochs", cfg.pretrain_epochs);
  cfg.train_epochs = get_or(j, "train_epochs", cfg.train_epochs);
  cfg.lr = get_or(j, "lr", cfg.lr);
  cfg.batch_size = get_or(j, "batch_size", cfg.batch_size);
  cfg.seed = get_or(j, "seed", cfg.seed);
  cfg.threshold_quantile = get_or(j, "threshold_quantile", cfg.threshold_quantile);
  return cfg;
}

json vae_config_to_json(const VaeModelConfig& cfg, int d_exc, int d_geo) {
  json j;
  j["seq_len"] = cfg.seq_len;
  j["lstm_hidden"] = cfg.lstm_hidden;
  j["latent_dim"] = cfg.latent_dim;
  j["decoder_hidden"] = cfg.decoder_hidden;
  j["pretrain_epochs"] = cfg.pretrain_epochs;
  j["train_epochs"] = cfg.train_epochs;
  j["lr"] = cfg.lr;
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  j["threshold_quantile"] = cfg.threshold_quantile;
  j["d_exc"] = d_exc;
  j["d_geo"] = d_geo;
  return j;
}

std::vector<NamedTensor> collect_params(const std::vector<Parameter>& params) {
  std::vector<NamedTensor> out;
  out.reserve(params.size());
  for (const Parameter& p : params)
    out.push_back({p.name, p.tensor.shape(), p.tensor.values()});
  return out;
}

// Geology-off models see only the excavation columns.
std::vector<FusedSample> mask_features(const std::vector<FusedSample>& samples,
                                       const Manifest& manifest, bool use_geology) {
  if (use_geology) return samples;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < manifest.columns.size(); ++i)
    if (manifest.columns[i].group == "excavation") keep.push_back(i);
  std::vector<FusedSample> out;
  out.reserve(samples.size());
  for (const FusedSample& s : samples) {
    FusedSample reduced;
    reduced.ring = s.ring;
    reduced.target = s.target;
    for (std::size_t i : keep) reduced.features.push_back(s.features[i]);
    out.push_back(std::move(reduced));
  }
  return out;
}

void verify_manifest_hash(const std::string& manifest_path, const Checkpoint& checkpoint) {
  const std::string actual = hash_file(manifest_path);
  if (actual != checkpoint.manifest_hash)
    throw ManifestMismatch("checkpoint was trained against manifest hash " +
                           checkpoint.manifest_hash + " but '" + manifest_path + "' hashes to " +
                           actual);
}

std::vector<long> recover_timestamps(const std::string& excavation_csv) {
  if (excavation_csv.empty()) return {};
  try {
    const auto records = read_excavation_csv(excavation_csv);
    std::vector<long> ts;
    for (const ExcavationRecord& r : records)
      if (r.phase == Phase::Stable) ts.push_back(r.timestamp);
    return ts;
  } catch (const Error&) {
    return {};  // timestamps are informational; fall back to zeros
  }
}

// --- commands ---------------------------------------------------------------------

int cmd_simulate(const json& cfg, bool to_stdout) {
  const int rings = get_or(cfg, "rings", 400);
  const int rows_per_ring = get_or(cfg, "rows_per_ring", 50);
  const double noise_sigma = get_or(cfg, "noise_sigma", 0.05);
  const double change_prob = get_or(cfg, "change_prob", 0.2);
  const double regime_spread = get_or(cfg, "regime_spread", 1.0);
  const std::uint64_t seed = get_or<std::uint64_t>(cfg, "seed", 42);
  const int fault_windows = get_or(cfg, "fault_windows", 0);
  const int window_len = get_or(cfg, "window_len", 32);
  const std::string geology_out = get_or<std::string>(cfg, "geology_out", "geology.csv");
  const std::string excavation_out = get_or<std::string>(cfg, "excavation_out", "excavation.csv");
  const std::string labels_out = get_or<std::string>(cfg, "labels_out", "labels.json");

  const auto geology =
      gen_geology(rings, scaled_regimes(default_regimes(), regime_spread), change_prob, seed);
  auto excavation = gen_excavation(geology, rows_per_ring, noise_sigma, seed + 1);

  FaultLabels labels;
  labels.window_len = window_len;
  if (fault_windows > 0) {
    int stable_rows = 0;
    for (const ExcavationRecord& r : excavation)
      if (r.phase == Phase::Stable) ++stable_rows;
    labels.faults = plan_faults(stable_rows / window_len, fault_windows, seed + 2);
    InjectionResult injected = inject_faults(std::move(excavation), labels.faults, window_len,
                                             seed + 3);
    excavation = std::move(injected.records);
    labels.fault_windows = std::move(injected.fault_windows);
  }

  write_geology_csv(geology_out, geology);
  write_excavation_csv(excavation_out, excavation);
  write_labels_json(labels_out, labels);
  log_info("simulate: " + std::to_string(geology.size()) + " geology rings, " +
           std::to_string(excavation.size()) + " excavation rows, " +
           std::to_string(labels.fault_windows.size()) + " fault windows");
  if (to_stdout) {
    json report;
    report["rings"] = geology.size();
    report["rows"] = excavation.size();
    report["fault_windows"] = labels.fault_windows.size();
    std::cout << report.dump(2) << std::endl;
  }
  return 0;
}

int cmd_preprocess(const json& cfg, const std::string& task_flag, bool to_stdout) {
  PreprocessOptions options;
  options.task = task_flag.empty() ? get_or<std::string>(cfg, "task", "rate") : task_flag;
  if (options.task != "rate" && options.task != "anomaly")
    throw ConfigInvalid("task must be 'rate' or 'anomaly'");
  options.embedding_dim = get_or<std::size_t>(cfg, "embedding_dim", options.embedding_dim);
  options.embedding_window =
      get_or<std::size_t>(cfg, "embedding_window", options.embedding_window);
  options.embedding_epochs =
      get_or<std::size_t>(cfg, "embedding_epochs", options.embedding_epochs);
  options.despike_window = get_or(cfg, "despike_window", options.despike_window);
  options.despike_k = get_or(cfg, "despike_k", options.despike_k);
  options.smooth_window = get_or(cfg, "smooth_window", options.smooth_window);
  options.seed = get_or<std::uint64_t>(cfg, "seed", options.seed);

  const std::string geology_csv = require_path(cfg, "geology_csv");
  const std::string excavation_csv = require_path(cfg, "excavation_csv");
  const std::string fused_out = get_or<std::string>(cfg, "fused_out", "fused.csv");
  const std::string manifest_out = get_or<std::string>(cfg, "manifest_out", "manifest.json");

  const auto geology = read_geology_csv(geology_csv);
  const auto excavation = read_excavation_csv(excavation_csv);
  PreprocessResult result = options.task == "rate"
                                ? preprocess_rate(geology, excavation, options)
                                : preprocess_anomaly(geology, excavation, options);
  result.manifest.geology_csv = geology_csv;
  result.manifest.excavation_csv = excavation_csv;

  write_fused_csv(fused_out, result.samples);
  write_manifest(manifest_out, result.manifest);
  log_info("preprocess(" + options.task + "): " + std::to_string(result.samples.size()) +
           " fused samples, " + std::to_string(result.manifest.columns.size()) + " features");
  if (to_stdout) {
    json report;
    report["task"] = options.task;
    report["samples"] = result.samples.size();
    report["features"] = result.manifest.columns.size();
    std::cout << report.dump(2) << std::endl;
  }
  return 0;
}

int cmd_train_rate(const json& cfg, bool to_stdout) {
  const std::string fused_csv = require_path(cfg, "fused_csv");
  const std::string manifest_path = require_path(cfg, "manifest");
  const std::string checkpoint_out = get_or<std::string>(cfg, "checkpoint_out", "rate_model.json");
  const std::string report_out = get_or<std::string>(cfg, "report_out", "");

  const RateModelConfig model_cfg = rate_config_from_json(cfg);
  const Manifest manifest = read_manifest(manifest_path);
  const auto samples = mask_features(read_fused_csv(fused_csv), manifest, model_cfg.use_geology);
  if (samples.empty()) throw EmptyDataset("train-rate: no samples in " + fused_csv);

  const DatasetSplit split = split_dataset(samples, model_cfg.seed);
  const WindowDataset train = make_rate_windows(split.train, model_cfg.window_len);
  const WindowDataset valid = make_rate_windows(split.valid, model_cfg.window_len);

  RateModel model(model_cfg, static_cast<int>(train.feature_dim), model_cfg.seed);
  const TrainingReport training = train_rate_model(model, train, valid);

  Checkpoint checkpoint;
  checkpoint.model_kind = "rate";
  checkpoint.config_json = rate_config_to_json(model_cfg).dump();
  checkpoint.input_dim = train.feature_dim;
  checkpoint.manifest_hash = hash_file(manifest_path);
  checkpoint.params = collect_params(model.named_parameters());
  write_checkpoint(checkpoint_out, checkpoint);

  json report;
  report["model_kind"] = "rate";
  report["best_epoch"] = training.best_epoch;
  report["train_loss"] = training.train_loss;
  report["valid_loss"] = training.valid_loss;
  emit_report(report, report_out, to_stdout);
  log_info("train-rate: best epoch " + std::to_string(training.best_epoch) + ", checkpoint " +
           checkpoint_out);
  return 0;
}

int cmd_eval_rate(const json& cfg, bool ablation, bool to_stdout) {
  const std::string fused_csv = require_path(cfg, "fused_csv");
  const std::string manifest_path = require_path(cfg, "manifest");
  const std::string report_out = get_or<std::string>(cfg, "report_out", "");
  const Manifest manifest = read_manifest(manifest_path);
  const auto samples = read_fused_csv(fused_csv);
  if (samples.empty()) throw EmptyDataset("eval-rate: no samples in " + fused_csv);

  if (ablation) {
    const RateModelConfig base_cfg = rate_config_from_json(cfg);
    std::vector<std::string> groups;
    for (const ColumnStats& c : manifest.columns) groups.push_back(c.group);
    const AblationReport ablation_report = run_ablation(base_cfg, samples, groups);
    json rows = json::array();
    for (const AblationCell& cell : ablation_report.cells)
      rows.push_back({{"geology", cell.geology},
                      {"modules", cell.modules},
                      {"r2", cell.r2},
                      {"mse", cell.mse},
                      {"best_epoch", cell.best_epoch}});
    emit_report(rows, report_out, to_stdout);
    log_info("eval-rate: ablation grid with " + std::to_string(rows.size()) + " cells");
    return 0;
  }

  const std::string checkpoint_path = require_path(cfg, "checkpoint");
  const Checkpoint checkpoint = read_checkpoint(checkpoint_path);
  if (checkpoint.model_kind != "rate")
    throw ConfigInvalid("checkpoint '" + checkpoint_path + "' is not a rate model");
  verify_manifest_hash(manifest_path, checkpoint);

  const RateModelConfig model_cfg = rate_config_from_json(json::parse(checkpoint.config_json));
  const auto masked = mask_features(samples, manifest, model_cfg.use_geology);
  const DatasetSplit split = split_dataset(masked, model_cfg.seed);
  const WindowDataset test = make_rate_windows(split.test, model_cfg.window_len);
  if (test.size() == 0) throw EmptyDataset("eval-rate: test split has no full windows");

  RateModel model(model_cfg, static_cast<int>(checkpoint.input_dim), model_cfg.seed);
  for (const NamedTensor& p : checkpoint.params) model.load_parameter(p.name, p.shape, p.data);

  const std::vector<double> y_hat = predict_rate(model, test);
  json report;
  report["r2"] = r_squared(test.targets, y_hat);
  report["mse"] = mse(test.targets, y_hat);
  report["n_test"] = test.size();
  emit_report(report, report_out, to_stdout);
  log_info("eval-rate: r2 " + format_double(report["r2"].get<double>()) + ", mse " +
           format_double(report["mse"].get<double>()));
  return 0;
}

std::set<int> load_fault_windows(const json& cfg) {
  const std::string labels_path = get_or<std::string>(cfg, "labels", "");
  std::set<int> faults;
  if (!labels_path.empty()) {
    const FaultLabels labels = read_labels_json(labels_path);
    faults.insert(labels.fault_windows.begin(), labels.fault_windows.end());
  }
  return faults;
}

int cmd_train_anomaly(const json& cfg, bool to_stdout) {
  const std::string fused_csv = require_path(cfg, "fused_csv");
  const std::string manifest_path = require_path(cfg, "manifest");
  const std::string checkpoint_out =
      get_or<std::string>(cfg, "checkpoint_out", "anomaly_model.json");
  const std::string report_out = get_or<std::string>(cfg, "report_out", "");

  const VaeModelConfig model_cfg = vae_config_from_json(cfg);
  const Manifest manifest = read_manifest(manifest_path);
  const auto samples = read_fused_csv(fused_csv);
  if (samples.empty()) throw EmptyDataset("train-anomaly: no samples in " + fused_csv);

  const AnomalyWindows all = make_anomaly_windows(samples, {}, manifest, model_cfg.seq_len);
  const std::set<int> faults = load_fault_windows(cfg);
  const NormalSplit normals =
      split_normal_windows(static_cast<int>(all.exc.size()), faults);
  if (normals.train.empty() || normals.valid.empty())
    throw EmptyDataset("train-anomaly: not enough normal windows");

  const WindowSet train_exc = select_windows(all.exc, normals.train);
  const WindowSet train_geo = select_windows(all.geo, normals.train);

  log_debug("train-anomaly: pretraining autoencoder");
  const EncoderParams encoder = pretrain_lstm_ae(model_cfg, train_exc, train_geo);
  AnomalyModel model(model_cfg, static_cast<int>(all.exc.dim), static_cast<int>(all.geo.dim),
                     model_cfg.seed);
  model.apply_pretrained(encoder);
  log_debug("train-anomaly: training the variational model");
  const VaeTrainingReport training = train_vae(model, train_exc, train_geo);

  const std::vector<double> valid_scores =
      score_windows(model, select_windows(all.exc, normals.valid),
                    select_windows(all.geo, normals.valid));
  const double threshold = calibrate_threshold(valid_scores, model_cfg.threshold_quantile);

  Checkpoint checkpoint;
  checkpoint.model_kind = "anomaly";
  checkpoint.config_json = vae_config_to_json(model_cfg, static_cast<int>(all.exc.dim),
                                              static_cast<int>(all.geo.dim))
                               .dump();
  checkpoint.input_dim = all.exc.dim + all.geo.dim;
  checkpoint.manifest_hash = hash_file(manifest_path);
  checkpoint.threshold = threshold;
  checkpoint.params = collect_params(model.named_parameters());
  write_checkpoint(checkpoint_out, checkpoint);

  json report;
  report["model_kind"] = "anomaly";
  report["threshold"] = threshold;
  report["train_windows"] = normals.train.size();
  report["valid_windows"] = normals.valid.size();
  report["total"] = training.total;
  report["recon"] = training.recon;
  report["kl"] = training.kl;
  emit_report(report, report_out, to_stdout);
  log_info("train-anomaly: threshold " + format_double(threshold) + ", checkpoint " +
           checkpoint_out);
  return 0;
}

int cmd_detect(const json& cfg, bool to_stdout) {
  const std::string fused_csv = require_path(cfg, "fused_csv");
  const std::string manifest_path = require_path(cfg, "manifest");
  const std::string checkpoint_path = require_path(cfg, "checkpoint");
  const std::string verdicts_out = get_or<std::string>(cfg, "verdicts_out", "verdicts.csv");
  const std::string report_out = get_or<std::string>(cfg, "report_out", "");

  const Manifest manifest = read_manifest(manifest_path);
  const Checkpoint checkpoint = read_checkpoint(checkpoint_path);
  if (checkpoint.model_kind != "anomaly")
    throw ConfigInvalid("checkpoint '" + checkpoint_path + "' is not an anomaly model");
  verify_manifest_hash(manifest_path, checkpoint);

  const json model_json = json::parse(checkpoint.config_json);
  const VaeModelConfig model_cfg = vae_config_from_json(model_json);
  const int d_exc = model_json.at("d_exc").get<int>();
  const int d_geo = model_json.at("d_geo").get<int>();

  const auto samples = read_fused_csv(fused_csv);
  const std::string excavation_csv =
      get_or<std::string>(cfg, "excavation_csv", manifest.excavation_csv);
  const AnomalyWindows all = make_anomaly_windows(samples, recover_timestamps(excavation_csv),
                                                  manifest, model_cfg.seq_len);
  if (all.exc.size() == 0) throw EmptyDataset("detect: no full windows");

  AnomalyModel model(model_cfg, d_exc, d_geo, model_cfg.seed);
  for (const NamedTensor& p : checkpoint.params) model.load_parameter(p.name, p.shape, p.data);

  std::vector<AnomalyVerdict> verdicts = detect(model, checkpoint.threshold, all.exc, all.geo);
  for (AnomalyVerdict& v : verdicts)
    v.start_timestamp = all.start_timestamps[static_cast<std::size_t>(v.window_index)];

  std::ofstream out(verdicts_out);
  if (!out) throw IoError("cannot open '" + verdicts_out + "' for writing");
  out << "window_index,start_timestamp,score,threshold,is_anomaly\n";
  std::set<int> flagged;
  for (const AnomalyVerdict& v : verdicts) {
    out << v.window_index << ',' << v.start_timestamp << ',' << format_double(v.score) << ','
        << format_double(v.threshold) << ',' << (v.is_anomaly ? 1 : 0) << "\n";
    if (v.is_anomaly) flagged.insert(v.window_index);
  }
  if (!out) throw IoError("failed writing '" + verdicts_out + "'");

  const std::set<int> faults = load_fault_windows(cfg);
  const NormalSplit normals = split_normal_windows(static_cast<int>(all.exc.size()), faults);
  const std::set<int> held_out_normals(normals.test.begin(), normals.test.end());

  json report;
  report["threshold"] = checkpoint.threshold;
  report["n_windows"] = all.exc.size();
  report["n_flagged"] = flagged.size();
  if (!faults.empty()) {
    report["n_labeled"] = faults.size();
    report["detection_rate"] = detection_rate(faults, flagged);
    report["false_positive_rate"] = held_out_normals.empty()
                                        ? 0.0
                                        : false_positive_rate(held_out_normals, flagged);
  }
  emit_report(report, report_out, to_stdout);
  log_info("detect: flagged " + std::to_string(flagged.size()) + " of " +
           std::to_string(all.exc.size()) + " windows");
  return 0;
}

int dispatch(const std::string& command, const std::string& config_path, long seed_override,
             const std::string& task_flag, bool ablation, bool to_stdout) {
  json cfg = load_config(config_path);
  if (seed_override >= 0) cfg["seed"] = static_cast<std::uint64_t>(seed_override);
  if (command == "simulate") return cmd_simulate(cfg, to_stdout);
  if (command == "preprocess") return cmd_preprocess(cfg, task_flag, to_stdout);
  if (command == "train-rate") return cmd_train_rate(cfg, to_stdout);
  if (command == "eval-rate") return cmd_eval_rate(cfg, ablation, to_stdout);
  if (command == "train-anomaly") return cmd_train_anomaly(cfg, to_stdout);
  if (command == "detect") return cmd_detect(cfg, to_stdout);
  throw ConfigInvalid("unknown command '" + command + "'");
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Shield machine telemetry toolkit: advance-rate prediction and anomaly detection"};
  app.require_subcommand(1);

  std::string config_path;
  long seed_override = -1;
  std::string task_flag;
  bool ablation = false;
  bool to_stdout = false;

  const char* names[] = {"simulate",   "preprocess", "train-rate",
                         "eval-rate",  "train-anomaly", "detect"};
  const char* descriptions[] = {
      "Generate a synthetic geology/excavation corpus with optional fault injection",
      "Fuse geology with excavation telemetry into model-ready samples",
      "Train the advance-rate CNN and write a checkpoint",
      "Evaluate a rate checkpoint on the test split (or run the --ablation grid)",
      "Pretrain and train the LSTM-VAE detector and calibrate its threshold",
      "Score windows against a trained detector and write verdicts"};
  for (std::size_t i = 0; i < std::size(names); ++i) {
    CLI::App* sub = app.add_subcommand(names[i], descriptions[i]);
    sub->add_option("--config", config_path, "Path to the JSON config file")->required();
    sub->add_option("--seed", seed_override, "Override the config seed");
    sub->add_flag("--stdout", to_stdout, "Print the report JSON to stdout");
    if (std::string(names[i]) == "preprocess")
      sub->add_option("--task", task_flag, "rate|anomaly")
          ->check(CLI::IsMember({"rate", "anomaly"}));
    if (std::string(names[i]) == "eval-rate")
      sub->add_flag("--ablation", ablation, "Train the 2x4 module/geology grid");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return dispatch(command, config_path, seed_override, task_flag, ablation, to_stdout);
  } catch (const ManifestMismatch& e) {
    std::cerr << "tbm: integrity: " << e.what() << "\n";
    return 5;
  } catch (const SchemaMismatch& e) {
    std::cerr << "tbm: schema: " << e.what() << "\n";
    return 4;
  } catch (const IoError& e) {
    std::cerr << "tbm: io: " << e.what() << "\n";
    return 3;
  } catch (const ConfigInvalid& e) {
    std::cerr << "tbm: config: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "tbm: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "tbm: unexpected: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace tbm
