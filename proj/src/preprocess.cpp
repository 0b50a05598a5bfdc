#include "tbm/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "tbm/errors.hpp"

namespace tbm {

namespace {

bool missing(double v) { return std::isnan(v); }

double median_inplace(std::vector<double>& values) {
  const std::size_t n = values.size();
  auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  if (n % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(values.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace

std::string phase_name(Phase phase) {
  switch (phase) {
    case Phase::Rising: return "Rising";
    case Phase::Stable: return "Stable";
    case Phase::Assembly: return "Assembly";
    case Phase::Maintenance: return "Maintenance";
    case Phase::Stopped: return "Stopped";
  }
  return "Stable";
}

Phase parse_phase(const std::string& name) {
  if (name == "Rising") return Phase::Rising;
  if (name == "Stable") return Phase::Stable;
  if (name == "Assembly") return Phase::Assembly;
  if (name == "Maintenance") return Phase::Maintenance;
  if (name == "Stopped") return Phase::Stopped;
  throw SchemaMismatch("phase");
}

const std::vector<std::string>& excavation_channel_names() {
  static const std::vector<std::string> names = {
      "propulsion_speed", "cutter_speed",  "cutter_torque",       "total_propulsion",
      "cutter_power",     "displacement",  "propulsion_pressure", "propulsion_thrust"};
  return names;
}

namespace {

double ExcavationRecord::* channel_member(const std::string& name) {
  static const std::unordered_map<std::string, double ExcavationRecord::*> members = {
      {"propulsion_speed", &ExcavationRecord::propulsion_speed},
      {"cutter_speed", &ExcavationRecord::cutter_speed},
      {"cutter_torque", &ExcavationRecord::cutter_torque},
      {"total_propulsion", &ExcavationRecord::total_propulsion},
      {"cutter_power", &ExcavationRecord::cutter_power},
      {"displacement", &ExcavationRecord::displacement},
      {"propulsion_pressure", &ExcavationRecord::propulsion_pressure},
      {"propulsion_thrust", &ExcavationRecord::propulsion_thrust}};
  auto it = members.find(name);
  if (it == members.end()) throw Error("unknown excavation channel '" + name + "'");
  return it->second;
}

}  // namespace

double excavation_channel(const ExcavationRecord& record, const std::string& name) {
  return record.*channel_member(name);
}

void set_excavation_channel(ExcavationRecord& record, const std::string& name, double value) {
  record.*channel_member(name) = value;
}

std::vector<double> fill_missing(std::vector<double> series) {
  const std::size_t n = series.size();
  std::size_t first = n;
  for (std::size_t i = 0; i < n; ++i)
    if (!missing(series[i])) {
      first = i;
      break;
    }
  if (first == n) throw AllMissing();

  for (std::size_t i = 0; i < first; ++i) series[i] = series[first];
  std::size_t last_known = first;
  for (std::size_t i = first + 1; i < n; ++i) {
    if (missing(series[i])) continue;
    if (i > last_known + 1) {
      const double lo = series[last_known];
      const double hi = series[i];
      const double span = static_cast<double>(i - last_known);
      for (std::size_t j = last_known + 1; j < i; ++j)
        series[j] = lo + (hi - lo) * static_cast<double>(j - last_known) / span;
    }
    last_known = i;
  }
  for (std::size_t i = last_known + 1; i < n; ++i) series[i] = series[last_known];
  return series;
}

std::vector<double> remove_discrete_points(const std::vector<double>& series, int window,
                                           double k) {
  if (window < 1 || window % 2 == 0) throw Error("remove_discrete_points: window must be odd");
  if (k <= 0.0) throw Error("remove_discrete_points: k must be positive");
  if (static_cast<std::size_t>(window) > series.size())
    throw WindowTooLarge("remove_discrete_points: window " + std::to_string(window) +
                         " exceeds series length " + std::to_string(series.size()));
  const std::size_t n = series.size();
  const std::size_t half = static_cast<std::size_t>(window) / 2;
  std::vector<double> cleaned = series;
  std::vector<double> scratch;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    scratch.assign(series.begin() + static_cast<std::ptrdiff_t>(lo),
                   series.begin() + static_cast<std::ptrdiff_t>(hi + 1));
    const double med = median_inplace(scratch);
    scratch.assign(series.begin() + static_cast<std::ptrdiff_t>(lo),
                   series.begin() + static_cast<std::ptrdiff_t>(hi + 1));
    for (double& v : scratch) v = std::abs(v - med);
    const double mad = std::max(median_inplace(scratch), 1e-9);
    if (std::abs(series[i] - med) > k * mad)
      cleaned[i] = std::numeric_limits<double>::quiet_NaN();
  }
  return fill_missing(std::move(cleaned));
}

std::vector<double> zscore_apply(const std::vector<double>& series, const ZScoreStats& stats) {
  const double divisor = stats.stddev > 1e-12 ? stats.stddev : 1.0;
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) out[i] = (series[i] - stats.mean) / divisor;
  return out;
}

std::pair<std::vector<double>, ZScoreStats> zscore_normalize(const std::vector<double>& series) {
  if (series.size() < 2) throw ZeroVariance("zscore_normalize: need at least 2 values");
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(series.size());
  double ss = 0.0;
  for (double v : series) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(series.size() - 1);
  if (var <= 0.0) throw ZeroVariance();
  ZScoreStats stats{mean, std::sqrt(var)};
  return {zscore_apply(series, stats), stats};
}

std::vector<double> minmax_apply(const std::vector<double>& series, const MinMaxStats& stats,
                                 bool clamp) {
  const double range = stats.max - stats.min;
  const double divisor = range > 1e-300 ? range : 1.0;
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    double v = (series[i] - stats.min) / divisor;
    if (clamp) v = std::min(1.0, std::max(0.0, v));
    out[i] = v;
  }
  return out;
}

std::pair<std::vector<double>, MinMaxStats> minmax_normalize(const std::vector<double>& series) {
  if (series.empty()) throw ZeroRange("minmax_normalize: empty series");
  const auto [lo_it, hi_it] = std::minmax_element(series.begin(), series.end());
  if (*lo_it == *hi_it) throw ZeroRange();
  MinMaxStats stats{*lo_it, *hi_it};
  return {minmax_apply(series, stats), stats};
}

std::vector<double> boxcox_transform(const std::vector<double>& series, double lambda) {
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series[i] <= 0.0)
      throw NonPositiveValue("boxcox: value " + std::to_string(series[i]) + " at index " +
                             std::to_string(i));
    out[i] = lambda == 0.0 ? std::log(series[i])
                           : (std::pow(series[i], lambda) - 1.0) / lambda;
  }
  return out;
}

std::pair<std::vector<double>, double> boxcox(const std::vector<double>& series) {
  if (series.empty()) throw NonPositiveValue("boxcox: empty series");
  double log_sum = 0.0;
  for (double v : series) {
    if (v <= 0.0) throw NonPositiveValue();
    log_sum += std::log(v);
  }
  const double n = static_cast<double>(series.size());
  double best_lambda = 0.0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int step = -200; step <= 200; ++step) {
    const double lambda = static_cast<double>(step) / 100.0;
    std::vector<double> y = boxcox_transform(series, lambda);
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    const double var = ss / n;  // MLE variance
    if (var <= 0.0) continue;
    const double ll = -0.5 * n * std::log(var) + (lambda - 1.0) * log_sum;
    if (ll > best_ll) {
      best_ll = ll;
      best_lambda = lambda;
    }
  }
  return {boxcox_transform(series, best_lambda), best_lambda};
}

std::vector<double> window_smooth(const std::vector<double>& series, int window) {
  if (window < 1 || window % 2 == 0) throw Error("window_smooth: window must be odd");
  if (static_cast<std::size_t>(window) > series.size())
    throw WindowTooLarge("window_smooth: window " + std::to_string(window) +
                         " exceeds series length " + std::to_string(series.size()));
  const std::size_t n = series.size();
  const std::size_t half = static_cast<std::size_t>(window) / 2;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    double total = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) total += series[j];
    out[i] = total / static_cast<double>(hi - lo + 1);
  }
  return out;
}

std::vector<ExcavationRecord> filter_operating_segments(
    const std::vector<ExcavationRecord>& records) {
  std::vector<ExcavationRecord> out;
  out.reserve(records.size());
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [](const ExcavationRecord& r) { return r.phase == Phase::Stable; });
  return out;
}

std::vector<std::string> fused_feature_names(std::size_t embedding_dim) {
  std::vector<std::string> names = excavation_channel_names();
  const std::vector<std::string> geo = {"geo_ucs",        "geo_permeability",
                                        "geo_rock_level", "geo_layer_number",
                                        "geo_accounting", "geo_integrity_low",
                                        "geo_integrity_high", "geo_standard_penetration"};
  names.insert(names.end(), geo.begin(), geo.end());
  for (std::size_t i = 0; i < embedding_dim; ++i)
    names.push_back("emb_plasticity_" + std::to_string(i));
  for (std::size_t i = 0; i < embedding_dim; ++i)
    names.push_back("emb_density_" + std::to_string(i));
  return names;
}

std::vector<std::string> fused_feature_groups(std::size_t embedding_dim) {
  std::vector<std::string> groups(excavation_channel_names().size(), "excavation");
  groups.insert(groups.end(), 8, "geology");
  groups.insert(groups.end(), 2 * embedding_dim, "embedding");
  return groups;
}

std::vector<FusedSample> merge_geology_excavation(const std::vector<GeologyRecord>& geology,
                                                  const std::vector<ExcavationRecord>& excavation,
                                                  const TextEmbedding& embedding,
                                                  bool drop_ring_tail) {
  std::unordered_map<int, const GeologyRecord*> by_ring;
  for (const GeologyRecord& g : geology) by_ring[g.ring] = &g;

  std::unordered_map<int, std::vector<double>> plasticity_cache, density_cache;
  std::vector<FusedSample> out;
  out.reserve(excavation.size());
  for (std::size_t i = 0; i < excavation.size(); ++i) {
    const ExcavationRecord& row = excavation[i];
    auto geo_it = by_ring.find(row.ring);
    if (geo_it == by_ring.end()) throw MissingGeology(row.ring);
    const GeologyRecord& geo = *geo_it->second;

    const bool has_next = i + 1 < excavation.size() && excavation[i + 1].ring == row.ring;
    if (!has_next && drop_ring_tail) continue;

    FusedSample sample;
    sample.ring = row.ring;
    sample.target = has_next ? excavation[i + 1].propulsion_speed : row.propulsion_speed;
    auto& f = sample.features;
    f.reserve(16 + 2 * embedding.dim);
    for (const std::string& name : excavation_channel_names())
      f.push_back(excavation_channel(row, name));
    f.push_back(geo.ucs);
    f.push_back(geo.permeability);
    f.push_back(static_cast<double>(geo.rock_level));
    f.push_back(static_cast<double>(geo.layer_number));
    f.push_back(geo.accounting);
    f.push_back(geo.integrity_low);
    f.push_back(geo.integrity_high);
    f.push_back(geo.standard_penetration);
    auto& pl = plasticity_cache[row.ring];
    if (pl.empty()) pl = embedding.embed(geo.plasticity);
    f.insert(f.end(), pl.begin(), pl.end());
    auto& de = density_cache[row.ring];
    if (de.empty()) de = embedding.embed(geo.density);
    f.insert(f.end(), de.begin(), de.end());
    out.push_back(std::move(sample));
  }
  return out;
}

SplitSizes split_sizes(std::size_t n) {
  SplitSizes sizes;
  sizes.train = n * 7 / 10;
  sizes.valid = n * 2 / 10;
  sizes.test = n / 10;
  sizes.train += n - sizes.train - sizes.valid - sizes.test;  // remainder to train
  return sizes;
}

DatasetSplit split_dataset(const std::vector<FusedSample>& samples, std::uint64_t /*seed*/) {
  if (samples.size() < 10)
    throw TooFewSamples("split_dataset: need at least 10 samples, got " +
                        std::to_string(samples.size()));
  const SplitSizes sizes = split_sizes(samples.size());
  DatasetSplit split;
  split.train.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(sizes.train));
  split.valid.assign(samples.begin() + static_cast<std::ptrdiff_t>(sizes.train),
                     samples.begin() + static_cast<std::ptrdiff_t>(sizes.train + sizes.valid));
  split.test.assign(samples.begin() + static_cast<std::ptrdiff_t>(sizes.train + sizes.valid),
                    samples.end());
  return split;
}

}  // namespace tbm
