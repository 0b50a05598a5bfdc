#include "tbm/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "tbm/errors.hpp"

namespace tbm {

namespace {

constexpr double kFitFraction = 0.7;

TextEmbedding train_geology_embedding(const std::vector<GeologyRecord>& geology,
                                      const PreprocessOptions& options) {
  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(geology.size());
  for (const GeologyRecord& g : geology) corpus.push_back({g.plasticity, g.density});
  return train_word2vec(corpus, options.embedding_dim, options.embedding_window,
                        options.embedding_epochs, options.seed);
}

// Column view of the fused sample block, one series per feature plus target.
struct ColumnBlock {
  std::vector<std::vector<double>> features;
  std::vector<double> target;
};

ColumnBlock to_columns(const std::vector<FusedSample>& samples) {
  ColumnBlock block;
  if (samples.empty()) return block;
  const std::size_t width = samples.front().features.size();
  block.features.assign(width, std::vector<double>(samples.size()));
  block.target.resize(samples.size());
  for (std::size_t r = 0; r < samples.size(); ++r) {
    for (std::size_t c = 0; c < width; ++c) block.features[c][r] = samples[r].features[c];
    block.target[r] = samples[r].target;
  }
  return block;
}

void from_columns(const ColumnBlock& block, std::vector<FusedSample>& samples) {
  for (std::size_t r = 0; r < samples.size(); ++r) {
    for (std::size_t c = 0; c < block.features.size(); ++c)
      samples[r].features[c] = block.features[c][r];
    samples[r].target = block.target[r];
  }
}

void clean_column(std::vector<double>& column, int despike_window, double despike_k) {
  column = fill_missing(std::move(column));
  if (static_cast<std::size_t>(despike_window) <= column.size())
    column = remove_discrete_points(column, despike_window, despike_k);
}

bool column_constant(const std::vector<double>& column, std::size_t fit_rows) {
  const auto [lo, hi] =
      std::minmax_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(fit_rows));
  return *lo == *hi;
}

void zscore_column(std::vector<double>& column, std::size_t fit_rows, ColumnStats& stats) {
  if (column_constant(column, fit_rows)) {
    stats.constant = true;
    stats.mean = column.front();
    stats.stddev = 0.0;
    for (double& v : column) v -= stats.mean;  // constant maps to zero
    return;
  }
  const std::vector<double> head(column.begin(),
                                 column.begin() + static_cast<std::ptrdiff_t>(fit_rows));
  const auto [_, fitted] = zscore_normalize(head);
  stats.mean = fitted.mean;
  stats.stddev = fitted.stddev;
  column = zscore_apply(column, fitted);
}

void minmax_column(std::vector<double>& column, std::size_t fit_rows, ColumnStats& stats) {
  if (column_constant(column, fit_rows)) {
    stats.constant = true;
    stats.min = stats.max = column.front();
    for (double& v : column) v = 0.5;  // constant maps to mid-range
    return;
  }
  const std::vector<double> head(column.begin(),
                                 column.begin() + static_cast<std::ptrdiff_t>(fit_rows));
  const auto [_, fitted] = minmax_normalize(head);
  stats.min = fitted.min;
  stats.max = fitted.max;
  column = minmax_apply(column, fitted, /*clamp=*/true);
}

Manifest base_manifest(const PreprocessOptions& options, const TextEmbedding& embedding) {
  Manifest m;
  m.task = options.task;
  m.embedding_dim = options.embedding_dim;
  m.seed = options.seed;
  m.despike_window = options.despike_window;
  m.despike_k = options.despike_k;
  m.smooth_window = options.smooth_window;
  m.embedding = embedding;
  const auto names = fused_feature_names(options.embedding_dim);
  const auto groups = fused_feature_groups(options.embedding_dim);
  m.columns.resize(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    m.columns[i].name = names[i];
    m.columns[i].group = groups[i];
  }
  m.target.name = "target";
  m.target.group = "target";
  return m;
}

}  // namespace

PreprocessResult preprocess_rate(const std::vector<GeologyRecord>& geology,
                                 const std::vector<ExcavationRecord>& excavation,
                                 const PreprocessOptions& options) {
  const TextEmbedding embedding = train_geology_embedding(geology, options);
  std::vector<FusedSample> samples =
      merge_geology_excavation(geology, excavation, embedding, /*drop_ring_tail=*/true);

  // Phase and timestamp run alongside the samples so the filter can happen
  // after normalization, mirroring the processing order of the source steps.
  std::vector<Phase> phases;
  std::vector<long> timestamps;
  phases.reserve(samples.size());
  for (std::size_t i = 0, s = 0; i < excavation.size() && s < samples.size(); ++i) {
    const bool has_next = i + 1 < excavation.size() && excavation[i + 1].ring == excavation[i].ring;
    if (!has_next) continue;  // merge dropped ring tails
    phases.push_back(excavation[i].phase);
    timestamps.push_back(excavation[i].timestamp);
    ++s;
  }

  ColumnBlock block = to_columns(samples);
  Manifest manifest = base_manifest(options, embedding);
  const std::size_t fit_rows = std::max<std::size_t>(
      2, static_cast<std::size_t>(kFitFraction * static_cast<double>(samples.size())));
  manifest.fit_rows = fit_rows;

  for (std::size_t c = 0; c < block.features.size(); ++c) {
    // Despiking is for sensor channels; ring-constant survey columns would
    // have their regime steps flagged as outliers and smeared into ramps.
    if (manifest.columns[c].group == "excavation")
      clean_column(block.features[c], options.despike_window, options.despike_k);
    else
      block.features[c] = fill_missing(std::move(block.features[c]));
    zscore_column(block.features[c], fit_rows, manifest.columns[c]);
  }
  clean_column(block.target, options.despike_window, options.despike_k);
  zscore_column(block.target, fit_rows, manifest.target);
  from_columns(block, samples);

  PreprocessResult result;
  result.manifest = std::move(manifest);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (phases[i] != Phase::Stable) continue;
    result.samples.push_back(std::move(samples[i]));
    result.timestamps.push_back(timestamps[i]);
  }
  return result;
}

PreprocessResult preprocess_anomaly(const std::vector<GeologyRecord>& geology,
                                    const std::vector<ExcavationRecord>& excavation,
                                    const PreprocessOptions& options) {
  const TextEmbedding embedding = train_geology_embedding(geology, options);
  const std::vector<ExcavationRecord> stable = filter_operating_segments(excavation);
  // Keep ring tails so window indices align one-to-one with Stable rows.
  std::vector<FusedSample> samples =
      merge_geology_excavation(geology, stable, embedding, /*drop_ring_tail=*/false);

  ColumnBlock block = to_columns(samples);
  Manifest manifest = base_manifest(options, embedding);
  const std::size_t fit_rows = std::max<std::size_t>(
      2, static_cast<std::size_t>(kFitFraction * static_cast<double>(samples.size())));
  manifest.fit_rows = fit_rows;

  auto process = [&](std::vector<double>& column, ColumnStats& stats, bool sensor_channel) {
    if (sensor_channel) {
      clean_column(column, options.despike_window, options.despike_k);
      if (static_cast<std::size_t>(options.smooth_window) <= column.size())
        column = window_smooth(column, options.smooth_window);
    } else {
      column = fill_missing(std::move(column));
    }
    const bool positive = std::all_of(column.begin(), column.end(),
                                      [](double v) { return v > 0.0; });
    if (positive && !column_constant(column, column.size())) {
      const std::vector<double> head(column.begin(),
                                     column.begin() + static_cast<std::ptrdiff_t>(fit_rows));
      const auto [_, lambda] = boxcox(head);
      stats.boxcox_applied = true;
      stats.boxcox_lambda = lambda;
      column = boxcox_transform(column, lambda);
    }
    minmax_column(column, fit_rows, stats);
  };

  for (std::size_t c = 0; c < block.features.size(); ++c)
    process(block.features[c], manifest.columns[c], manifest.columns[c].group == "excavation");
  process(block.target, manifest.target, true);
  from_columns(block, samples);

  PreprocessResult result;
  result.samples = std::move(samples);
  result.manifest = std::move(manifest);
  result.timestamps.reserve(stable.size());
  for (const ExcavationRecord& r : stable) result.timestamps.push_back(r.timestamp);
  return result;
}

AnomalyWindows make_anomaly_windows(const std::vector<FusedSample>& samples,
                                    const std::vector<long>& timestamps,
                                    const Manifest& manifest, int seq_len) {
  if (seq_len < 1) throw ConfigInvalid("seq_len must be positive");
  std::vector<std::size_t> exc_cols, geo_cols;
  for (std::size_t i = 0; i < manifest.columns.size(); ++i) {
    if (manifest.columns[i].group == "excavation")
      exc_cols.push_back(i);
    else
      geo_cols.push_back(i);
  }

  AnomalyWindows out;
  const std::size_t s = static_cast<std::size_t>(seq_len);
  out.exc.seq_len = out.geo.seq_len = s;
  out.exc.dim = exc_cols.size();
  out.geo.dim = geo_cols.size();
  const std::size_t count = samples.size() / s;
  for (std::size_t w = 0; w < count; ++w) {
    std::vector<double> exc(s * exc_cols.size());
    std::vector<double> geo(s * geo_cols.size());
    for (std::size_t t = 0; t < s; ++t) {
      const FusedSample& row = samples[w * s + t];
      for (std::size_t j = 0; j < exc_cols.size(); ++j)
        exc[t * exc_cols.size() + j] = row.features[exc_cols[j]];
      for (std::size_t j = 0; j < geo_cols.size(); ++j)
        geo[t * geo_cols.size() + j] = row.features[geo_cols[j]];
    }
    out.exc.windows.push_back(std::move(exc));
    out.geo.windows.push_back(std::move(geo));
    out.start_timestamps.push_back(w * s < timestamps.size() ? timestamps[w * s] : 0);
  }
  return out;
}

NormalSplit split_normal_windows(int window_count, const std::set<int>& fault_windows) {
  std::vector<int> normal;
  for (int w = 0; w < window_count; ++w)
    if (!fault_windows.count(w)) normal.push_back(w);
  const SplitSizes sizes = split_sizes(normal.size());
  NormalSplit split;
  split.train.assign(normal.begin(), normal.begin() + static_cast<std::ptrdiff_t>(sizes.train));
  split.valid.assign(normal.begin() + static_cast<std::ptrdiff_t>(sizes.train),
                     normal.begin() + static_cast<std::ptrdiff_t>(sizes.train + sizes.valid));
  split.test.assign(normal.begin() + static_cast<std::ptrdiff_t>(sizes.train + sizes.valid),
                    normal.end());
  return split;
}

WindowSet select_windows(const WindowSet& all, const std::vector<int>& indices) {
  WindowSet out;
  out.seq_len = all.seq_len;
  out.dim = all.dim;
  out.windows.reserve(indices.size());
  for (int i : indices) out.windows.push_back(all.windows[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace tbm
