#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "tbm/anomaly_model.hpp"
#include "tbm/io.hpp"
#include "tbm/preprocess.hpp"

namespace tbm {

struct PreprocessOptions {
  std::string task = "rate";  // "rate" | "anomaly"
  std::size_t embedding_dim = 8;
  std::size_t embedding_window = 2;
  std::size_t embedding_epochs = 40;
  int despike_window = 11;
  double despike_k = 5.0;
  int smooth_window = 5;  // anomaly task
  std::uint64_t seed = 42;
};

struct PreprocessResult {
  std::vector<FusedSample> samples;
  Manifest manifest;
  std::vector<long> timestamps;  // source-row timestamp per sample
};

/// Rate chain: embed -> merge -> fill -> despike -> z-score -> phase filter.
/// Statistics are fitted on the leading 70% of rows at the normalization
/// stage and applied everywhere.
PreprocessResult preprocess_rate(const std::vector<GeologyRecord>& geology,
                                 const std::vector<ExcavationRecord>& excavation,
                                 const PreprocessOptions& options);

/// Anomaly chain: phase filter -> merge -> fill -> despike -> smooth ->
/// box-cox (strictly positive columns) -> min-max into [0,1] (applied with
/// clamping outside the fit range).
PreprocessResult preprocess_anomaly(const std::vector<GeologyRecord>& geology,
                                    const std::vector<ExcavationRecord>& excavation,
                                    const PreprocessOptions& options);

// --- anomaly windowing ----------------------------------------------------------

struct AnomalyWindows {
  WindowSet exc;
  WindowSet geo;
  std::vector<long> start_timestamps;  // per window
};

/// Consecutive non-overlapping windows of seq_len rows; the trailing partial
/// window is dropped. Excavation-group columns feed the reconstruction head,
/// geology and embedding columns the conditioning head.
AnomalyWindows make_anomaly_windows(const std::vector<FusedSample>& samples,
                                    const std::vector<long>& timestamps,
                                    const Manifest& manifest, int seq_len);

struct NormalSplit {
  std::vector<int> train;  // normal windows for model fitting
  std::vector<int> valid;  // normal windows for threshold calibration
  std::vector<int> test;   // held-out normal windows for the false-positive rate
};

/// Chronological 7:2:1 split of the windows NOT in `fault_windows`.
NormalSplit split_normal_windows(int window_count, const std::set<int>& fault_windows);

WindowSet select_windows(const WindowSet& all, const std::vector<int>& indices);

}  // namespace tbm
