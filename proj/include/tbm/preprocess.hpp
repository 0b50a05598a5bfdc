#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tbm/word2vec.hpp"

namespace tbm {

// Per-ring geological survey features.
struct GeologyRecord {
  int ring = 0;
  std::string plasticity;
  std::string density;
  double ucs = 0.0;            // unconfined compressive strength, MPa
  double permeability = 0.0;   // m/s
  int rock_level = 0;          // surrounding rock grade
  int layer_number = 0;
  double accounting = 0.0;     // proportion in [0, 1]
  double integrity_low = 0.0;  // parsed from "a to b" range text
  double integrity_high = 0.0;
  double standard_penetration = 0.0;  // blow count
};

enum class Phase { Rising, Stable, Assembly, Maintenance, Stopped };

std::string phase_name(Phase phase);
Phase parse_phase(const std::string& name);

// Per-timestep excavation telemetry.
struct ExcavationRecord {
  long timestamp = 0;  // seconds, strictly increasing within a ring
  int ring = 0;
  double propulsion_speed = 0.0;  // mm/min, the prediction target
  double cutter_speed = 0.0;      // rpm
  double cutter_torque = 0.0;     // kN*m
  double total_propulsion = 0.0;  // kN
  double cutter_power = 0.0;      // kW
  double displacement = 0.0;      // mm
  double propulsion_pressure = 0.0;  // bar
  double propulsion_thrust = 0.0;    // kN
  Phase phase = Phase::Stable;
};

/// Names of the numeric excavation channels, in feature order.
const std::vector<std::string>& excavation_channel_names();
double excavation_channel(const ExcavationRecord& record, const std::string& name);
void set_excavation_channel(ExcavationRecord& record, const std::string& name, double value);

// Ring-aligned merged feature vector plus one-step-ahead target.
struct FusedSample {
  std::vector<double> features;
  double target = 0.0;
  int ring = 0;
};

// --- series cleaning ---------------------------------------------------------
// Missing values are encoded as NaN.

/// Linear interpolation of interior gaps; leading/trailing gaps copy the
/// nearest known value.
std::vector<double> fill_missing(std::vector<double> series);

/// Marks points with |x - rolling_median| > k * rolling_MAD (MAD floored at
/// 1e-9) as missing, then fills them. Windows are centered and truncated at
/// the edges.
std::vector<double> remove_discrete_points(const std::vector<double>& series, int window,
                                           double k);

struct ZScoreStats {
  double mean = 0.0;
  double stddev = 1.0;  // sample standard deviation, divisor n-1
};

std::vector<double> zscore_apply(const std::vector<double>& series, const ZScoreStats& stats);
/// Fit and apply; throws ZeroVariance on constant input.
std::pair<std::vector<double>, ZScoreStats> zscore_normalize(const std::vector<double>& series);

struct MinMaxStats {
  double min = 0.0;
  double max = 1.0;
};

/// (x - min) / (max - min); clamps to [0, 1] when `clamp` is set (used when
/// replaying train-time statistics on later data).
std::vector<double> minmax_apply(const std::vector<double>& series, const MinMaxStats& stats,
                                 bool clamp = false);
std::pair<std::vector<double>, MinMaxStats> minmax_normalize(const std::vector<double>& series);

/// (x^lambda - 1) / lambda, or ln x at lambda == 0.
std::vector<double> boxcox_transform(const std::vector<double>& series, double lambda);
/// Fits lambda by maximizing the box-cox log-likelihood over the grid
/// [-2, 2] in steps of 0.01, then transforms.
std::pair<std::vector<double>, double> boxcox(const std::vector<double>& series);

/// Centered moving average; edge windows are truncated.
std::vector<double> window_smooth(const std::vector<double>& series, int window);

/// Keeps only phase == Stable rows, preserving order.
std::vector<ExcavationRecord> filter_operating_segments(const std::vector<ExcavationRecord>& records);

// --- fusion -------------------------------------------------------------------

/// Joins each excavation timestep with its ring's geology; categorical fields
/// are embedded, the target is the next timestep's propulsion speed within the
/// same ring. With drop_ring_tail the last row of each ring (which has no next
/// target) is dropped; otherwise it is kept with its own speed as target.
std::vector<FusedSample> merge_geology_excavation(const std::vector<GeologyRecord>& geology,
                                                  const std::vector<ExcavationRecord>& excavation,
                                                  const TextEmbedding& embedding,
                                                  bool drop_ring_tail = true);

/// Fused feature column names for a given embedding dimension, in order.
std::vector<std::string> fused_feature_names(std::size_t embedding_dim);
/// Group tag per fused column: "excavation", "geology" or "embedding".
std::vector<std::string> fused_feature_groups(std::size_t embedding_dim);

// --- splitting ------------------------------------------------------------------

struct DatasetSplit {
  std::vector<FusedSample> train;
  std::vector<FusedSample> valid;
  std::vector<FusedSample> test;
};

struct SplitSizes {
  std::size_t train = 0, valid = 0, test = 0;
};

/// 7:2:1 sizes by floor, remainder to train.
SplitSizes split_sizes(std::size_t n);

/// Chronological split, no shuffling: first 70% train, next 20% valid, last
/// 10% test. The seed parameter is accepted for interface stability but the
/// split is deterministic by construction.
DatasetSplit split_dataset(const std::vector<FusedSample>& samples, std::uint64_t seed = 0);

}  // namespace tbm
