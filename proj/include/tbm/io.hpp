#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tbm/nn.hpp"
#include "tbm/preprocess.hpp"
#include "tbm/synth.hpp"

namespace tbm {

// Deterministic double formatting: shortest representation that parses back
// to the same bits.
std::string format_double(double value);

// --- geology / excavation CSV --------------------------------------------------
// Geology header columns follow the survey feature names in snake_case; the
// integrity_factor column holds "a to b" range text.

void write_geology_csv(const std::string& path, const std::vector<GeologyRecord>& records);
std::vector<GeologyRecord> read_geology_csv(const std::string& path);

void write_excavation_csv(const std::string& path, const std::vector<ExcavationRecord>& records);
std::vector<ExcavationRecord> read_excavation_csv(const std::string& path);

// --- fused dataset ---------------------------------------------------------------

void write_fused_csv(const std::string& path, const std::vector<FusedSample>& samples);
std::vector<FusedSample> read_fused_csv(const std::string& path);

// --- preprocessing manifest --------------------------------------------------------

struct ColumnStats {
  std::string name;
  std::string group;  // excavation | geology | embedding
  // z-score (rate task)
  double mean = 0.0, stddev = 1.0;
  // min-max (anomaly task)
  double min = 0.0, max = 1.0;
  bool constant = false;
  bool boxcox_applied = false;
  double boxcox_lambda = 1.0;
};

struct Manifest {
  int format_version = 1;
  std::string task;  // "rate" | "anomaly"
  std::size_t embedding_dim = 0;
  std::uint64_t seed = 0;
  int despike_window = 11;
  double despike_k = 5.0;
  int smooth_window = 5;       // anomaly task only
  std::size_t fit_rows = 0;    // leading rows the statistics were fitted on
  std::vector<ColumnStats> columns;   // feature columns, in order
  ColumnStats target;                 // target column statistics (rate task)
  TextEmbedding embedding;            // frozen token vectors for exact replay
  std::string geology_csv;            // source paths, informational
  std::string excavation_csv;
};

void write_manifest(const std::string& path, const Manifest& manifest);
Manifest read_manifest(const std::string& path);

/// FNV-1a over the file bytes, hex encoded. Used to tie checkpoints to the
/// exact preprocessing manifest they were trained against.
std::string hash_file(const std::string& path);

// --- model checkpoints ----------------------------------------------------------

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

struct Checkpoint {
  int format_version = 1;
  std::string model_kind;  // "rate" | "anomaly"
  std::string config_json;  // command-specific configuration, serialized
  std::size_t input_dim = 0;
  std::string manifest_hash;
  double threshold = 0.0;  // anomaly task: calibrated score cutoff
  std::vector<NamedTensor> params;
};

void write_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::string& path);

// --- fault labels ------------------------------------------------------------------

struct FaultLabels {
  std::vector<int> fault_windows;
  std::vector<FaultSpec> faults;
  int window_len = 0;
};

void write_labels_json(const std::string& path, const FaultLabels& labels);
FaultLabels read_labels_json(const std::string& path);

}  // namespace tbm
