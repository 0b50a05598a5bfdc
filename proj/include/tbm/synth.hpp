#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tbm/preprocess.hpp"

namespace tbm {

/// Generative regime for a stretch of rings. Numeric fields are drawn
/// uniformly within the ranges; categorical fields are copied.
struct GeologyRegime {
  std::string name;
  std::pair<double, double> ucs_range;
  std::pair<double, double> permeability_range;
  std::pair<double, double> penetration_range;
  std::string plasticity;
  std::string density;
  int rock_level = 0;
};

/// Three regimes spanning soft clay to weathered rock.
std::vector<GeologyRegime> default_regimes();

/// Pulls the numeric ranges of every regime toward their common center by
/// `spread` (1 keeps them as-is, 0 collapses all regimes onto one point).
/// Milder spreads model a geologically uniform tunnel section.
std::vector<GeologyRegime> scaled_regimes(std::vector<GeologyRegime> regimes, double spread);

enum class FaultKind { Spike, Drift, StuckSensor, Dropout };
std::string fault_kind_name(FaultKind kind);
FaultKind parse_fault_kind(const std::string& name);

struct FaultSpec {
  FaultKind kind = FaultKind::Drift;
  std::string channel;      // one of excavation_channel_names()
  int start_window = 0;     // in detector windows over Stable rows
  int duration = 1;         // windows
  double magnitude = 4.0;   // in units of the channel's standard deviation
};

/// Markov chain over regimes, one state per ring; rings are numbered 1..n.
std::vector<GeologyRecord> gen_geology(int rings, const std::vector<GeologyRegime>& regimes,
                                       double change_prob, std::uint64_t seed);

/// Telemetry driven by the per-ring geology. Stable-phase propulsion speed is
///   speed = 3.5 * exp(-ucs / 30) + standard_penetration / 50 + AR(1) noise
/// with AR coefficient 0.8 and innovation sigma `noise_sigma`. The remaining
/// channels are fixed smooth functions of (speed, ucs):
///   cutter_speed        = 1.2 + 0.10 * speed           (rpm)
///   cutter_torque       = 800 + 45 * ucs + 120 * speed (kN*m)
///   cutter_power        = 0.1047 * cutter_speed * cutter_torque (kW)
///   total_propulsion    = 18000 + 380 * ucs + 600 * speed (kN)
///   displacement        = 150 * speed                  (mm)
///   propulsion_pressure = total_propulsion / 620       (bar)
///   propulsion_thrust   = 0.23 * total_propulsion      (kN)
/// The first 10% of each ring's rows ramp up and are tagged Rising; the rest
/// are Stable.
std::vector<ExcavationRecord> gen_excavation(const std::vector<GeologyRecord>& geology,
                                             int rows_per_ring, double noise_sigma,
                                             std::uint64_t seed);

struct InjectionResult {
  std::vector<ExcavationRecord> records;
  std::vector<int> fault_windows;  // sorted, deduplicated
};

/// Applies faults to the Stable rows, window-indexed with `window_len` rows
/// per window. Spike perturbs one row per covered window; Drift adds a linear
/// ramp up to magnitude * channel_std; StuckSensor freezes the channel at its
/// value entering the span; Dropout zeroes it. Channel standard deviations are
/// measured over the Stable rows before any injection.
InjectionResult inject_faults(std::vector<ExcavationRecord> records,
                              const std::vector<FaultSpec>& faults, int window_len,
                              std::uint64_t seed);

/// Random non-adjacent fault spans totalling exactly `fault_window_count`
/// windows, each span a downward drift (loss of torque, thrust or power) on a
/// correlated channel group. Downward drifts are the fault mode the BCE
/// reconstruction score responds to most strongly: they stretch the fitted
/// normalization range so the normal operating band sits high in [0,1] where
/// the score slope is steep. Single-point spikes are removed by the despiking
/// stage, and stuck/dropout faults can lower the per-element cross entropy
/// below the normal floor; those kinds remain available through explicit
/// FaultSpec lists.
std::vector<FaultSpec> plan_faults(int available_windows, int fault_window_count,
                                   std::uint64_t seed);

}  // namespace tbm
