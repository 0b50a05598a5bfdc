#include "tbm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <unordered_map>

#include "tbm/errors.hpp"

namespace tbm {

namespace {

double uniform_in(std::mt19937_64& rng, const std::pair<double, double>& range) {
  std::uniform_real_distribution<double> dist(range.first, range.second);
  return dist(rng);
}

double stable_speed(double ucs, double standard_penetration) {
  return 3.5 * std::exp(-ucs / 30.0) + standard_penetration / 50.0;
}

// Derived channels are smooth functions of (speed, ucs) and the within-ring
// jack stroke, each read through its own sensor with relative noise kappa.
void fill_derived_channels(ExcavationRecord& row, double ucs, double stroke, double kappa,
                           std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  auto sensor = [&](double value) { return kappa > 0.0 ? value * (1.0 + kappa * unit(rng)) : value; };
  const double speed = row.propulsion_speed;
  row.cutter_speed = sensor(1.2 + 0.10 * speed);
  row.cutter_torque = sensor(800.0 + 45.0 * ucs + 120.0 * speed);
  row.cutter_power = sensor(0.1047 * row.cutter_speed * row.cutter_torque);
  row.total_propulsion = sensor(18000.0 + 380.0 * ucs + 600.0 * speed);
  row.displacement = sensor(stroke);
  row.propulsion_pressure = sensor(row.total_propulsion / 620.0);
  row.propulsion_thrust = sensor(0.23 * row.total_propulsion);
}

}  // namespace

std::vector<GeologyRegime> default_regimes() {
  return {
      {"soft_clay", {5.0, 15.0}, {1e-6, 1e-4}, {5.0, 15.0}, "Soft plastic", "Loose", 5},
      {"stiff_clay", {20.0, 35.0}, {1e-8, 1e-6}, {15.0, 30.0}, "Hard plastic", "Medium dense", 4},
      {"weathered_rock", {40.0, 60.0}, {1e-9, 1e-7}, {30.0, 50.0}, "Non plastic", "Dense", 3},
  };
}

std::vector<GeologyRegime> scaled_regimes(std::vector<GeologyRegime> regimes, double spread) {
  if (spread < 0.0 || spread > 1.0) throw Error("scaled_regimes: spread outside [0, 1]");
  if (regimes.empty()) return regimes;
  auto center_of = [&](std::pair<double, double> GeologyRegime::*range) {
    double total = 0.0;
    for (const GeologyRegime& r : regimes) total += 0.5 * ((r.*range).first + (r.*range).second);
    return total / static_cast<double>(regimes.size());
  };
  auto pull = [&](std::pair<double, double> GeologyRegime::*range) {
    const double center = center_of(range);
    for (GeologyRegime& r : regimes) {
      (r.*range).first = center + spread * ((r.*range).first - center);
      (r.*range).second = center + spread * ((r.*range).second - center);
    }
  };
  pull(&GeologyRegime::ucs_range);
  pull(&GeologyRegime::permeability_range);
  pull(&GeologyRegime::penetration_range);
  return regimes;
}

std::string fault_kind_name(FaultKind kind) {
  switch (kind) {
    case FaultKind::Spike: return "Spike";
    case FaultKind::Drift: return "Drift";
    case FaultKind::StuckSensor: return "StuckSensor";
    case FaultKind::Dropout: return "Dropout";
  }
  return "Drift";
}

FaultKind parse_fault_kind(const std::string& name) {
  if (name == "Spike") return FaultKind::Spike;
  if (name == "Drift") return FaultKind::Drift;
  if (name == "StuckSensor") return FaultKind::StuckSensor;
  if (name == "Dropout") return FaultKind::Dropout;
  throw Error("unknown fault kind '" + name + "'");
}

std::vector<GeologyRecord> gen_geology(int rings, const std::vector<GeologyRegime>& regimes,
                                       double change_prob, std::uint64_t seed) {
  if (regimes.empty()) throw NoRegimes();
  if (change_prob < 0.0 || change_prob > 1.0)
    throw Error("gen_geology: change_prob outside [0, 1]");
  if (rings < 1) throw Error("gen_geology: rings must be positive");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<GeologyRecord> out;
  out.reserve(static_cast<std::size_t>(rings));
  std::size_t regime = 0;
  for (int ring = 1; ring <= rings; ++ring) {
    const GeologyRegime& r = regimes[regime];
    GeologyRecord g;
    g.ring = ring;
    g.plasticity = r.plasticity;
    g.density = r.density;
    g.rock_level = r.rock_level;
    g.layer_number = static_cast<int>(regime) + 1;
    g.ucs = uniform_in(rng, r.ucs_range);
    g.permeability = uniform_in(rng, r.permeability_range);
    g.standard_penetration = uniform_in(rng, r.penetration_range);
    g.accounting = uniform_in(rng, {0.0, 0.3});
    g.integrity_low = uniform_in(rng, {0.2, 0.5});
    g.integrity_high = g.integrity_low + uniform_in(rng, {0.05, 0.3});
    out.push_back(std::move(g));

    if (regimes.size() > 1 && unit(rng) < change_prob) {
      std::uniform_int_distribution<std::size_t> other(0, regimes.size() - 2);
      std::size_t next = other(rng);
      if (next >= regime) ++next;
      regime = next;
    }
  }
  return out;
}

std::vector<ExcavationRecord> gen_excavation(const std::vector<GeologyRecord>& geology,
                                             int rows_per_ring, double noise_sigma,
                                             std::uint64_t seed) {
  if (geology.empty()) throw EmptyGeology();
  if (rows_per_ring < 2) throw Error("gen_excavation: rows_per_ring must be at least 2");
  if (noise_sigma < 0.0) throw Error("gen_excavation: noise_sigma must be non-negative");

  constexpr double kArCoefficient = 0.8;
  constexpr long kSecondsPerRow = 5;
  constexpr double kStrokePerSpeedUnit = 12.5;  // mm of jack stroke per row per mm/min
  const double kappa = 0.15 * noise_sigma;      // relative sensor noise on derived channels

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> innovation(0.0, 1.0);
  std::vector<ExcavationRecord> out;
  out.reserve(geology.size() * static_cast<std::size_t>(rows_per_ring));

  const int rising_rows = std::max(1, (rows_per_ring + 9) / 10);  // first 10%, rounded up
  double noise = 0.0;
  long timestamp = 0;
  for (const GeologyRecord& geo : geology) {
    const double base = stable_speed(geo.ucs, geo.standard_penetration);
    double stroke = 0.0;  // jack stroke resets when a new ring starts
    for (int row_idx = 0; row_idx < rows_per_ring; ++row_idx) {
      noise = kArCoefficient * noise +
              (noise_sigma > 0.0 ? noise_sigma * innovation(rng) : 0.0);
      ExcavationRecord row;
      timestamp += kSecondsPerRow;
      row.timestamp = timestamp;
      row.ring = geo.ring;
      if (row_idx < rising_rows) {
        row.phase = Phase::Rising;
        const double ramp = static_cast<double>(row_idx + 1) / static_cast<double>(rising_rows + 1);
        row.propulsion_speed = std::max(0.0, base * ramp + noise);
      } else {
        row.phase = Phase::Stable;
        row.propulsion_speed = std::max(0.0, base + noise);
      }
      stroke += row.propulsion_speed * kStrokePerSpeedUnit;
      fill_derived_channels(row, geo.ucs, stroke, kappa, rng);
      out.push_back(row);
    }
  }
  return out;
}

InjectionResult inject_faults(std::vector<ExcavationRecord> records,
                              const std::vector<FaultSpec>& faults, int window_len,
                              std::uint64_t seed) {
  if (window_len < 1) throw Error("inject_faults: window_len must be positive");
  std::vector<std::size_t> stable_rows;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].phase == Phase::Stable) stable_rows.push_back(i);
  const int available = static_cast<int>(stable_rows.size()) / window_len;

  // Channel spread measured before any injection.
  std::unordered_map<std::string, double> channel_std;
  for (const std::string& name : excavation_channel_names()) {
    double mean = 0.0;
    for (std::size_t i : stable_rows) mean += excavation_channel(records[i], name);
    mean /= std::max<double>(1.0, static_cast<double>(stable_rows.size()));
    double ss = 0.0;
    for (std::size_t i : stable_rows) {
      const double d = excavation_channel(records[i], name) - mean;
      ss += d * d;
    }
    channel_std[name] =
        std::sqrt(ss / std::max<double>(1.0, static_cast<double>(stable_rows.size() - 1)));
  }

  std::mt19937_64 rng(seed);
  std::set<int> labels;
  for (const FaultSpec& fault : faults) {
    if (fault.duration < 1) throw Error("inject_faults: duration must be at least 1");
    if (fault.start_window < 0 || fault.start_window + fault.duration > available)
      throw FaultOutOfBounds("inject_faults: windows [" + std::to_string(fault.start_window) +
                             ", " + std::to_string(fault.start_window + fault.duration) +
                             ") exceed " + std::to_string(available) + " available");
    const double sigma = std::max(channel_std.at(fault.channel), 1e-9);
    const std::size_t span_begin =
        static_cast<std::size_t>(fault.start_window) * static_cast<std::size_t>(window_len);
    const std::size_t span_len =
        static_cast<std::size_t>(fault.duration) * static_cast<std::size_t>(window_len);

    switch (fault.kind) {
      case FaultKind::Spike: {
        std::uniform_int_distribution<int> pos(window_len / 4, (3 * window_len) / 4);
        for (int w = 0; w < fault.duration; ++w) {
          const std::size_t row =
              stable_rows[span_begin + static_cast<std::size_t>(w * window_len + pos(rng))];
          set_excavation_channel(records[row], fault.channel,
                                 excavation_channel(records[row], fault.channel) +
                                     fault.magnitude * sigma);
        }
        break;
      }
      case FaultKind::Drift: {
        // Linear ramp; physical channels cannot go negative.
        for (std::size_t i = 0; i < span_len; ++i) {
          const std::size_t row = stable_rows[span_begin + i];
          const double ramp = static_cast<double>(i + 1) / static_cast<double>(span_len);
          set_excavation_channel(records[row], fault.channel,
                                 std::max(0.0, excavation_channel(records[row], fault.channel) +
                                                   fault.magnitude * sigma * ramp));
        }
        break;
      }
      case FaultKind::StuckSensor: {
        const double frozen = excavation_channel(records[stable_rows[span_begin]], fault.channel);
        for (std::size_t i = 1; i < span_len; ++i)
          set_excavation_channel(records[stable_rows[span_begin + i]], fault.channel, frozen);
        break;
      }
      case FaultKind::Dropout: {
        for (std::size_t i = 0; i < span_len; ++i)
          set_excavation_channel(records[stable_rows[span_begin + i]], fault.channel, 0.0);
        break;
      }
    }
    for (int w = fault.start_window; w < fault.start_window + fault.duration; ++w)
      labels.insert(w);
  }
  return {std::move(records), std::vector<int>(labels.begin(), labels.end())};
}

std::vector<FaultSpec> plan_faults(int available_windows, int fault_window_count,
                                   std::uint64_t seed) {
  if (fault_window_count <= 0) return {};
  if (fault_window_count * 2 >= available_windows)
    throw FaultOutOfBounds("plan_faults: cannot place " + std::to_string(fault_window_count) +
                           " fault windows with gaps in " + std::to_string(available_windows));
  // Correlated channel groups a real drive-train or thrust fault would hit.
  static const std::vector<std::vector<std::string>> channel_groups = {
      {"cutter_torque", "cutter_power", "cutter_speed", "propulsion_thrust"},
      {"total_propulsion", "propulsion_pressure", "propulsion_thrust", "propulsion_speed"},
      {"propulsion_speed", "displacement", "total_propulsion", "propulsion_pressure"},
      {"cutter_power", "cutter_torque", "total_propulsion", "propulsion_thrust"},
  };

  // Single-window events: the ramp reaches full depth inside its window, so
  // every labeled window carries a detectable deviation (a multi-window span
  // would label its shallow ramp onset as anomalous too).
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pick_magnitude(-12.0, -7.0);
  std::uniform_int_distribution<int> pick_start(0, available_windows - 1);

  std::vector<char> used(static_cast<std::size_t>(available_windows), 0);
  std::vector<FaultSpec> plan;
  int remaining = fault_window_count;
  std::size_t event = 0;
  int attempts = 0;
  while (remaining > 0) {
    if (++attempts > 100000)
      throw Error("plan_faults: failed to place fault spans; series too crowded");
    const int duration = 1;
    const int start = pick_start(rng);
    if (start + duration > available_windows) continue;
    bool free = true;
    for (int w = start - 1; w <= start + duration && free; ++w)
      if (w >= 0 && w < available_windows && used[static_cast<std::size_t>(w)]) free = false;
    if (!free) continue;
    for (int w = start; w < start + duration; ++w) used[static_cast<std::size_t>(w)] = 1;

    const auto& group = channel_groups[event % channel_groups.size()];
    const FaultKind kind = FaultKind::Drift;
    const double magnitude = pick_magnitude(rng);
    for (const std::string& channel : group) {
      FaultSpec f;
      f.kind = kind;
      f.channel = channel;
      f.start_window = start;
      f.duration = duration;
      f.magnitude = magnitude;
      plan.push_back(std::move(f));
    }
    remaining -= duration;
    ++event;
  }
  return plan;
}

}  // namespace tbm
