#include "tbm/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "tbm/errors.hpp"

namespace tbm {

using json = nlohmann::ordered_json;

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.15g", value);
  if (std::strtod(buf, nullptr) != value) std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

class CsvReader {
 public:
  CsvReader(const std::string& path, const std::vector<std::string>& required_columns)
      : path_(path), in_(open_in(path)) {
    std::string header;
    if (!std::getline(in_, header)) throw SchemaMismatch("missing header in " + path);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    const auto names = split_csv_line(header);
    for (std::size_t i = 0; i < names.size(); ++i) index_[names[i]] = i;
    for (const auto& col : required_columns)
      if (!index_.count(col)) throw SchemaMismatch(col);
  }

  bool next_row() {
    std::string line;
    while (std::getline(in_, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      row_ = split_csv_line(line);
      ++line_number_;
      return true;
    }
    return false;
  }

  const std::string& text(const std::string& column) const {
    const std::size_t i = index_.at(column);
    if (i >= row_.size()) throw SchemaMismatch(column);
    return row_[i];
  }

  double number(const std::string& column) const {
    const std::string& t = text(column);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end == t.c_str()) throw SchemaMismatch(column);
    return v;
  }

  long integer(const std::string& column) const { return static_cast<long>(number(column)); }

 private:
  std::string path_;
  std::ifstream in_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> row_;
  std::size_t line_number_ = 0;
};

const std::vector<std::string> kGeologyColumns = {
    "ring",          "plasticity",       "density",
    "unconfined_compressive_strength",   "permeability_coefficient",
    "surrounding_rock_level",            "layer_number",
    "accounting",    "integrity_factor", "standard_penetration"};

const std::vector<std::string> kExcavationColumns = {
    "timestamp",        "ring",          "propulsion_speed",    "cutter_speed",
    "cutter_torque",    "total_propulsion", "cutter_power",     "displacement",
    "propulsion_pressure", "propulsion_thrust", "phase"};

}  // namespace

void write_geology_csv(const std::string& path, const std::vector<GeologyRecord>& records) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < kGeologyColumns.size(); ++i)
    out << (i ? "," : "") << kGeologyColumns[i];
  out << "\n";
  for (const GeologyRecord& g : records) {
    out << g.ring << ',' << g.plasticity << ',' << g.density << ',' << format_double(g.ucs) << ','
        << format_double(g.permeability) << ',' << g.rock_level << ',' << g.layer_number << ','
        << format_double(g.accounting) << ',' << format_double(g.integrity_low) << " to "
        << format_double(g.integrity_high) << ',' << format_double(g.standard_penetration)
        << "\n";
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<GeologyRecord> read_geology_csv(const std::string& path) {
  CsvReader reader(path, kGeologyColumns);
  std::vector<GeologyRecord> records;
  while (reader.next_row()) {
    GeologyRecord g;
    g.ring = static_cast<int>(reader.integer("ring"));
    g.plasticity = reader.text("plasticity");
    g.density = reader.text("density");
    g.ucs = reader.number("unconfined_compressive_strength");
    g.permeability = reader.number("permeability_coefficient");
    g.rock_level = static_cast<int>(reader.integer("surrounding_rock_level"));
    g.layer_number = static_cast<int>(reader.integer("layer_number"));
    g.accounting = reader.number("accounting");
    const std::string& integrity = reader.text("integrity_factor");
    const std::size_t sep = integrity.find(" to ");
    char* end = nullptr;
    if (sep == std::string::npos) {
      g.integrity_low = g.integrity_high = std::strtod(integrity.c_str(), &end);
      if (end == integrity.c_str()) throw SchemaMismatch("integrity_factor");
    } else {
      g.integrity_low = std::strtod(integrity.substr(0, sep).c_str(), &end);
      g.integrity_high = std::strtod(integrity.substr(sep + 4).c_str(), &end);
    }
    g.standard_penetration = reader.number("standard_penetration");
    records.push_back(std::move(g));
  }
  return records;
}

void write_excavation_csv(const std::string& path, const std::vector<ExcavationRecord>& records) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < kExcavationColumns.size(); ++i)
    out << (i ? "," : "") << kExcavationColumns[i];
  out << "\n";
  for (const ExcavationRecord& r : records) {
    out << r.timestamp << ',' << r.ring;
    for (const std::string& name : excavation_channel_names())
      out << ',' << format_double(excavation_channel(r, name));
    out << ',' << phase_name(r.phase) << "\n";
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<ExcavationRecord> read_excavation_csv(const std::string& path) {
  CsvReader reader(path, kExcavationColumns);
  std::vector<ExcavationRecord> records;
  while (reader.next_row()) {
    ExcavationRecord r;
    r.timestamp = reader.integer("timestamp");
    r.ring = static_cast<int>(reader.integer("ring"));
    for (const std::string& name : excavation_channel_names())
      set_excavation_channel(r, name, reader.number(name));
    r.phase = parse_phase(reader.text("phase"));
    records.push_back(r);
  }
  return records;
}

void write_fused_csv(const std::string& path, const std::vector<FusedSample>& samples) {
  auto out = open_out(path);
  const std::size_t width = samples.empty() ? 0 : samples.front().features.size();
  out << "ring,target";
  for (std::size_t i = 0; i < width; ++i) out << ",f" << i;
  out << "\n";
  for (const FusedSample& s : samples) {
    out << s.ring << ',' << format_double(s.target);
    for (double v : s.features) out << ',' << format_double(v);
    out << "\n";
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<FusedSample> read_fused_csv(const std::string& path) {
  auto in = open_in(path);
  std::string header;
  if (!std::getline(in, header)) throw SchemaMismatch("missing header in " + path);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const auto names = split_csv_line(header);
  if (names.size() < 2 || names[0] != "ring" || names[1] != "target")
    throw SchemaMismatch("ring/target");
  const std::size_t width = names.size() - 2;

  std::vector<FusedSample> samples;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != names.size()) throw SchemaMismatch("fused row width");
    FusedSample s;
    s.ring = std::atoi(fields[0].c_str());
    s.target = std::strtod(fields[1].c_str(), nullptr);
    s.features.reserve(width);
    for (std::size_t i = 0; i < width; ++i)
      s.features.push_back(std::strtod(fields[2 + i].c_str(), nullptr));
    samples.push_back(std::move(s));
  }
  return samples;
}

namespace {

json column_to_json(const ColumnStats& c) {
  json j;
  j["name"] = c.name;
  j["group"] = c.group;
  j["mean"] = c.mean;
  j["stddev"] = c.stddev;
  j["min"] = c.min;
  j["max"] = c.max;
  j["constant"] = c.constant;
  j["boxcox_applied"] = c.boxcox_applied;
  j["boxcox_lambda"] = c.boxcox_lambda;
  return j;
}

ColumnStats column_from_json(const json& j) {
  ColumnStats c;
  c.name = j.at("name").get<std::string>();
  c.group = j.at("group").get<std::string>();
  c.mean = j.at("mean").get<double>();
  c.stddev = j.at("stddev").get<double>();
  c.min = j.at("min").get<double>();
  c.max = j.at("max").get<double>();
  c.constant = j.at("constant").get<bool>();
  c.boxcox_applied = j.at("boxcox_applied").get<bool>();
  c.boxcox_lambda = j.at("boxcox_lambda").get<double>();
  return c;
}

}  // namespace

void write_manifest(const std::string& path, const Manifest& m) {
  json j;
  j["format_version"] = m.format_version;
  j["task"] = m.task;
  j["embedding_dim"] = m.embedding_dim;
  j["seed"] = m.seed;
  j["despike_window"] = m.despike_window;
  j["despike_k"] = m.despike_k;
  j["smooth_window"] = m.smooth_window;
  j["fit_rows"] = m.fit_rows;
  j["columns"] = json::array();
  for (const ColumnStats& c : m.columns) j["columns"].push_back(column_to_json(c));
  j["target"] = column_to_json(m.target);
  j["embedding"] = {{"dim", m.embedding.dim},
                    {"tokens", m.embedding.tokens},
                    {"vectors", m.embedding.vectors}};
  j["sources"] = {{"geology_csv", m.geology_csv}, {"excavation_csv", m.excavation_csv}};
  auto out = open_out(path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing '" + path + "'");
}

Manifest read_manifest(const std::string& path) {
  auto in = open_in(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SchemaMismatch(std::string("manifest: ") + e.what());
  }
  Manifest m;
  try {
    m.format_version = j.at("format_version").get<int>();
    m.task = j.at("task").get<std::string>();
    m.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.despike_window = j.at("despike_window").get<int>();
    m.despike_k = j.at("despike_k").get<double>();
    m.smooth_window = j.at("smooth_window").get<int>();
    m.fit_rows = j.at("fit_rows").get<std::size_t>();
    for (const json& c : j.at("columns")) m.columns.push_back(column_from_json(c));
    m.target = column_from_json(j.at("target"));
    m.embedding.dim = j.at("embedding").at("dim").get<std::size_t>();
    m.embedding.tokens = j.at("embedding").at("tokens").get<std::vector<std::string>>();
    m.embedding.vectors = j.at("embedding").at("vectors").get<std::vector<double>>();
    for (std::size_t i = 0; i < m.embedding.tokens.size(); ++i)
      m.embedding.vocab[m.embedding.tokens[i]] = i;
    m.geology_csv = j.at("sources").at("geology_csv").get<std::string>();
    m.excavation_csv = j.at("sources").at("excavation_csv").get<std::string>();
  } catch (const json::exception& e) {
    throw SchemaMismatch(std::string("manifest: ") + e.what());
  }
  return m;
}

std::string hash_file(const std::string& path) {
  auto in = open_in(path);
  std::uint64_t hash = 14695981039346656037ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 1099511628211ull;
    }
    if (!in) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
  return hex;
}

void write_checkpoint(const std::string& path, const Checkpoint& c) {
  json j;
  j["format_version"] = c.format_version;
  j["model_kind"] = c.model_kind;
  j["config"] = json::parse(c.config_json.empty() ? "{}" : c.config_json);
  j["input_dim"] = c.input_dim;
  j["manifest_hash"] = c.manifest_hash;
  j["threshold"] = c.threshold;
  j["params"] = json::array();
  for (const NamedTensor& p : c.params)
    j["params"].push_back({{"name", p.name}, {"shape", p.shape}, {"data", p.data}});
  auto out = open_out(path);
  out << j.dump() << "\n";
  if (!out) throw IoError("failed writing '" + path + "'");
}

Checkpoint read_checkpoint(const std::string& path) {
  auto in = open_in(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SchemaMismatch(std::string("checkpoint: ") + e.what());
  }
  Checkpoint c;
  try {
    c.format_version = j.at("format_version").get<int>();
    c.model_kind = j.at("model_kind").get<std::string>();
    c.config_json = j.at("config").dump();
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.manifest_hash = j.at("manifest_hash").get<std::string>();
    c.threshold = j.value("threshold", 0.0);
    for (const json& p : j.at("params")) {
      NamedTensor t;
      t.name = p.at("name").get<std::string>();
      t.shape = p.at("shape").get<Shape>();
      t.data = p.at("data").get<std::vector<double>>();
      if (shape_size(t.shape) != t.data.size()) throw SchemaMismatch("checkpoint param " + t.name);
      c.params.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw SchemaMismatch(std::string("checkpoint: ") + e.what());
  }
  return c;
}

void write_labels_json(const std::string& path, const FaultLabels& labels) {
  json j;
  j["fault_windows"] = labels.fault_windows;
  j["faults"] = json::array();
  for (const FaultSpec& f : labels.faults)
    j["faults"].push_back({{"kind", fault_kind_name(f.kind)},
                           {"channel", f.channel},
                           {"start_window", f.start_window},
                           {"duration", f.duration},
                           {"magnitude", f.magnitude}});
  j["window_len"] = labels.window_len;
  auto out = open_out(path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing '" + path + "'");
}

FaultLabels read_labels_json(const std::string& path) {
  auto in = open_in(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SchemaMismatch(std::string("labels: ") + e.what());
  }
  FaultLabels labels;
  try {
    labels.fault_windows = j.at("fault_windows").get<std::vector<int>>();
    for (const json& f : j.at("faults")) {
      FaultSpec spec;
      spec.kind = parse_fault_kind(f.at("kind").get<std::string>());
      spec.channel = f.at("channel").get<std::string>();
      spec.start_window = f.at("start_window").get<int>();
      spec.duration = f.at("duration").get<int>();
      spec.magnitude = f.at("magnitude").get<double>();
      labels.faults.push_back(std::move(spec));
    }
    labels.window_len = j.value("window_len", 0);
  } catch (const json::exception& e) {
    throw SchemaMismatch(std::string("labels: ") + e.what());
  }
  return labels;
}

}  // namespace tbm
