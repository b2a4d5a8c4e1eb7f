#include "railevent/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

namespace railevent::io {

using nlohmann::json;
namespace fs = std::filesystem;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

namespace {

double parse_double(std::string_view cell, std::string_view origin, std::size_t line, std::string_view column) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
    throw FormatError(fmt::format("{}: line {}: column '{}' is not a finite number: '{}'", origin, line, column, cell));
  }
  return v;
}

std::vector<std::string_view> split_row(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) out.push_back(line);
    start = end + 1;
  }
  return out;
}

const std::string& feature_header() {
  static const std::string header = [] {
    std::string h = "frame,vel_pp,vel_rms,acc_pp,acc_rms";
    for (std::size_t k = 0; k < kOctaveBands; ++k) h += fmt::format(",oct{}", k);
    return h + ",speed_mps";
  }();
  return header;
}

}  // namespace

std::string waveform_csv(const Waveform& w) {
  std::string out = "time_s,acc_mps2\n";
  out.reserve(w.samples.size() * 32);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const double t = w.start_time_s + static_cast<double>(i) / w.sample_rate_hz;
    out += fmt::format("{},{}\n", t, w.samples[i]);
  }
  return out;
}

void write_waveform_csv(const fs::path& path, const Waveform& w) { write_text(path, waveform_csv(w)); }

Waveform read_waveform_csv(const fs::path& path, std::string channel_id, double sample_rate_hz) {
  if (!(sample_rate_hz > 0.0)) throw FormatError(fmt::format("{}: sample rate must be positive", path.string()));
  const std::string text = read_text(path);
  const auto lines = lines_of(text);
  const std::string origin = path.string();
  if (lines.empty() || lines[0] != "time_s,acc_mps2") {
    throw FormatError(fmt::format("{}: expected header 'time_s,acc_mps2'", origin));
  }
  Waveform w;
  w.channel_id = std::move(channel_id);
  w.sample_rate_hz = sample_rate_hz;
  const double step = 1.0 / sample_rate_hz;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split_row(lines[i]);
    if (cells.size() != 2) throw FormatError(fmt::format("{}: line {}: expected 2 columns", origin, i + 1));
    const double t = parse_double(cells[0], origin, i + 1, "time_s");
    const double a = parse_double(cells[1], origin, i + 1, "acc_mps2");
    if (i == 1) {
      w.start_time_s = t;
    } else {
      const double expected = w.start_time_s + static_cast<double>(i - 1) * step;
      if (std::abs(t - expected) > 1e-6 * std::max(1.0, std::abs(expected))) {
        throw FormatError(fmt::format("{}: line {}: time_s not on the {} Hz grid", origin, i + 1, sample_rate_hz));
      }
    }
    w.samples.push_back(a);
  }
  if (w.samples.empty()) throw FormatError(fmt::format("{}: no samples", origin));
  return w;
}

std::string features_csv(const std::vector<FeatureFrame>& frames) {
  std::string out = feature_header() + "\n";
  for (const FeatureFrame& f : frames) {
    out += fmt::format("{},{},{},{},{}", f.frame_index, f.vel_pp, f.vel_rms, f.acc_pp, f.acc_rms);
    for (double o : f.octave) out += fmt::format(",{}", o);
    out += fmt::format(",{}\n", f.speed_mps);
  }
  return out;
}

void write_features_csv(const fs::path& path, const std::vector<FeatureFrame>& frames) {
  write_text(path, features_csv(frames));
}

std::vector<FeatureFrame> read_features_csv(const fs::path& path) {
  const std::string text = read_text(path);
  const auto lines = lines_of(text);
  const std::string origin = path.string();
  if (lines.empty() || lines[0] != feature_header()) {
    throw FormatError(fmt::format("{}: expected header '{}'", origin, feature_header()));
  }
  const auto names = split_row(feature_header());
  std::vector<FeatureFrame> frames;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split_row(lines[i]);
    if (cells.size() != names.size()) {
      throw FormatError(fmt::format("{}: line {}: expected {} columns", origin, i + 1, names.size()));
    }
    std::vector<double> v;
    for (std::size_t c = 0; c < cells.size(); ++c) v.push_back(parse_double(cells[c], origin, i + 1, names[c]));
    std::array<double, kFeatureCount> q{};
    std::copy(v.begin() + 1, v.begin() + 1 + static_cast<std::ptrdiff_t>(kFeatureCount), q.begin());
    frames.push_back(FeatureFrame::from_quantities(q, v.back(), static_cast<int>(v[0])));
  }
  if (frames.empty()) throw FormatError(fmt::format("{}: no frames", origin));
  return frames;
}

namespace {

[[noreturn]] void bad_field(std::string_view origin, std::string_view where, std::string_view field,
                            std::string_view why) {
  throw FormatError(fmt::format("{}: {}field '{}' {}", origin, where, field, why));
}

const json& require(const json& j, std::string_view origin, std::string_view where, const char* field) {
  if (!j.is_object() || !j.contains(field)) bad_field(origin, where, field, "is missing");
  return j.at(field);
}

double number_field(const json& j, std::string_view origin, std::string_view where, const char* field) {
  const json& v = require(j, origin, where, field);
  if (!v.is_number()) bad_field(origin, where, field, "must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) bad_field(origin, where, field, "must be finite");
  return d;
}

std::uint64_t uint_field(const json& j, std::string_view origin, std::string_view where, const char* field) {
  const json& v = require(j, origin, where, field);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    bad_field(origin, where, field, "must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::string string_field(const json& j, std::string_view origin, std::string_view where, const char* field) {
  const json& v = require(j, origin, where, field);
  if (!v.is_string()) bad_field(origin, where, field, "must be a string");
  return v.get<std::string>();
}

bool bool_field(const json& j, std::string_view origin, std::string_view where, const char* field) {
  const json& v = require(j, origin, where, field);
  if (!v.is_boolean()) bad_field(origin, where, field, "must be a boolean");
  return v.get<bool>();
}

json parse_json(std::string_view text, std::string_view origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(fmt::format("{}: invalid JSON: {}", origin, e.what()));
  }
}

void check_format(const json& j, std::string_view origin, std::string_view format, int version) {
  if (string_field(j, origin, "", "format") != format) bad_field(origin, "", "format", fmt::format("must be '{}'", format));
  const std::uint64_t v = uint_field(j, origin, "", "version");
  if (v != static_cast<std::uint64_t>(version)) {
    throw FormatError(fmt::format("{}: unsupported {} version {} (expected {})", origin, format, v, version));
  }
}

}  // namespace

std::string manifest_json(const Manifest& m) {
  json records = json::array();
  for (const ManifestRecord& r : m.records) {
    records.push_back({{"path", r.path},
                       {"channel_id", r.channel_id},
                       {"sensor_profile", r.sensor_profile},
                       {"sample_rate_hz", r.sample_rate_hz},
                       {"label", std::string(to_string(r.label))},
                       {"speed_mps", r.speed_mps},
                       {"seed", r.seed},
                       {"confounder", std::string(to_string(r.confounder))},
                       {"recording_id", r.recording_id},
                       {"event_time_s", r.event_time_s}});
  }
  const json j = {{"format", "railevent-manifest"},
                  {"version", m.version},
                  {"dataset_seed", m.dataset_seed},
                  {"records", records}};
  return j.dump(2) + "\n";
}

Manifest parse_manifest(std::string_view text, std::string_view origin) {
  const json j = parse_json(text, origin);
  check_format(j, origin, "railevent-manifest", kManifestVersion);
  Manifest m;
  m.dataset_seed = uint_field(j, origin, "", "dataset_seed");
  const json& records = require(j, origin, "", "records");
  if (!records.is_array()) bad_field(origin, "", "records", "must be an array");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const json& r = records[i];
    const std::string where = fmt::format("record {}: ", i);
    ManifestRecord rec;
    rec.path = string_field(r, origin, where, "path");
    rec.channel_id = string_field(r, origin, where, "channel_id");
    rec.sensor_profile = string_field(r, origin, where, "sensor_profile");
    rec.sample_rate_hz = number_field(r, origin, where, "sample_rate_hz");
    if (!(rec.sample_rate_hz > 0.0)) bad_field(origin, where, "sample_rate_hz", "must be positive");
    const auto label = parse_material(string_field(r, origin, where, "label"));
    if (!label) bad_field(origin, where, "label", "is not one of none|steel|wood|stone|bone");
    rec.label = *label;
    rec.speed_mps = number_field(r, origin, where, "speed_mps");
    if (!(rec.speed_mps >= 0.0)) bad_field(origin, where, "speed_mps", "must be non-negative");
    rec.seed = uint_field(r, origin, where, "seed");
    const auto conf = parse_confounder(string_field(r, origin, where, "confounder"));
    if (!conf) bad_field(origin, where, "confounder", "is not one of none|switch|rail_joint");
    rec.confounder = *conf;
    rec.recording_id = uint_field(r, origin, where, "recording_id");
    rec.event_time_s = number_field(r, origin, where, "event_time_s");
    m.records.push_back(std::move(rec));
  }
  return m;
}

Manifest read_manifest(const fs::path& path) { return parse_manifest(read_text(path), path.string()); }

Manifest write_dataset(const fs::path& dir, const Dataset& ds) {
  Manifest m;
  m.dataset_seed = ds.seed;
  for (const DatasetEntry& e : ds.entries) {
    const LabeledRecording& rec = e.recording;
    ManifestRecord r;
    r.path = fmt::format("waveforms/rec{:04d}_{}.csv", e.recording_id, e.sensor_profile);
    r.channel_id = rec.waveform.channel_id;
    r.sensor_profile = e.sensor_profile;
    r.sample_rate_hz = rec.waveform.sample_rate_hz;
    r.label = rec.label;
    r.speed_mps = rec.speed_mps;
    r.seed = rec.provenance.seed;
    r.confounder = rec.label == MaterialClass::none ? rec.provenance.confounder : Confounder::none;
    r.recording_id = e.recording_id;
    r.event_time_s = rec.provenance.event_time_s;
    write_waveform_csv(dir / r.path, rec.waveform);
    m.records.push_back(std::move(r));
  }
  write_text(dir / "manifest.json", manifest_json(m));
  return m;
}

std::vector<LabeledSegment> load_segments(const Manifest& m, const fs::path& base_dir) {
  std::vector<LabeledSegment> out;
  out.reserve(m.records.size());
  for (const ManifestRecord& r : m.records) {
    LabeledRecording rec;
    rec.waveform = read_waveform_csv(base_dir / r.path, r.channel_id, r.sample_rate_hz);
    rec.label = r.label;
    rec.speed_mps = r.speed_mps;
    rec.sensor_id = r.sensor_profile;
    rec.provenance.seed = r.seed;
    out.push_back(featurize_recording(rec, r.recording_id));
  }
  return out;
}

std::string classical_model_json(const classical::ThresholdModel& m) {
  const json j = {{"format", "railevent-classical"},
                  {"version", classical::ThresholdModel::kFormatVersion},
                  {"thresholds", m.thresholds},
                  {"fp_weight", m.fp_weight},
                  {"normalize_by_speed", m.normalize_by_speed},
                  {"quantities", classical::kQuantityNames}};
  return j.dump(2) + "\n";
}

classical::ThresholdModel parse_classical_model(std::string_view text, std::string_view origin) {
  const json j = parse_json(text, origin);
  check_format(j, origin, "railevent-classical", classical::ThresholdModel::kFormatVersion);
  classical::ThresholdModel m;
  const json& t = require(j, origin, "", "thresholds");
  if (!t.is_array() || t.size() != classical::kQuantityCount) bad_field(origin, "", "thresholds", "must hold 5 numbers");
  for (std::size_t i = 0; i < classical::kQuantityCount; ++i) {
    if (!t[i].is_number()) bad_field(origin, "", "thresholds", "must hold 5 numbers");
    m.thresholds[i] = t[i].get<double>();
  }
  m.fp_weight = number_field(j, origin, "", "fp_weight");
  m.normalize_by_speed = bool_field(j, origin, "", "normalize_by_speed");
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(fmt::format("{}: {}", origin, e.what()));
  }
  return m;
}

void save_classical_model(const fs::path& path, const classical::ThresholdModel& m) {
  write_text(path, classical_model_json(m));
}

classical::ThresholdModel load_classical_model(const fs::path& path) {
  return parse_classical_model(read_text(path), path.string());
}

namespace {

struct Block {
  const char* name;
  std::size_t offset;
  std::size_t size;
  std::vector<std::size_t> shape;
};

std::vector<Block> blocks_of(const cnn::Architecture& a) {
  const cnn::Layout l(a);
  return {
      {"conv1.weight", l.conv1_w, l.conv1_b - l.conv1_w, {a.series, a.conv1_kernels, a.conv1_width}},
      {"conv1.bias", l.conv1_b, l.conv2_w - l.conv1_b, {a.series, a.conv1_kernels}},
      {"conv2.weight", l.conv2_w, l.conv2_b - l.conv2_w, {a.conv2_kernels, a.conv2_size, a.conv2_size}},
      {"conv2.bias", l.conv2_b, l.dense1_w - l.conv2_b, {a.conv2_kernels}},
      {"dense1.weight", l.dense1_w, l.dense1_b - l.dense1_w, {a.hidden1, a.dense_inputs()}},
      {"dense1.bias", l.dense1_b, l.dense2_w - l.dense1_b, {a.hidden1}},
      {"dense2.weight", l.dense2_w, l.dense2_b - l.dense2_w, {a.hidden2, a.hidden1}},
      {"dense2.bias", l.dense2_b, l.out_w - l.dense2_b, {a.hidden2}},
      {"output.weight", l.out_w, l.out_b - l.out_w, {a.classes, a.hidden2}},
      {"output.bias", l.out_b, l.total - l.out_b, {a.classes}},
  };
}

}  // namespace

std::string model_format(std::string_view text, std::string_view origin) {
  return string_field(parse_json(text, origin), origin, "", "format");
}

std::string cnn_model_json(const cnn::CnnModel& m) {
  const cnn::Architecture& a = m.arch;
  json arch = {{"series", a.series},           {"conv1_kernels", a.conv1_kernels},
               {"conv1_width", a.conv1_width}, {"conv2_kernels", a.conv2_kernels},
               {"conv2_size", a.conv2_size},   {"hidden1", a.hidden1},
               {"hidden2", a.hidden2},         {"classes", a.classes}};
  json layers = json::array();
  for (const Block& b : blocks_of(a)) {
    layers.push_back({{"name", b.name},
                      {"shape", b.shape},
                      {"values", std::vector<double>(m.params.begin() + static_cast<std::ptrdiff_t>(b.offset),
                                                     m.params.begin() + static_cast<std::ptrdiff_t>(b.offset + b.size))}});
  }
  const json j = {
      {"format", "railevent-cnn"},
      {"version", cnn::CnnModel::kFormatVersion},
      {"architecture", arch},
      {"layer_order",
       {"conv1 (per-series valid 1d)", "conv2 (valid 2d over stacked maps)", "maxpool (time)", "concat speed",
        "dense1 selu", "dense2 selu", "output softmax"}},
      {"activation", {{"selu_lambda", cnn::kSeluLambda}, {"selu_alpha", cnn::kSeluAlpha}}},
      {"standardization",
       {{"feature_transform", "log(max(x,0)+floor)"},
        {"log_floor", cnn::kCompressFloor},
        {"feature_mean", m.standardizer.feature_mean},
        {"feature_std", m.standardizer.feature_std},
        {"speed_mean", m.standardizer.speed_mean},
        {"speed_std", m.standardizer.speed_std}}},
      {"parameters", layers}};
  return j.dump(1) + "\n";
}

cnn::CnnModel parse_cnn_model(std::string_view text, std::string_view origin) {
  const json j = parse_json(text, origin);
  check_format(j, origin, "railevent-cnn", cnn::CnnModel::kFormatVersion);
  const json& arch = require(j, origin, "", "architecture");
  const std::string where = "architecture: ";
  cnn::Architecture a;
  a.series = uint_field(arch, origin, where, "series");
  a.conv1_kernels = uint_field(arch, origin, where, "conv1_kernels");
  a.conv1_width = uint_field(arch, origin, where, "conv1_width");
  a.conv2_kernels = uint_field(arch, origin, where, "conv2_kernels");
  a.conv2_size = uint_field(arch, origin, where, "conv2_size");
  a.hidden1 = uint_field(arch, origin, where, "hidden1");
  a.hidden2 = uint_field(arch, origin, where, "hidden2");
  a.classes = uint_field(arch, origin, where, "classes");
  if (a.series != kFeatureCount || a.classes != kClassCount) {
    throw FormatError(fmt::format("{}: architecture must have {} series and {} classes", origin, kFeatureCount, kClassCount));
  }
  try {
    a.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(fmt::format("{}: {}", origin, e.what()));
  }

  const json& act = require(j, origin, "", "activation");
  if (number_field(act, origin, "activation: ", "selu_lambda") != cnn::kSeluLambda ||
      number_field(act, origin, "activation: ", "selu_alpha") != cnn::kSeluAlpha) {
    throw FormatError(fmt::format("{}: unsupported activation constants", origin));
  }

  cnn::CnnModel m = cnn::CnnModel::zeros(a);
  const json& st = require(j, origin, "", "standardization");
  auto vec = [&](const char* field) {
    const json& v = require(st, origin, "standardization: ", field);
    if (!v.is_array() || v.size() != a.series) bad_field(origin, "standardization: ", field, "has the wrong length");
    return v.get<std::vector<double>>();
  };
  if (string_field(st, origin, "standardization: ", "feature_transform") != "log(max(x,0)+floor)" ||
      number_field(st, origin, "standardization: ", "log_floor") != cnn::kCompressFloor) {
    throw FormatError(fmt::format("{}: unsupported feature transform", origin));
  }
  m.standardizer.feature_mean = vec("feature_mean");
  m.standardizer.feature_std = vec("feature_std");
  m.standardizer.speed_mean = number_field(st, origin, "standardization: ", "speed_mean");
  m.standardizer.speed_std = number_field(st, origin, "standardization: ", "speed_std");

  const json& layers = require(j, origin, "", "parameters");
  const auto blocks = blocks_of(a);
  if (!layers.is_array() || layers.size() != blocks.size()) bad_field(origin, "", "parameters", "has the wrong layer count");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const Block& b = blocks[i];
    const std::string lw = fmt::format("parameters[{}]: ", i);
    if (string_field(layers[i], origin, lw, "name") != b.name) bad_field(origin, lw, "name", fmt::format("must be '{}'", b.name));
    const json& shape = require(layers[i], origin, lw, "shape");
    if (!shape.is_array() || shape.get<std::vector<std::size_t>>() != b.shape) bad_field(origin, lw, "shape", "does not match architecture");
    const json& values = require(layers[i], origin, lw, "values");
    if (!values.is_array() || values.size() != b.size) bad_field(origin, lw, "values", "has the wrong length");
    for (std::size_t k = 0; k < b.size; ++k) {
      if (!values[k].is_number()) bad_field(origin, lw, "values", "must hold numbers");
      m.params[b.offset + k] = values[k].get<double>();
    }
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(fmt::format("{}: {}", origin, e.what()));
  }
  return m;
}

void save_cnn_model(const fs::path& path, const cnn::CnnModel& m) { write_text(path, cnn_model_json(m)); }

cnn::CnnModel load_cnn_model(const fs::path& path) { return parse_cnn_model(read_text(path), path.string()); }

}  // namespace railevent::io
