#include "railevent/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "railevent/classical.hpp"
#include "railevent/cnn.hpp"
#include "railevent/eval.hpp"
#include "railevent/io.hpp"
#include "railevent/rng.hpp"
#include "railevent/synthgen.hpp"

namespace railevent::cli {
namespace {

namespace fs = std::filesystem;

class MissingFile : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Shared {
  std::uint64_t seed = 1;
  std::string manifest;
  std::string out;
  std::string speed_unit = "kmh";
};

void add_shared(CLI::App* cmd, Shared& s, bool wants_manifest, bool wants_out) {
  cmd->add_option("--seed", s.seed, "Master seed")->capture_default_str();
  if (wants_manifest) cmd->add_option("--manifest", s.manifest, "Dataset manifest (manifest.json)");
  if (wants_out) cmd->add_option("--out", s.out, "Output path");
  cmd->add_option("--speed-unit", s.speed_unit, "Unit of --speed values")
      ->check(CLI::IsMember({"kmh", "mps"}))
      ->capture_default_str();
}

double to_mps(double speed, const std::string& unit) { return unit == "kmh" ? speed / 3.6 : speed; }

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw CLI::RequiredError(fmt::format("--{}", what));
  if (!fs::exists(path)) throw MissingFile(fmt::format("{} not found: {}", what, path));
}

std::string require_out(const Shared& s) {
  if (s.out.empty()) throw CLI::RequiredError("--out");
  return s.out;
}

// Segments of one manifest grouped per sensor, sensors in manifest order.
struct Corpus {
  io::Manifest manifest;
  std::vector<std::string> sensors;
  std::map<std::string, std::vector<LabeledSegment>> by_sensor;
};

Corpus load_corpus(const Shared& s) {
  require_file(s.manifest, "manifest");
  Corpus c;
  c.manifest = io::read_manifest(s.manifest);
  for (const auto& r : c.manifest.records) {
    if (std::find(c.sensors.begin(), c.sensors.end(), r.sensor_profile) == c.sensors.end()) {
      c.sensors.push_back(r.sensor_profile);
    }
  }
  const auto segs = io::load_segments(c.manifest, fs::path(s.manifest).parent_path());
  c.by_sensor = eval::by_sensor(segs);
  return c;
}

std::vector<std::string> pick_sensors(const Corpus& c, const std::string& only) {
  if (only.empty()) return c.sensors;
  if (!c.by_sensor.count(only)) throw std::invalid_argument(fmt::format("sensor '{}' is not in the manifest", only));
  return {only};
}

struct SplitParts {
  std::vector<LabeledSegment> train, val, test;
};

SplitParts split_for(const Corpus& c, const eval::Split& split, const std::string& sensor) {
  const std::span<const LabeledSegment> all(c.by_sensor.at(sensor));
  return {eval::pick(all, split.train), eval::pick(all, split.val), eval::pick(all, split.test)};
}

eval::Split corpus_split(const Corpus& c, std::uint64_t seed) {
  if (c.sensors.empty()) throw std::invalid_argument("manifest has no records");
  const auto& reference = c.by_sensor.at(c.sensors.front());
  for (const auto& sensor : c.sensors) {
    if (c.by_sensor.at(sensor).size() != reference.size()) {
      throw std::invalid_argument("sensors in the manifest have different recordings");
    }
  }
  return eval::benchmark_split(reference, seed);
}

fs::path model_path(const fs::path& dir, std::string_view method, const std::string& sensor) {
  return dir / fmt::format("{}_{}.json", method, sensor);
}

// generate

struct GenerateArgs {
  Shared shared;
  std::size_t events = 60;
  std::size_t regular = 96;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out, std::ostream& err) {
  const std::string dir = require_out(a.shared);
  DatasetOptions d;
  d.n_events = a.events;
  d.n_regular = a.regular;
  d.seed = derive_seed(a.shared.seed, "dataset");
  err << fmt::format("generate: seed={} dataset_seed={} events={} regular={} out={}\n", a.shared.seed, d.seed,
                     a.events, a.regular, dir);
  const Dataset ds = generate_dataset(d);
  const io::Manifest m = io::write_dataset(dir, ds);
  out << fmt::format("wrote {} recordings to {}\n", m.records.size(), (fs::path(dir) / "manifest.json").string());
  return kOk;
}

// featurize

struct FeaturizeArgs {
  Shared shared;
  std::string waveform;
  double speed = 0.0;
  double sample_rate = kDefaultSampleRateHz;
};

int cmd_featurize(const FeaturizeArgs& a, std::ostream& out, std::ostream& err) {
  const std::string dst = require_out(a.shared);
  if (!a.waveform.empty()) {
    require_file(a.waveform, "waveform");
    const double speed = to_mps(a.speed, a.shared.speed_unit);
    err << fmt::format("featurize: waveform={} speed_mps={} sample_rate_hz={} out={}\n", a.waveform, speed,
                       a.sample_rate, dst);
    const Waveform w = io::read_waveform_csv(a.waveform, fs::path(a.waveform).stem().string(), a.sample_rate);
    io::write_features_csv(dst, dsp::featurize(w, speed));
    out << fmt::format("wrote {}\n", dst);
    return kOk;
  }
  require_file(a.shared.manifest, "manifest");
  err << fmt::format("featurize: manifest={} out={}\n", a.shared.manifest, dst);
  const io::Manifest m = io::read_manifest(a.shared.manifest);
  const fs::path base = fs::path(a.shared.manifest).parent_path();
  fs::create_directories(dst);
  for (const auto& r : m.records) {
    const Waveform w = io::read_waveform_csv(base / r.path, r.channel_id, r.sample_rate_hz);
    io::write_features_csv(fs::path(dst) / fs::path(r.path).filename(), dsp::featurize(w, r.speed_mps));
  }
  out << fmt::format("wrote {} feature files to {}\n", m.records.size(), dst);
  return kOk;
}

// train-classical / train-cnn

struct TrainArgs {
  Shared shared;
  std::string sensor;
  std::string method = "classical-1";
  std::string variant;  // plain | vel, overrides method
  double fp_weight = 2.0;
  std::size_t chains = 4;
  cnn::TrainConfig cnn{};
};

eval::BenchmarkOptions options_from(const TrainArgs& a) {
  eval::BenchmarkOptions o;
  o.seed = a.shared.seed;
  o.fp_weight = a.fp_weight;
  o.sa_chains = a.chains;
  o.cnn = a.cnn;
  return o;
}

int cmd_train_classical(TrainArgs a, std::ostream& out, std::ostream& err) {
  const fs::path dir = require_out(a.shared);
  if (!a.variant.empty()) a.method = a.variant == "vel" ? "classical-vel" : "classical-1";
  const bool vel = a.method == "classical-vel";
  err << fmt::format("train-classical: seed={} manifest={} method={} sensor={} fp_weight={} chains={} out={}\n",
                     a.shared.seed, a.shared.manifest, a.method, a.sensor.empty() ? "all" : a.sensor, a.fp_weight,
                     a.chains, dir.string());
  const Corpus c = load_corpus(a.shared);
  const eval::Split split = corpus_split(c, a.shared.seed);
  const auto opts = options_from(a);
  fs::create_directories(dir);
  for (const auto& sensor : pick_sensors(c, a.sensor)) {
    const SplitParts p = split_for(c, split, sensor);
    const auto model = eval::train_classical_model(p.train, opts, sensor, vel);
    const fs::path path = model_path(dir, a.method, sensor);
    io::save_classical_model(path, model);
    out << fmt::format("wrote {}\n", path.string());
  }
  return kOk;
}

int cmd_train_cnn(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const fs::path dir = require_out(a.shared);
  err << fmt::format(
      "train-cnn: seed={} manifest={} sensor={} epochs={} learning_rate={} batch_size={} momentum={} "
      "weight_decay={} out={}\n",
      a.shared.seed, a.shared.manifest, a.sensor.empty() ? "all" : a.sensor, a.cnn.epochs, a.cnn.learning_rate,
      a.cnn.batch_size, a.cnn.momentum, a.cnn.weight_decay, dir.string());
  a.cnn.validate();
  const Corpus c = load_corpus(a.shared);
  const eval::Split split = corpus_split(c, a.shared.seed);
  const auto opts = options_from(a);
  fs::create_directories(dir);
  for (const auto& sensor : pick_sensors(c, a.sensor)) {
    const SplitParts p = split_for(c, split, sensor);
    const auto model = eval::train_cnn_model(p.train, p.val, opts, sensor);
    const fs::path path = model_path(dir, "dl-1", sensor);
    io::save_cnn_model(path, model);
    out << fmt::format("wrote {}\n", path.string());
  }
  return kOk;
}

// evaluate

struct EvaluateArgs {
  Shared shared;
  std::string models;
  std::string mode = "binary";
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  const std::string report_path = require_out(a.shared);
  require_file(a.models, "models");
  err << fmt::format("evaluate: seed={} manifest={} models={} mode={} out={}\n", a.shared.seed, a.shared.manifest,
                     a.models, a.mode, report_path);
  const Corpus c = load_corpus(a.shared);
  const eval::Split split = corpus_split(c, a.shared.seed);
  const bool multiclass = a.mode == "multiclass";

  eval::Report report;
  for (std::string_view method : eval::kMethods) {
    // Classical detectors report no material, so multiclass covers dl-1 only.
    if (multiclass && method != "dl-1") continue;
    std::size_t found = 0;
    for (const auto& sensor : c.sensors) found += fs::exists(model_path(a.models, method, sensor));
    if (found == 0) continue;
    if (found != c.sensors.size()) {
      throw MissingFile(fmt::format("{}: models missing for some sensors in {}", method, a.models));
    }
    eval::MethodResult mr{std::string(method), {}};
    for (const auto& sensor : c.sensors) {
      const SplitParts p = split_for(c, split, sensor);
      const fs::path path = model_path(a.models, method, sensor);
      if (method == "dl-1") {
        eval::SensorResult r = eval::score_cnn(sensor, p.test, io::load_cnn_model(path));
        if (multiclass) {
          r.accuracy = static_cast<double>(r.multiclass.correct()) / static_cast<double>(r.multiclass.total());
        }
        mr.sensors.push_back(std::move(r));
      } else {
        const auto model = io::load_classical_model(path);
        if (model.normalize_by_speed != (method == "classical-vel")) {
          throw io::FormatError(fmt::format("{}: field 'normalize_by_speed' does not match method {}", path.string(), method));
        }
        mr.sensors.push_back(eval::score_classical(sensor, p.test, model));
      }
    }
    report.methods.push_back(std::move(mr));
  }
  if (report.methods.empty()) throw MissingFile(fmt::format("no model files found in {}", a.models));

  io::write_text(report_path, eval::render_csv(report));
  out << eval::render_table(report) << "\n" << eval::render_confusions(report);
  return kOk;
}

// detect

struct DetectArgs {
  Shared shared;
  std::string model;
  std::string waveform;
  std::string features;
  double speed = -1.0;
  double sample_rate = kDefaultSampleRateHz;
  std::optional<std::size_t> record;
  std::string sensor;
};

std::string detect_line(const std::string& id, const LabeledSegment& seg, const classical::ThresholdModel& m) {
  const auto v = classical::classify_segment_detail(seg.frames, m);
  std::string votes;
  for (std::size_t i = 0; i < classical::kQuantityCount; ++i) {
    votes += fmt::format("{}{}:{}", i ? "," : "", classical::kQuantityNames[i], v.strongest.votes[i] ? 1 : 0);
  }
  return fmt::format("segment={} method={} verdict={} class=- votes={}/{} frame={} breakdown={}", id,
                     m.normalize_by_speed ? "classical-vel" : "classical-1", v.event ? "event" : "none",
                     v.strongest.vote_count(), classical::kQuantityCount, v.strongest_frame, votes);
}

std::string detect_line(const std::string& id, const LabeledSegment& seg, const cnn::CnnModel& m) {
  const auto probs = cnn::forward(m, cnn::to_tensor(seg));
  const auto p = cnn::predict_from_probs(probs);
  std::string breakdown;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    breakdown += fmt::format("{}{}:{:.4f}", k ? "," : "", to_string(static_cast<MaterialClass>(k)), probs[k]);
  }
  return fmt::format("segment={} method=dl-1 verdict={} class={} probs={}", id, p.is_event ? "event" : "none",
                     to_string(p.cls), breakdown);
}

int cmd_detect(const DetectArgs& a, std::ostream& out, std::ostream& err) {
  require_file(a.model, "model");
  const std::string text = io::read_text(a.model);
  const std::string format = io::model_format(text, a.model);
  if (format != "railevent-classical" && format != "railevent-cnn") {
    throw io::FormatError(fmt::format("{}: field 'format' has unknown value '{}'", a.model, format));
  }

  std::vector<std::pair<std::string, LabeledSegment>> segments;
  if (!a.features.empty()) {
    require_file(a.features, "features");
    err << fmt::format("detect: model={} features={}\n", a.model, a.features);
    LabeledSegment seg;
    seg.frames = io::read_features_csv(a.features);
    if (seg.frames.empty()) throw io::FormatError(fmt::format("{}: no feature rows", a.features));
    seg.speed_mps = seg.frames.front().speed_mps;
    segments.emplace_back(fs::path(a.features).stem().string(), std::move(seg));
  } else if (!a.waveform.empty()) {
    require_file(a.waveform, "waveform");
    if (a.speed < 0.0) throw CLI::RequiredError("--speed");
    const double speed = to_mps(a.speed, a.shared.speed_unit);
    err << fmt::format("detect: model={} waveform={} speed_mps={} sample_rate_hz={}\n", a.model, a.waveform, speed,
                       a.sample_rate);
    LabeledRecording rec;
    rec.waveform = io::read_waveform_csv(a.waveform, fs::path(a.waveform).stem().string(), a.sample_rate);
    rec.speed_mps = speed;
    rec.sensor_id = rec.waveform.channel_id;
    segments.emplace_back(fs::path(a.waveform).stem().string(), featurize_recording(rec, 0));
  } else {
    require_file(a.shared.manifest, "manifest");
    err << fmt::format("detect: model={} manifest={} record={} sensor={}\n", a.model, a.shared.manifest,
                       a.record ? std::to_string(*a.record) : "all", a.sensor.empty() ? "all" : a.sensor);
    io::Manifest m = io::read_manifest(a.shared.manifest);
    std::erase_if(m.records, [&](const io::ManifestRecord& r) {
      return (a.record && r.recording_id != *a.record) || (!a.sensor.empty() && r.sensor_profile != a.sensor);
    });
    if (m.records.empty()) throw std::invalid_argument("no manifest records match --record/--sensor");
    const auto segs = io::load_segments(m, fs::path(a.shared.manifest).parent_path());
    for (std::size_t i = 0; i < segs.size(); ++i) {
      segments.emplace_back(fs::path(m.records[i].path).stem().string(), segs[i]);
    }
  }

  if (format == "railevent-classical") {
    const auto model = io::parse_classical_model(text, a.model);
    for (const auto& [id, seg] : segments) out << detect_line(id, seg, model) << "\n";
  } else {
    const auto model = io::parse_cnn_model(text, a.model);
    for (const auto& [id, seg] : segments) out << detect_line(id, seg, model) << "\n";
  }
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Foreign-object event detection from vehicle vibration data"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Write a seeded synthetic dataset (waveform CSVs + manifest)");
  add_shared(generate, gen.shared, false, true);
  generate->add_option("--events", gen.events, "Number of event recordings")->capture_default_str();
  generate->add_option("--regular", gen.regular, "Number of regular recordings")->capture_default_str();

  FeaturizeArgs feat;
  auto* featurize = app.add_subcommand("featurize", "Compute feature CSVs for a manifest or a single waveform");
  add_shared(featurize, feat.shared, true, true);
  featurize->add_option("--waveform", feat.waveform, "Single waveform CSV instead of a manifest");
  featurize->add_option("--speed", feat.speed, "Train speed for --waveform, in --speed-unit");
  featurize->add_option("--sample-rate", feat.sample_rate, "Sample rate of --waveform in Hz")->capture_default_str();

  TrainArgs tcl;
  auto* train_classical = app.add_subcommand("train-classical", "Train a threshold detector per sensor");
  add_shared(train_classical, tcl.shared, true, true);
  train_classical->add_option("--method", tcl.method, "Detector variant")
      ->check(CLI::IsMember({"classical-1", "classical-vel"}))
      ->capture_default_str();
  train_classical->add_option("--variant", tcl.variant, "Short form of --method")
      ->check(CLI::IsMember({"plain", "vel"}));
  train_classical->add_option("--sensor", tcl.sensor, "Train one sensor only");
  train_classical->add_option("--fp-weight", tcl.fp_weight, "False-positive weight in the loss")->capture_default_str();
  train_classical->add_option("--chains", tcl.chains, "Independent annealing chains")->capture_default_str();

  TrainArgs tcn;
  auto* train_cnn = app.add_subcommand("train-cnn", "Train the CNN classifier per sensor");
  add_shared(train_cnn, tcn.shared, true, true);
  train_cnn->add_option("--sensor", tcn.sensor, "Train one sensor only");
  train_cnn->add_option("--epochs", tcn.cnn.epochs)->capture_default_str();
  train_cnn->add_option("--learning-rate", tcn.cnn.learning_rate)->capture_default_str();
  train_cnn->add_option("--batch-size", tcn.cnn.batch_size)->capture_default_str();
  train_cnn->add_option("--momentum", tcn.cnn.momentum)->capture_default_str();
  train_cnn->add_option("--weight-decay", tcn.cnn.weight_decay)->capture_default_str();

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Score trained models on the test split");
  add_shared(evaluate, ev.shared, true, true);
  evaluate->add_option("--models", ev.models, "Directory of <method>_<sensor>.json model files");
  evaluate->add_option("--mode", ev.mode)->check(CLI::IsMember({"binary", "multiclass"}))->capture_default_str();

  DetectArgs det;
  auto* detect = app.add_subcommand("detect", "Print per-segment verdicts of one model");
  add_shared(detect, det.shared, true, false);
  detect->add_option("--model", det.model, "Model file")->required();
  detect->add_option("--features", det.features, "Single feature CSV (as written by featurize)");
  detect->add_option("--waveform", det.waveform, "Single waveform CSV instead of a manifest");
  detect->add_option("--speed", det.speed, "Train speed for --waveform, in --speed-unit");
  detect->add_option("--sample-rate", det.sample_rate, "Sample rate of --waveform in Hz")->capture_default_str();
  detect->add_option("--record", det.record, "Only this recording id");
  detect->add_option("--sensor", det.sensor, "Only this sensor profile");

  try {
    app.parse(argc, argv);
    if (generate->parsed()) return cmd_generate(gen, out, err);
    if (featurize->parsed()) return cmd_featurize(feat, out, err);
    if (train_classical->parsed()) return cmd_train_classical(tcl, out, err);
    if (train_cnn->parsed()) return cmd_train_cnn(tcn, out, err);
    if (evaluate->parsed()) return cmd_evaluate(ev, out, err);
    if (detect->parsed()) return cmd_detect(det, out, err);
    return kUsage;
  } catch (const CLI::CallForHelp&) {
    const CLI::App* shown = &app;
    for (const CLI::App* sub : app.get_subcommands()) shown = sub;
    out << shown->help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const MissingFile& e) {
    err << "error: " << e.what() << "\n";
    return kMissingFile;
  } catch (const io::FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kBadFormat;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace railevent::cli
