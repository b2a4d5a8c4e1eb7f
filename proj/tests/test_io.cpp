#include <doctest.h>

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "railevent/io.hpp"
#include "railevent/rng.hpp"

using namespace railevent;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("railevent_io_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Dataset small_dataset(std::uint64_t seed) {
  DatasetOptions o;
  o.seed = seed;
  o.n_events = 4;
  o.n_regular = 3;
  return generate_dataset(o);
}

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("waveform and feature csv round trips are exact") {
  TempDir dir("csv");
  const Dataset ds = small_dataset(3);
  const Waveform& w = ds.entries[0].recording.waveform;
  io::write_waveform_csv(dir.path / "w.csv", w);
  const Waveform back = io::read_waveform_csv(dir.path / "w.csv", w.channel_id, w.sample_rate_hz);
  CHECK(back.samples == w.samples);
  CHECK(io::waveform_csv(back) == io::waveform_csv(w));

  const auto frames = dsp::featurize(w, ds.entries[0].recording.speed_mps);
  io::write_features_csv(dir.path / "f.csv", frames);
  const auto fback = io::read_features_csv(dir.path / "f.csv");
  REQUIRE(fback.size() == frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) CHECK(fback[i] == frames[i]);
}

TEST_CASE("written datasets reload to the same segments") {
  TempDir dir("dataset");
  const Dataset ds = small_dataset(5);
  const io::Manifest m = io::write_dataset(dir.path, ds);
  const io::Manifest back = io::read_manifest(dir.path / "manifest.json");
  CHECK(io::manifest_json(back) == io::manifest_json(m));
  CHECK(back.records.size() == ds.entries.size());
  const auto a = featurize_dataset(ds);
  const auto b = io::load_segments(back, dir.path);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].frames == b[i].frames);
    CHECK(a[i].label == b[i].label);
    CHECK(a[i].sensor_id == b[i].sensor_id);
    CHECK(a[i].recording_id == b[i].recording_id);
  }
}

TEST_CASE("malformed manifests name the offending field") {
  const io::Manifest m = io::write_dataset(TempDir("manifest").path, small_dataset(6));
  nlohmann::json j = nlohmann::json::parse(io::manifest_json(m));

  nlohmann::json bad = j;
  bad["records"][2]["speed_mps"] = "fast";
  std::string msg = error_of([&] { io::parse_manifest(bad.dump(), "m.json"); });
  CHECK(msg.find("m.json") != std::string::npos);
  CHECK(msg.find("record 2") != std::string::npos);
  CHECK(msg.find("speed_mps") != std::string::npos);

  bad = j;
  bad["records"][0].erase("label");
  CHECK(error_of([&] { io::parse_manifest(bad.dump()); }).find("'label'") != std::string::npos);

  bad = j;
  bad["records"][1]["confounder"] = "bridge";
  CHECK(error_of([&] { io::parse_manifest(bad.dump()); }).find("confounder") != std::string::npos);

  CHECK_THROWS_AS(io::parse_manifest("{not json"), io::FormatError);
}

TEST_CASE("unknown format versions are rejected") {
  nlohmann::json j = nlohmann::json::parse(io::manifest_json(io::Manifest{}));
  j["version"] = 2;
  CHECK(error_of([&] { io::parse_manifest(j.dump()); }).find("unsupported") != std::string::npos);

  nlohmann::json c = nlohmann::json::parse(io::classical_model_json(classical::ThresholdModel{}));
  c["version"] = 7;
  CHECK_THROWS_AS(io::parse_classical_model(c.dump()), io::FormatError);

  nlohmann::json n = nlohmann::json::parse(io::cnn_model_json(cnn::CnnModel::initialize(cnn::Architecture{}, 1)));
  n["version"] = 0;
  CHECK_THROWS_AS(io::parse_cnn_model(n.dump()), io::FormatError);
}

TEST_CASE("classical model round trip") {
  classical::ThresholdModel m;
  m.thresholds = {0.1, 1.0 / 3.0, 12.75, 2e-7, 0.3};
  m.fp_weight = 2.5;
  m.normalize_by_speed = true;
  const std::string text = io::classical_model_json(m);
  CHECK(io::model_format(text) == "railevent-classical");
  const auto back = io::parse_classical_model(text);
  CHECK(back == m);
  CHECK(io::classical_model_json(back) == text);
}

TEST_CASE("cnn model load then save is bit-identical") {
  TempDir dir("cnn");
  cnn::CnnModel m = cnn::CnnModel::initialize(cnn::Architecture{}, 9);
  Rng rng(4);
  for (std::size_t s = 0; s < m.arch.series; ++s) {
    m.standardizer.feature_mean[s] = rng.normal();
    m.standardizer.feature_std[s] = rng.uniform(0.1, 3.0);
  }
  m.standardizer.speed_mean = 2.777;
  m.standardizer.speed_std = 1.1;
  io::save_cnn_model(dir.path / "a.json", m);
  const cnn::CnnModel back = io::load_cnn_model(dir.path / "a.json");
  CHECK(back == m);
  io::save_cnn_model(dir.path / "b.json", back);
  CHECK(io::read_text(dir.path / "a.json") == io::read_text(dir.path / "b.json"));
  CHECK(io::model_format(io::read_text(dir.path / "a.json")) == "railevent-cnn");

  // a file declaring a different input transform is not silently accepted
  nlohmann::json j = nlohmann::json::parse(io::read_text(dir.path / "a.json"));
  j["standardization"]["feature_transform"] = "identity";
  CHECK_THROWS_AS(io::parse_cnn_model(j.dump()), io::FormatError);
}

TEST_CASE("missing files") {
  CHECK(error_of([] { io::read_text("/nonexistent/railevent.json"); }).find("cannot open") != std::string::npos);
  CHECK_THROWS(io::load_cnn_model("/nonexistent/model.json"));
}
