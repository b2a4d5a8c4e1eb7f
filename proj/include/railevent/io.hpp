#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "railevent/classical.hpp"
#include "railevent/cnn.hpp"
#include "railevent/segment.hpp"
#include "railevent/synthgen.hpp"

namespace railevent::io {

/// Malformed or incompatible file content. The message names the file and,
/// where applicable, the offending field or line.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kManifestVersion = 1;

// Waveform CSV: time_s,acc_mps2
std::string waveform_csv(const Waveform& w);
void write_waveform_csv(const std::filesystem::path& path, const Waveform& w);
/// Sample rate is taken from the caller; the time column must advance by 1/fs.
Waveform read_waveform_csv(const std::filesystem::path& path, std::string channel_id, double sample_rate_hz);

// Feature CSV: frame,vel_pp,vel_rms,acc_pp,acc_rms,oct0..oct9,speed_mps
std::string features_csv(const std::vector<FeatureFrame>& frames);
void write_features_csv(const std::filesystem::path& path, const std::vector<FeatureFrame>& frames);
std::vector<FeatureFrame> read_features_csv(const std::filesystem::path& path);

struct ManifestRecord {
  std::string path;  // relative to the manifest directory
  std::string channel_id;
  std::string sensor_profile;
  double sample_rate_hz = kDefaultSampleRateHz;
  MaterialClass label = MaterialClass::none;
  double speed_mps = 0.0;
  std::uint64_t seed = 0;
  Confounder confounder = Confounder::none;
  std::size_t recording_id = 0;
  double event_time_s = 0.0;
};

struct Manifest {
  int version = kManifestVersion;
  std::uint64_t dataset_seed = 0;
  std::vector<ManifestRecord> records;
};

std::string manifest_json(const Manifest& m);
Manifest parse_manifest(std::string_view text, std::string_view origin = "manifest");
Manifest read_manifest(const std::filesystem::path& path);

/// Writes every recording as CSV under dir/waveforms/ plus dir/manifest.json.
Manifest write_dataset(const std::filesystem::path& dir, const Dataset& ds);

/// Loads and featurizes every manifest record; paths resolve against base_dir.
std::vector<LabeledSegment> load_segments(const Manifest& m, const std::filesystem::path& base_dir);

std::string classical_model_json(const classical::ThresholdModel& m);
classical::ThresholdModel parse_classical_model(std::string_view text, std::string_view origin = "model");
void save_classical_model(const std::filesystem::path& path, const classical::ThresholdModel& m);
classical::ThresholdModel load_classical_model(const std::filesystem::path& path);

/// The "format" tag of a model file ("railevent-classical" or "railevent-cnn").
std::string model_format(std::string_view text, std::string_view origin = "model");

/// Explicit shapes, layer order, activation constants and standardization.
std::string cnn_model_json(const cnn::CnnModel& m);
cnn::CnnModel parse_cnn_model(std::string_view text, std::string_view origin = "model");
void save_cnn_model(const std::filesystem::path& path, const cnn::CnnModel& m);
cnn::CnnModel load_cnn_model(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace railevent::io
