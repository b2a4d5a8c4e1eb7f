#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "railevent/signal.hpp"

namespace railevent {

/// `none` covers regular operation (smooth track, switches, rail joints).
enum class MaterialClass : int { none = 0, steel = 1, wood = 2, stone = 3, bone = 4 };
inline constexpr std::size_t kClassCount = 5;
inline constexpr std::array<MaterialClass, 4> kMaterials = {
    MaterialClass::steel, MaterialClass::wood, MaterialClass::stone, MaterialClass::bone};

enum class Confounder : int { none = 0, track_switch = 1, rail_joint = 2 };

std::string_view to_string(MaterialClass m);
std::string_view to_string(Confounder c);
std::optional<MaterialClass> parse_material(std::string_view s);
std::optional<Confounder> parse_confounder(std::string_view s);

inline constexpr double kmh_to_mps(double kmh) { return kmh / 3.6; }
inline constexpr std::array<double, 3> kDefaultSpeedsKmh = {5.0, 10.0, 15.0};

struct ScenarioConfig {
  std::uint64_t seed = 0;
  double speed_mps = kmh_to_mps(10.0);
  double duration_s = 3.0;
  double noise_rms = 0.3;
  double event_time_s = 1.45;
  Confounder confounder = Confounder::none;
  /// Scales every track-borne transient (impact bursts and confounders).
  double impact_gain = 1.0;
  double sample_rate_hz = kDefaultSampleRateHz;

  void validate() const;
};

struct LabeledRecording {
  Waveform waveform;
  MaterialClass label = MaterialClass::none;
  double speed_mps = 0.0;
  std::string sensor_id;
  ScenarioConfig provenance;
};

/// Mounting position. Only a gain factor on track-borne transients is modelled.
struct SensorProfile {
  std::string id;
  double damping = 1.0;
};

std::vector<SensorProfile> default_sensor_profiles();

/// Background of every recording: band-limited, amplitude-bounded noise with
/// RMS noise_rms, then low-passed at 1 kHz.
std::vector<double> background_noise(const ScenarioConfig& cfg);

/// The injected impact signature alone (no noise, no filtering). Linear in
/// speed_mps * impact_gain.
std::vector<double> impact_burst(MaterialClass material, const ScenarioConfig& cfg);

/// The injected confounder transient alone (all zeros for Confounder::none).
std::vector<double> confounder_transient(const ScenarioConfig& cfg);

LabeledRecording generate_event(MaterialClass material, const ScenarioConfig& cfg);
LabeledRecording generate_regular(const ScenarioConfig& cfg);

/// Track-borne background RMS at the wheelset bearing for a given speed.
double track_noise_rms(double speed_mps);

/// Scenario for one physical run; rendered once per sensor profile.
struct Scenario {
  std::size_t recording_id = 0;
  MaterialClass label = MaterialClass::none;
  /// impact_gain is 1 and noise_rms is the undamped track background; render()
  /// applies the profile damping to both and adds the acquisition noise floor.
  ScenarioConfig config;
};

struct DatasetEntry {
  std::size_t recording_id = 0;
  std::string sensor_profile;
  LabeledRecording recording;
};

struct Dataset {
  std::uint64_t seed = 0;
  std::vector<SensorProfile> sensors;
  std::vector<Scenario> scenarios;
  /// scenario-major, sensor-minor
  std::vector<DatasetEntry> entries;
};

struct DatasetOptions {
  std::size_t n_events = 60;
  std::size_t n_regular = 96;
  std::uint64_t seed = 0;
  std::vector<SensorProfile> sensors = default_sensor_profiles();
};

/// Scenario plan only (labels, speeds, confounders, per-run seeds).
std::vector<Scenario> plan_scenarios(const DatasetOptions& opts);

/// Renders one scenario for one sensor profile.
LabeledRecording render(const Scenario& scenario, const SensorProfile& sensor);

Dataset generate_dataset(const DatasetOptions& opts);

}  // namespace railevent
