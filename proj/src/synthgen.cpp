#include "railevent/synthgen.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "railevent/rng.hpp"
#include "railevent/synth_constants.hpp"

namespace railevent {

std::string_view to_string(MaterialClass m) {
  switch (m) {
    case MaterialClass::none: return "none";
    case MaterialClass::steel: return "steel";
    case MaterialClass::wood: return "wood";
    case MaterialClass::stone: return "stone";
    case MaterialClass::bone: return "bone";
  }
  return "?";
}

std::string_view to_string(Confounder c) {
  switch (c) {
    case Confounder::none: return "none";
    case Confounder::track_switch: return "switch";
    case Confounder::rail_joint: return "rail_joint";
  }
  return "?";
}

std::optional<MaterialClass> parse_material(std::string_view s) {
  for (int i = 0; i < static_cast<int>(kClassCount); ++i) {
    const auto m = static_cast<MaterialClass>(i);
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

std::optional<Confounder> parse_confounder(std::string_view s) {
  for (int i = 0; i < 3; ++i) {
    const auto c = static_cast<Confounder>(i);
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

void ScenarioConfig::validate() const {
  if (!(sample_rate_hz > 2.0 * kLowPassCutoffHz)) throw std::invalid_argument("sample_rate_hz too low");
  if (!(duration_s > 0.0)) throw std::invalid_argument("duration_s must be positive");
  if (!(noise_rms > 0.0)) throw std::invalid_argument("noise_rms must be positive");
  if (!(event_time_s >= 0.0 && event_time_s < duration_s)) {
    throw std::invalid_argument("event_time_s must lie in [0, duration_s)");
  }
  if (!(speed_mps >= 0.0)) throw std::invalid_argument("speed_mps must be non-negative");
  if (!(impact_gain >= 0.0)) throw std::invalid_argument("impact_gain must be non-negative");
}

std::vector<SensorProfile> default_sensor_profiles() {
  return {{"wheelset_bearing", synth::kWheelsetBearingDamping},
          {"bogie_frame", synth::kBogieFrameDamping},
          {"car_body", synth::kCarBodyDamping}};
}

namespace {

std::size_t sample_count(const ScenarioConfig& cfg) {
  return static_cast<std::size_t>(std::llround(cfg.duration_s * cfg.sample_rate_hz));
}

const synth::Signature& signature_of(MaterialClass m) {
  switch (m) {
    case MaterialClass::steel: return synth::kSteel;
    case MaterialClass::wood: return synth::kWood;
    case MaterialClass::stone: return synth::kStone;
    case MaterialClass::bone: return synth::kBone;
    case MaterialClass::none: break;
  }
  throw std::invalid_argument("no impact signature for class none");
}

// Adds one decaying multi-partial transient with onset t0. Partial phases and
// frequency jitter are drawn from `rng` so the shape is fixed per run while the
// amplitude stays exactly proportional to `amplitude`.
void add_transient(std::vector<double>& out, double fs, double t0, double amplitude,
                   const synth::Signature& sig, Rng& rng) {
  std::array<double, 3> freq{}, phase{};
  for (std::size_t p = 0; p < sig.partial_count; ++p) {
    freq[p] = sig.partials[p].freq_hz * (1.0 + rng.uniform(-synth::kFreqJitter, synth::kFreqJitter));
    phase[p] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  const std::size_t start = static_cast<std::size_t>(std::ceil(t0 * fs));
  const std::size_t span = static_cast<std::size_t>(std::ceil(10.0 * sig.decay_s * fs));
  for (std::size_t i = start; i < out.size() && i < start + span; ++i) {
    const double t = static_cast<double>(i) / fs - t0;
    const double env = std::exp(-t / sig.decay_s) * (1.0 - std::exp(-t / synth::kAttackS));
    double s = 0.0;
    for (std::size_t p = 0; p < sig.partial_count; ++p) {
      s += sig.partials[p].weight * std::sin(2.0 * std::numbers::pi * freq[p] * t + phase[p]);
    }
    out[i] += amplitude * env * s;
  }
  if (sig.lift_freq_hz > 0.0) {
    // Hann-windowed single sine cycle: zero net velocity change.
    const double period = 1.0 / sig.lift_freq_hz;
    for (std::size_t i = start; i < out.size(); ++i) {
      const double t = static_cast<double>(i) / fs - t0;
      if (t >= period) break;
      const double phase = 2.0 * std::numbers::pi * sig.lift_freq_hz * t;
      out[i] += amplitude * sig.lift_gain * std::sin(phase) * 0.5 * (1.0 - std::cos(phase));
    }
  }
}

// The background is already band-limited, so only the transient is filtered;
// filtering the limited noise again would ring past its amplitude bound.
Waveform make_waveform(const std::vector<double>& background, const std::vector<double>& transient,
                       const ScenarioConfig& cfg) {
  Waveform w;
  w.sample_rate_hz = cfg.sample_rate_hz;
  w.samples = dsp::low_pass(transient, cfg.sample_rate_hz, kLowPassCutoffHz);
  for (std::size_t i = 0; i < w.samples.size(); ++i) w.samples[i] += background[i];
  return w;
}

}  // namespace

std::vector<double> background_noise(const ScenarioConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, "background"));
  std::vector<double> white(sample_count(cfg));
  for (double& v : white) v = rng.normal();
  std::vector<double> x = dsp::low_pass(white, cfg.sample_rate_hz, kLowPassCutoffHz);

  const double sigma = dsp::rms(x);
  const double limit = synth::kNoiseLimit * sigma;
  for (double& v : x) v = limit * std::tanh(v / limit);
  const double scale = cfg.noise_rms / dsp::rms(x);
  for (double& v : x) v *= scale;
  return x;
}

std::vector<double> impact_burst(MaterialClass material, const ScenarioConfig& cfg) {
  cfg.validate();
  const synth::Signature& sig = signature_of(material);
  Rng rng(derive_seed(cfg.seed, "impact"));
  std::vector<double> out(sample_count(cfg), 0.0);
  const double amplitude = sig.amplitude_per_mps * cfg.speed_mps * cfg.impact_gain;
  add_transient(out, cfg.sample_rate_hz, cfg.event_time_s, amplitude, sig, rng);
  if (sig.echo_delay_s > 0.0) {
    add_transient(out, cfg.sample_rate_hz, cfg.event_time_s + sig.echo_delay_s,
                  amplitude * sig.echo_gain, sig, rng);
  }
  return out;
}

std::vector<double> confounder_transient(const ScenarioConfig& cfg) {
  cfg.validate();
  std::vector<double> out(sample_count(cfg), 0.0);
  Rng rng(derive_seed(cfg.seed, "confounder"));
  switch (cfg.confounder) {
    case Confounder::none:
      break;
    case Confounder::track_switch: {
      const double amplitude =
          (synth::kSwitchBaseAmplitude + synth::kSwitch.amplitude_per_mps * cfg.speed_mps) * cfg.impact_gain;
      add_transient(out, cfg.sample_rate_hz, cfg.event_time_s, amplitude, synth::kSwitch, rng);
      break;
    }
    case Confounder::rail_joint: {
      const double amplitude = synth::kRailJoint.amplitude_per_mps * cfg.speed_mps * cfg.impact_gain;
      const double period =
          cfg.speed_mps > 0.0 ? synth::kBogieWheelbaseM / cfg.speed_mps : cfg.duration_s;
      for (double t = cfg.event_time_s; t < cfg.duration_s; t += period) {
        add_transient(out, cfg.sample_rate_hz, t, amplitude, synth::kRailJoint, rng);
      }
      break;
    }
  }
  return out;
}

LabeledRecording generate_event(MaterialClass material, const ScenarioConfig& cfg) {
  if (material == MaterialClass::none) throw std::invalid_argument("use generate_regular");
  cfg.validate();
  LabeledRecording rec;
  rec.waveform = make_waveform(background_noise(cfg), impact_burst(material, cfg), cfg);
  rec.label = material;
  rec.speed_mps = cfg.speed_mps;
  rec.provenance = cfg;
  return rec;
}

LabeledRecording generate_regular(const ScenarioConfig& cfg) {
  cfg.validate();
  LabeledRecording rec;
  rec.waveform = make_waveform(background_noise(cfg), confounder_transient(cfg), cfg);
  rec.label = MaterialClass::none;
  rec.speed_mps = cfg.speed_mps;
  rec.provenance = cfg;
  return rec;
}

double track_noise_rms(double speed_mps) {
  return synth::kTrackNoiseRms * (synth::kTrackNoiseStill + (1.0 - synth::kTrackNoiseStill) * speed_mps /
                                                                synth::kTrackNoiseRefSpeedMps);
}

std::vector<Scenario> plan_scenarios(const DatasetOptions& opts) {
  std::vector<Scenario> out;
  out.reserve(opts.n_events + opts.n_regular);
  const std::size_t total = opts.n_events + opts.n_regular;
  for (std::size_t id = 0; id < total; ++id) {
    Scenario s;
    s.recording_id = id;
    ScenarioConfig& cfg = s.config;
    cfg.seed = derive_seed(opts.seed, static_cast<std::uint64_t>(id));
    std::size_t speed_slot = 0;
    if (id < opts.n_events) {
      s.label = kMaterials[id % kMaterials.size()];
      speed_slot = (id / kMaterials.size()) % kDefaultSpeedsKmh.size();
    } else {
      const std::size_t j = id - opts.n_events;
      cfg.confounder = static_cast<Confounder>(j % 3);
      // rotate speeds per confounder so every speed gets the same share
      speed_slot = (j % 3 + j / 3) % kDefaultSpeedsKmh.size();
    }
    cfg.speed_mps = kmh_to_mps(kDefaultSpeedsKmh[speed_slot]);
    cfg.noise_rms = track_noise_rms(cfg.speed_mps);
    Rng rng(derive_seed(cfg.seed, "plan"));
    cfg.event_time_s = rng.uniform(synth::kEventEarliestS, synth::kEventLatestS);
    out.push_back(s);
  }
  return out;
}

LabeledRecording render(const Scenario& scenario, const SensorProfile& sensor) {
  ScenarioConfig cfg = scenario.config;
  cfg.impact_gain = sensor.damping;
  cfg.noise_rms = std::hypot(sensor.damping * scenario.config.noise_rms, synth::kSensorFloorRms);
  LabeledRecording rec = scenario.label == MaterialClass::none ? generate_regular(cfg)
                                                               : generate_event(scenario.label, cfg);
  rec.sensor_id = sensor.id;
  rec.waveform.channel_id = sensor.id;
  return rec;
}

Dataset generate_dataset(const DatasetOptions& opts) {
  Dataset ds;
  ds.seed = opts.seed;
  ds.sensors = opts.sensors;
  ds.scenarios = plan_scenarios(opts);
  ds.entries.reserve(ds.scenarios.size() * ds.sensors.size());
  for (const Scenario& s : ds.scenarios) {
    for (const SensorProfile& p : ds.sensors) {
      ds.entries.push_back({s.recording_id, p.id, render(s, p)});
    }
  }
  return ds;
}

}  // namespace railevent
