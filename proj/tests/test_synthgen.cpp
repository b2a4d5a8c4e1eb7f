#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <vector>

#include "railevent/segment.hpp"
#include "railevent/synthgen.hpp"

using namespace railevent;

namespace {

std::vector<FeatureFrame> frames_of(const LabeledRecording& r) { return dsp::featurize(r.waveform, r.speed_mps); }

std::size_t frame_of(double t) { return static_cast<std::size_t>(t / (kFrameMs / 1000.0)); }

// Frames that end before the onset or start once the burst has rung out.
bool quiet_frame(std::size_t i, double onset) {
  const double start = static_cast<double>(i) * 0.1, end = start + 0.1;
  return end <= onset || start >= onset + 0.6;
}

ScenarioConfig config(std::uint64_t seed, double kmh) {
  ScenarioConfig c;
  c.seed = seed;
  c.speed_mps = kmh_to_mps(kmh);
  return c;
}

const Dataset& default_dataset() {
  static const Dataset ds = [] {
    DatasetOptions o;
    o.seed = 1;
    return generate_dataset(o);
  }();
  return ds;
}

}  // namespace

TEST_CASE("steel at 15 km/h stands out by 5x in acc_pp") {
  for (const double noise : {0.3, track_noise_rms(kmh_to_mps(15.0))}) {
    ScenarioConfig c = config(1, 15.0);
    c.noise_rms = noise;
    const auto frames = frames_of(generate_event(MaterialClass::steel, c));
    const double event_pp = frames[frame_of(c.event_time_s)].acc_pp;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      if (quiet_frame(i, c.event_time_s)) {
        CAPTURE(i);
        CHECK(event_pp >= 5.0 * frames[i].acc_pp);
      }
    }
  }
}

TEST_CASE("generation is seeded") {
  const ScenarioConfig c = config(42, 10.0);
  CHECK(generate_event(MaterialClass::wood, c).waveform.samples ==
        generate_event(MaterialClass::wood, c).waveform.samples);
  ScenarioConfig r = c;
  r.confounder = Confounder::rail_joint;
  CHECK(generate_regular(r).waveform.samples == generate_regular(r).waveform.samples);
  CHECK(generate_event(MaterialClass::wood, config(43, 10.0)).waveform.samples != generate_event(MaterialClass::wood, c).waveform.samples);
}

TEST_CASE("bone event energy scales 3x from 5 to 15 km/h") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ScenarioConfig slow = config(seed, 5.0), fast = config(seed, 15.0);
    const auto fs = frames_of(generate_event(MaterialClass::bone, fast));
    const auto ss = frames_of(generate_event(MaterialClass::bone, slow));
    std::size_t k = 0;
    for (std::size_t i = 0; i < fs.size(); ++i) if (fs[i].acc_rms > fs[k].acc_rms) k = i;
    CAPTURE(seed);
    CHECK(fs[k].acc_rms / ss[k].acc_rms == doctest::Approx(3.0).epsilon(0.10));
  }
}

TEST_CASE("generate_event rejects class none") {
  CHECK_THROWS_WITH(generate_event(MaterialClass::none, config(1, 5.0)), doctest::Contains("use generate_regular"));
}

TEST_CASE("plain background stays within 4x noise_rms") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    for (double kmh : kDefaultSpeedsKmh) {
      ScenarioConfig c = config(seed, kmh);
      c.noise_rms = track_noise_rms(c.speed_mps);
      const auto rec = generate_regular(c);
      CHECK(rec.label == MaterialClass::none);
      for (const auto& f : frames_of(rec)) CHECK(f.acc_pp <= 4.0 * c.noise_rms);
    }
  }
}

TEST_CASE("switch transient is loud but low-frequency") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ScenarioConfig plain = config(seed, 10.0);
    ScenarioConfig sw = plain;
    sw.confounder = Confounder::track_switch;
    const auto base = frames_of(generate_regular(plain));
    const auto rec = generate_regular(sw);
    CHECK(rec.label == MaterialClass::none);
    const auto frames = frames_of(rec);
    double base_pp = 0.0;
    for (const auto& f : base) base_pp = std::max(base_pp, f.acc_pp);
    std::size_t elevated = 0;
    for (const auto& f : frames) elevated += f.acc_pp >= 3.0 * base_pp;
    CAPTURE(seed);
    CHECK(elevated >= 1);
    CHECK(elevated <= 2);  // onset may straddle a frame boundary

    // Spectral energy of the injected transient alone, by direct DFT.
    const auto x = confounder_transient(sw);
    const std::size_t n = 4096, start = static_cast<std::size_t>(sw.event_time_s * sw.sample_rate_hz);
    double low = 0.0, all = 0.0;
    for (std::size_t k = 1; k < n / 2; ++k) {
      std::complex<double> s = 0.0;
      for (std::size_t i = 0; i < n && start + i < x.size(); ++i) {
        s += x[start + i] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * i) / static_cast<double>(n));
      }
      const double f = static_cast<double>(k) * sw.sample_rate_hz / static_cast<double>(n);
      all += std::norm(s);
      if (f < 300.0) low += std::norm(s);
    }
    CHECK(low / all >= 0.8);
  }
}

TEST_CASE("rail joints repeat once per bogie wheelbase") {
  ScenarioConfig c = config(3, 10.0);
  c.confounder = Confounder::rail_joint;
  c.event_time_s = 0.2;
  const auto x = confounder_transient(c);
  const double period = 1.8 / c.speed_mps;
  // silent just before each repetition (the previous one has rung out), active right after
  int reps = 0;
  for (double t = c.event_time_s; t < c.duration_s - 0.01; t += period, ++reps) {
    const auto i = static_cast<std::size_t>(std::ceil(t * c.sample_rate_hz));
    CAPTURE(t);
    CHECK(x[i - 1] == 0.0);
    CHECK(x[i + 5] != 0.0);
  }
  CHECK(reps == 5);
  ScenarioConfig sw = c;
  sw.confounder = Confounder::track_switch;
  const auto y = confounder_transient(sw);
  CHECK(*std::max_element(x.begin(), x.end()) < *std::max_element(y.begin(), y.end()));
}

TEST_CASE("default dataset composition") {
  const Dataset& ds = default_dataset();
  CHECK(ds.scenarios.size() == 156);
  CHECK(ds.entries.size() == 156 * 3);
  std::map<MaterialClass, int> per_material;
  std::map<long, int> event_speeds, regular_speeds;
  std::map<Confounder, int> confounders;
  for (const auto& s : ds.scenarios) {
    const long kmh = std::lround(s.config.speed_mps * 3.6);
    if (s.label == MaterialClass::none) {
      ++confounders[s.config.confounder];
      ++regular_speeds[kmh];
    } else {
      ++per_material[s.label];
      ++event_speeds[kmh];
      CHECK(s.config.confounder == Confounder::none);
    }
  }
  CHECK(per_material.count(MaterialClass::none) == 0);
  for (MaterialClass m : kMaterials) CHECK(per_material[m] == 15);
  for (long kmh : {5L, 10L, 15L}) {
    CHECK(event_speeds[kmh] == 20);
    CHECK(regular_speeds[kmh] == 32);
  }
  for (Confounder c : {Confounder::none, Confounder::track_switch, Confounder::rail_joint}) CHECK(confounders[c] == 32);
  std::size_t events = 0;
  for (const auto& e : ds.entries) events += e.sensor_profile == "car_body" && e.recording.label != MaterialClass::none;
  CHECK(events == 60);
}

TEST_CASE("odd event counts spread materials round-robin") {
  DatasetOptions o;
  o.n_events = 7;
  o.n_regular = 0;
  const auto plan = plan_scenarios(o);
  std::map<MaterialClass, int> n;
  for (const auto& s : plan) ++n[s.label];
  CHECK(n[MaterialClass::steel] == 2);
  CHECK(n[MaterialClass::wood] == 2);
  CHECK(n[MaterialClass::stone] == 2);
  CHECK(n[MaterialClass::bone] == 1);
}

TEST_CASE("car body sees 0.15x of the wheelset steel burst") {
  const Dataset& ds = default_dataset();
  const auto sensors = default_sensor_profiles();
  int checked = 0;
  for (const auto& s : ds.scenarios) {
    if (s.label != MaterialClass::steel) continue;
    const auto wheel = frames_of(render(s, sensors[0]));
    const auto body = frames_of(render(s, sensors[2]));
    std::size_t k = 0;
    for (std::size_t i = 0; i < wheel.size(); ++i) if (wheel[i].acc_rms > wheel[k].acc_rms) k = i;
    CAPTURE(s.recording_id);
    CHECK(body[k].acc_rms / wheel[k].acc_rms == doctest::Approx(0.15).epsilon(0.05));
    ++checked;
  }
  CHECK(checked == 15);
}

TEST_SUITE("invariants") {

TEST_CASE("dataset generation is deterministic") {
  DatasetOptions o;
  o.seed = 9;
  o.n_events = 8;
  o.n_regular = 6;
  const Dataset a = generate_dataset(o), b = generate_dataset(o);
  REQUIRE(a.entries.size() == b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(a.entries[i].recording.waveform.samples == b.entries[i].recording.waveform.samples);
    CHECK(a.entries[i].recording.label == b.entries[i].recording.label);
  }
  // Recording streams depend on (seed, id) only, not on what came before.
  DatasetOptions more = o;
  more.n_regular = 9;
  const Dataset c = generate_dataset(more);
  CHECK(c.entries[3].recording.waveform.samples == a.entries[3].recording.waveform.samples);
}

TEST_CASE("labels match injected bursts") {
  const Dataset& ds = default_dataset();
  for (const auto& s : ds.scenarios) {
    CAPTURE(s.recording_id);
    if (s.label == MaterialClass::none) {
      CHECK_THROWS(impact_burst(s.label, s.config));
      continue;
    }
    // one burst (stone's echo belongs to it) starting at the onset
    const auto x = impact_burst(s.label, s.config);
    const auto first = std::find_if(x.begin(), x.end(), [](double v) { return v != 0.0; });
    REQUIRE(first != x.end());
    const auto onset = static_cast<std::ptrdiff_t>(std::ceil(s.config.event_time_s * s.config.sample_rate_hz));
    CHECK(std::abs((first - x.begin()) - onset) <= 1);
    CHECK(s.config.confounder == Confounder::none);
  }
  for (const auto& e : ds.entries) {
    CHECK(e.recording.label == ds.scenarios[e.recording_id].label);
  }
}

TEST_CASE("burst amplitude is linear in speed") {
  for (MaterialClass m : kMaterials) {
    for (double factor : {2.0, 3.0, 0.5}) {
      ScenarioConfig a = config(5, 5.0), b = a;
      b.speed_mps = a.speed_mps * factor;
      const auto xa = impact_burst(m, a), xb = impact_burst(m, b);
      for (std::size_t i = 0; i < xa.size(); ++i) {
        CHECK(std::abs(xb[i] - factor * xa[i]) <= 1e-12 * std::abs(factor * xa[i]) + 1e-300);
      }
    }
  }
}

TEST_CASE("single acc_pp threshold separates wheelset recordings") {
  const auto segs = featurize_dataset(default_dataset());
  std::vector<std::pair<double, bool>> pts;
  for (const auto& s : segs) {
    if (s.sensor_id != "wheelset_bearing") continue;
    double pp = 0.0;
    for (const auto& f : s.frames) pp = std::max(pp, f.acc_pp);
    pts.emplace_back(pp, s.is_event());
  }
  REQUIRE(pts.size() == 156);
  // Brute-force sweep over every midpoint.
  std::sort(pts.begin(), pts.end());
  std::size_t best = 0;
  for (std::size_t cut = 0; cut <= pts.size(); ++cut) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) correct += (i >= cut) == pts[i].second;
    best = std::max(best, correct);
  }
  CHECK(static_cast<double>(best) / static_cast<double>(pts.size()) >= 0.95);
}

}  // TEST_SUITE
