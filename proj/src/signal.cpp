#include "railevent/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace railevent {

std::array<double, kFeatureCount> FeatureFrame::quantities() const {
  std::array<double, kFeatureCount> q{};
  q[0] = vel_pp;
  q[1] = vel_rms;
  q[2] = acc_pp;
  q[3] = acc_rms;
  std::copy(octave.begin(), octave.end(), q.begin() + 4);
  return q;
}

FeatureFrame FeatureFrame::from_quantities(const std::array<double, kFeatureCount>& q,
                                           double speed_mps, int frame_index) {
  FeatureFrame f;
  f.vel_pp = q[0];
  f.vel_rms = q[1];
  f.acc_pp = q[2];
  f.acc_rms = q[3];
  std::copy(q.begin() + 4, q.end(), f.octave.begin());
  f.speed_mps = speed_mps;
  f.frame_index = frame_index;
  return f;
}

BandPlan BandPlan::log_spaced() {
  BandPlan plan;
  const double ratio = kHighHz / kLowHz;
  for (std::size_t k = 0; k <= kOctaveBands; ++k) {
    plan.edges_[k] = kLowHz * std::pow(ratio, static_cast<double>(k) / kOctaveBands);
  }
  plan.edges_[kOctaveBands] = kHighHz;
  return plan;
}

int BandPlan::band_of(double f_hz) const {
  if (f_hz < edges_.front() || f_hz >= edges_.back()) return -1;
  const auto it = std::upper_bound(edges_.begin(), edges_.end(), f_hz);
  return static_cast<int>(it - edges_.begin()) - 1;
}

namespace dsp {
namespace {

void require_non_empty(std::span<const double> x, const char* what) {
  if (x.empty()) throw std::invalid_argument(std::string(what) + ": empty input");
}

void require_rate(double fs_hz) {
  if (!(fs_hz > 0.0) || !std::isfinite(fs_hz)) {
    throw std::invalid_argument("sample rate must be positive");
  }
}

}  // namespace

std::size_t window_length(double sample_rate_hz, double window_ms) {
  require_rate(sample_rate_hz);
  const double len = std::round(window_ms * sample_rate_hz / 1000.0);
  if (!(len >= 2.0)) throw std::invalid_argument("window shorter than 2 samples");
  return static_cast<std::size_t>(len);
}

std::vector<std::span<const double>> frame_windows(const Waveform& w, double window_ms) {
  if (w.samples.empty()) throw std::invalid_argument("frame_windows: empty input");
  const std::size_t len = window_length(w.sample_rate_hz, window_ms);
  const std::size_t count = w.samples.size() / len;
  std::vector<std::span<const double>> out;
  out.reserve(count);
  const std::span<const double> all(w.samples);
  for (std::size_t i = 0; i < count; ++i) out.push_back(all.subspan(i * len, len));
  return out;
}

double peak_to_peak(std::span<const double> x) {
  require_non_empty(x, "peak_to_peak");
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  return *hi - *lo;
}

double mean(std::span<const double> x) {
  require_non_empty(x, "mean");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double rms(std::span<const double> x) {
  require_non_empty(x, "rms");
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

std::vector<double> integrate_to_velocity(std::span<const double> x, double fs_hz) {
  require_rate(fs_hz);
  if (x.size() < 2) throw std::invalid_argument("integrate_to_velocity: need at least 2 samples");
  const std::size_t n = x.size();
  const double m = mean(x);
  const double dt = 1.0 / fs_hz;

  std::vector<double> v(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    v[i] = v[i - 1] + 0.5 * dt * ((x[i - 1] - m) + (x[i] - m));
  }

  // Least-squares line over sample index.
  const double nn = static_cast<double>(n);
  const double t_mean = (nn - 1.0) / 2.0;
  double v_mean = 0.0;
  for (double s : v) v_mean += s;
  v_mean /= nn;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dt_i = static_cast<double>(i) - t_mean;
    sxy += dt_i * (v[i] - v_mean);
    sxx += dt_i * dt_i;
  }
  const double slope = sxy / sxx;
  for (std::size_t i = 0; i < n; ++i) {
    v[i] -= v_mean + slope * (static_cast<double>(i) - t_mean);
  }
  return v;
}

std::array<double, kOctaveBands> octave_spectrum(std::span<const double> x, double fs_hz,
                                                 const BandPlan& plan) {
  require_rate(fs_hz);
  if (x.size() < 2) throw std::invalid_argument("octave_spectrum: need at least 2 samples");
  if (!(fs_hz > 2.0 * plan.edges_hz().back())) {
    throw std::invalid_argument("octave_spectrum: band above Nyquist");
  }
  const std::size_t n = x.size();
  const double m = mean(x);

  std::vector<double> xw(n);
  double window_energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / n));
    xw[i] = (x[i] - m) * w;
    window_energy += w * w;
  }

  std::vector<double> cos_table(n), sin_table(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(i) / n;
    cos_table[i] = std::cos(phase);
    sin_table[i] = std::sin(phase);
  }

  // One-sided power: 2 |X_j|^2 / (N * sum w^2) recovers mean-square per bin.
  std::array<double, kOctaveBands> power{};
  const double bin_hz = fs_hz / static_cast<double>(n);
  const std::size_t first_bin = static_cast<std::size_t>(std::ceil(plan.edges_hz().front() / bin_hz));
  for (std::size_t j = first_bin; j <= n / 2; ++j) {
    const int band = plan.band_of(static_cast<double>(j) * bin_hz);
    if (band < 0) {
      if (static_cast<double>(j) * bin_hz >= plan.edges_hz().back()) break;
      continue;
    }
    double re = 0.0, im = 0.0;
    std::size_t phase = 0;
    for (std::size_t i = 0; i < n; ++i) {
      re += xw[i] * cos_table[phase];
      im -= xw[i] * sin_table[phase];
      phase += j;
      if (phase >= n) phase -= n;
    }
    power[static_cast<std::size_t>(band)] += re * re + im * im;
  }

  std::array<double, kOctaveBands> out{};
  const double scale = 2.0 / (static_cast<double>(n) * window_energy);
  for (std::size_t k = 0; k < kOctaveBands; ++k) out[k] = std::sqrt(power[k] * scale);
  return out;
}

std::vector<double> design_low_pass(double fs_hz, double cutoff_hz) {
  require_rate(fs_hz);
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < fs_hz / 2.0)) {
    throw std::invalid_argument("low_pass: cutoff must lie in (0, fs/2)");
  }
  // Hamming main-lobe width is 3.3 fs / taps.
  const double transition_hz = 0.4 * cutoff_hz;
  std::size_t taps = static_cast<std::size_t>(std::ceil(3.3 * fs_hz / transition_hz));
  if (taps % 2 == 0) ++taps;
  const double fc = cutoff_hz / fs_hz;
  const double centre = static_cast<double>(taps - 1) / 2.0;

  std::vector<double> h(taps);
  double sum = 0.0;
  for (std::size_t i = 0; i < taps; ++i) {
    const double t = static_cast<double>(i) - centre;
    const double sinc = t == 0.0 ? 2.0 * fc
                                 : std::sin(2.0 * std::numbers::pi * fc * t) / (std::numbers::pi * t);
    const double window =
        0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / (taps - 1));
    h[i] = sinc * window;
    sum += h[i];
  }
  for (double& v : h) v /= sum;
  return h;
}

std::vector<double> low_pass(std::span<const double> x, double fs_hz, double cutoff_hz) {
  require_non_empty(x, "low_pass");
  const std::vector<double> h = design_low_pass(fs_hz, cutoff_hz);
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(h.size() / 2);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());

  std::vector<double> y(x.size(), 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(h.size()); ++k) {
      const std::ptrdiff_t src = std::clamp<std::ptrdiff_t>(i + half - k, 0, n - 1);
      acc += h[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(src)];
    }
    y[static_cast<std::size_t>(i)] = acc;
  }
  return y;
}

std::vector<FeatureFrame> featurize(const Waveform& w, double speed_mps) {
  if (!(speed_mps >= 0.0) || !std::isfinite(speed_mps)) {
    throw std::invalid_argument("featurize: speed must be non-negative");
  }
  for (double s : w.samples) {
    if (!std::isfinite(s)) throw std::invalid_argument("featurize: non-finite sample");
  }
  const auto windows = frame_windows(w, kFrameMs);
  const BandPlan plan = BandPlan::log_spaced();

  std::vector<FeatureFrame> frames;
  frames.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& win = windows[i];
    const std::vector<double> vel = integrate_to_velocity(win, w.sample_rate_hz);
    FeatureFrame f;
    f.vel_pp = peak_to_peak(vel);
    f.vel_rms = rms(vel);
    f.acc_pp = peak_to_peak(win);
    f.acc_rms = rms(win);
    f.octave = octave_spectrum(win, w.sample_rate_hz, plan);
    f.speed_mps = speed_mps;
    f.frame_index = static_cast<int>(i);
    frames.push_back(f);
  }
  return frames;
}

}  // namespace dsp
}  // namespace railevent
