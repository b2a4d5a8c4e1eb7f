#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace railevent {

inline constexpr double kDefaultSampleRateHz = 5000.0;
inline constexpr double kFrameMs = 100.0;
inline constexpr double kLowPassCutoffHz = 1000.0;
inline constexpr std::size_t kOctaveBands = 10;
/// vel_pp, vel_rms, acc_pp, acc_rms, oct0..oct9
inline constexpr std::size_t kFeatureCount = 4 + kOctaveBands;

/// One sensor channel: uniformly sampled acceleration in m/s^2.
struct Waveform {
  std::string channel_id;
  double sample_rate_hz = kDefaultSampleRateHz;
  std::vector<double> samples;
  double start_time_s = 0.0;
};

/// Per-window feature vector.
struct FeatureFrame {
  double vel_pp = 0.0;   // m/s
  double vel_rms = 0.0;  // m/s
  double acc_pp = 0.0;   // m/s^2
  double acc_rms = 0.0;  // m/s^2
  std::array<double, kOctaveBands> octave{};
  double speed_mps = 0.0;
  int frame_index = 0;

  /// The 14 quantities in canonical order (vel_pp, vel_rms, acc_pp, acc_rms, octave...).
  std::array<double, kFeatureCount> quantities() const;
  static FeatureFrame from_quantities(const std::array<double, kFeatureCount>& q,
                                      double speed_mps, int frame_index);

  bool operator==(const FeatureFrame&) const = default;
};

/// Constant-ratio band edges between 100 and 1200 Hz.
class BandPlan {
 public:
  static constexpr double kLowHz = 100.0;
  static constexpr double kHighHz = 1200.0;

  /// edges[k] = 100 * 12^(k/10)
  static BandPlan log_spaced();

  const std::array<double, kOctaveBands + 1>& edges_hz() const { return edges_; }
  double lower(std::size_t band) const { return edges_[band]; }
  double upper(std::size_t band) const { return edges_[band + 1]; }

  /// Band index containing f, or -1 when outside [edges[0], edges[10]).
  int band_of(double f_hz) const;

 private:
  std::array<double, kOctaveBands + 1> edges_{};
};

namespace dsp {

/// Non-overlapping windows of round(window_ms * fs / 1000) samples; the
/// trailing partial window is dropped.
std::vector<std::span<const double>> frame_windows(const Waveform& w, double window_ms = kFrameMs);

std::size_t window_length(double sample_rate_hz, double window_ms = kFrameMs);

double peak_to_peak(std::span<const double> x);
double rms(std::span<const double> x);
double mean(std::span<const double> x);

/// Vibration velocity of one window: mean removal, cumulative trapezoidal
/// integration, least-squares linear detrend. Output length equals input length.
std::vector<double> integrate_to_velocity(std::span<const double> x, double fs_hz);

/// Band RMS amplitudes of a Hann-windowed, mean-removed window. A pure tone of
/// amplitude A inside one band reads about A/sqrt(2) there.
std::array<double, kOctaveBands> octave_spectrum(std::span<const double> x, double fs_hz,
                                                 const BandPlan& plan = BandPlan::log_spaced());

/// Windowed-sinc (Hamming) FIR taps, odd length, unit DC gain. The transition
/// band spans 0.8..1.2 x cutoff.
std::vector<double> design_low_pass(double fs_hz, double cutoff_hz);

/// Zero-phase application of design_low_pass with edge-value extension.
std::vector<double> low_pass(std::span<const double> x, double fs_hz,
                             double cutoff_hz = kLowPassCutoffHz);

/// One FeatureFrame per 100 ms window.
std::vector<FeatureFrame> featurize(const Waveform& w, double speed_mps);

}  // namespace dsp
}  // namespace railevent
