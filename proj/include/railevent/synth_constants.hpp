#pragma once

// Signal-model constants for the synthetic recording generator. Only the
// ordering between materials and the measurable generator contracts are
// load-bearing; the individual numbers are free choices.

#include <array>
#include <cstddef>

namespace railevent::synth {

struct Partial {
  double freq_hz;
  double weight;
};

struct Signature {
  std::array<Partial, 3> partials;
  std::size_t partial_count;
  double decay_s;           // exponential envelope time constant
  double amplitude_per_mps;  // peak envelope amplitude in m/s^2 per m/s of train speed
  double echo_delay_s;      // 0 disables the secondary burst
  double echo_gain;
  double lift_freq_hz;      // one-cycle low-frequency pulse (wheel lift); 0 disables
  double lift_gain;         // relative to amplitude
};

// steel: high frequency, high amplitude
inline constexpr Signature kSteel{{{{700.0, 0.6}, {930.0, 0.4}, {0.0, 0.0}}}, 2, 0.060, 6.0, 0.0, 0.0, 35.0, 0.25};
// wood: mid band
inline constexpr Signature kWood{{{{420.0, 0.65}, {600.0, 0.35}, {0.0, 0.0}}}, 2, 0.045, 3.2, 0.0, 0.0, 30.0, 0.25};
// stone: mid-low band with a secondary burst
inline constexpr Signature kStone{{{{300.0, 0.55}, {480.0, 0.45}, {0.0, 0.0}}}, 2, 0.050, 3.4, 0.045, 0.55, 30.0, 0.25};
// bone: low amplitude, fastest decay
inline constexpr Signature kBone{{{{540.0, 0.5}, {820.0, 0.5}, {0.0, 0.0}}}, 2, 0.035, 3.0, 0.0, 0.0, 45.0, 0.2};

// Switch: broad transient with its energy below 300 Hz. Part of its amplitude is
// speed independent so it clears plain background at 5 km/h while staying under
// the weakest impact bursts at 15 km/h.
inline constexpr Signature kSwitch{{{{60.0, 0.45}, {130.0, 0.35}, {210.0, 0.20}}}, 3, 0.090, 0.45, 0.0, 0.0, 0.0, 0.0};
inline constexpr double kSwitchBaseAmplitude = 1.2;
// Rail joint: smaller transient repeated for each axle of a bogie.
inline constexpr Signature kRailJoint{{{{170.0, 0.6}, {250.0, 0.4}, {0.0, 0.0}}}, 2, 0.018, 0.7, 0.0, 0.0, 0.0, 0.0};
inline constexpr double kBogieWheelbaseM = 1.8;

inline constexpr double kAttackS = 0.001;
// Per-run multiplicative jitter of partial frequencies (+-).
inline constexpr double kFreqJitter = 0.04;

// Background noise: Gaussian, low-passed, soft-limited at kNoiseLimit * sigma.
inline constexpr double kNoiseLimit = 1.2;
inline constexpr double kDefaultNoiseRms = 0.3;
// Track-borne background RMS at the wheelset bearing: kTrackNoiseRms *
// (kTrackNoiseStill + (1 - kTrackNoiseStill) * speed / kTrackNoiseRefSpeed).
inline constexpr double kTrackNoiseRms = 0.3;
inline constexpr double kTrackNoiseStill = 0.5;
inline constexpr double kTrackNoiseRefSpeedMps = 15.0 / 3.6;
// Acquisition-chain noise present at every mount, not damped.
inline constexpr double kSensorFloorRms = 0.1;

// Sensor mounting damping.
inline constexpr double kWheelsetBearingDamping = 1.0;
inline constexpr double kBogieFrameDamping = 0.5;
inline constexpr double kCarBodyDamping = 0.15;

// Onset range inside a recording (seconds from start). Recordings are
// triggered shortly before the wheel reaches the object, so onsets cluster
// around the middle of a 3 s recording.
inline constexpr double kEventEarliestS = 1.0;
inline constexpr double kEventLatestS = 1.9;

}  // namespace railevent::synth
