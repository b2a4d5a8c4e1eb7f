#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "railevent/segment.hpp"

namespace railevent::classical {

/// vel_pp, vel_rms, acc_pp, acc_rms, max(octave)
inline constexpr std::size_t kQuantityCount = 5;
using Quantities = std::array<double, kQuantityCount>;
inline constexpr std::array<std::string_view, kQuantityCount> kQuantityNames = {"vel_pp", "vel_rms", "acc_pp",
                                                                               "acc_rms", "octave_max"};
inline constexpr std::size_t kMajority = kQuantityCount / 2 + 1;

struct ThresholdModel {
  static constexpr int kFormatVersion = 1;

  Quantities thresholds{};
  double fp_weight = 2.0;
  bool normalize_by_speed = false;

  void validate() const;
  bool operator==(const ThresholdModel&) const = default;
};

struct SaParams {
  double initial_temp = 2.0;
  double cooling = 0.95;
  int iters_per_temp = 200;
  double min_temp = 1e-3;
  double neighbor_scale = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

Quantities reduce_quantities(const FeatureFrame& f, bool normalize_by_speed);

struct WindowVerdict {
  std::array<bool, kQuantityCount> votes{};
  bool event = false;

  int vote_count() const;
};

/// vote_i = q_i > threshold_i; event when a majority (3 of 5) fires.
WindowVerdict classify_window(const Quantities& q, const ThresholdModel& m);

struct SegmentVerdict {
  bool event = false;
  /// Frame with the most votes (first on ties) and its breakdown.
  std::size_t strongest_frame = 0;
  WindowVerdict strongest;
};

/// Event iff any frame is an event.
SegmentVerdict classify_segment_detail(std::span<const FeatureFrame> frames, const ThresholdModel& m);
bool classify_segment(std::span<const FeatureFrame> frames, const ThresholdModel& m);

/// #FN + fp_weight * #FP over segments.
double weighted_loss(const ThresholdModel& m, std::span<const LabeledSegment> data);

/// Reduced quantities of every frame of every segment, flattened for the
/// inner loop of training.
class QuantityTable {
 public:
  QuantityTable(std::span<const LabeledSegment> data, bool normalize_by_speed);

  std::size_t segments() const { return is_event_.size(); }
  bool is_event(std::size_t seg) const { return is_event_[seg]; }
  std::span<const Quantities> frames(std::size_t seg) const;
  /// Per-segment maximum of each quantity.
  const Quantities& segment_max(std::size_t seg) const { return seg_max_[seg]; }
  std::size_t positives() const;

  bool predict(std::size_t seg, const Quantities& thresholds) const;
  double loss(const Quantities& thresholds, double fp_weight) const;

 private:
  std::vector<Quantities> frames_;
  std::vector<std::size_t> offsets_;
  std::vector<Quantities> seg_max_;
  std::vector<bool> is_event_;
};

/// Starting point: per-quantity 95th percentile of non-event segment maxima.
Quantities initial_thresholds(const QuantityTable& table);

/// Neighbour step scale: interquartile range of segment maxima per quantity.
Quantities step_scales(const QuantityTable& table);

struct TrainResult {
  ThresholdModel model;
  double loss = 0.0;
  double initial_loss = 0.0;
  std::size_t evaluations = 0;
};

/// Simulated annealing over the 5 thresholds. Returns the best state visited.
TrainResult anneal(const QuantityTable& table, const SaParams& sa, double fp_weight,
                   bool normalize_by_speed);

ThresholdModel train_thresholds(std::span<const LabeledSegment> data, const SaParams& sa,
                                double fp_weight, bool normalize_by_speed);

/// Independent chains seeded derive_seed(sa.seed, i); lowest loss wins, lowest
/// chain index on ties.
TrainResult train_chains(std::span<const LabeledSegment> data, const SaParams& sa, double fp_weight,
                         bool normalize_by_speed, std::size_t chains);

}  // namespace railevent::classical
