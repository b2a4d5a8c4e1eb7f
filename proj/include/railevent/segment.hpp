#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "railevent/signal.hpp"
#include "railevent/synthgen.hpp"

namespace railevent {

/// Feature-frame sequence of one recording with its ground truth.
struct LabeledSegment {
  std::vector<FeatureFrame> frames;
  MaterialClass label = MaterialClass::none;
  double speed_mps = 0.0;
  std::string sensor_id;
  std::size_t recording_id = 0;
  std::uint64_t seed = 0;

  bool is_event() const { return label != MaterialClass::none; }
};

/// Featurizes every entry of a dataset, preserving order.
std::vector<LabeledSegment> featurize_dataset(const Dataset& ds);

LabeledSegment featurize_recording(const LabeledRecording& rec, std::size_t recording_id);

}  // namespace railevent
