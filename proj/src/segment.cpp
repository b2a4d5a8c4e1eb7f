#include "railevent/segment.hpp"

namespace railevent {

LabeledSegment featurize_recording(const LabeledRecording& rec, std::size_t recording_id) {
  LabeledSegment seg;
  seg.frames = dsp::featurize(rec.waveform, rec.speed_mps);
  seg.label = rec.label;
  seg.speed_mps = rec.speed_mps;
  seg.sensor_id = rec.sensor_id;
  seg.recording_id = recording_id;
  seg.seed = rec.provenance.seed;
  return seg;
}

std::vector<LabeledSegment> featurize_dataset(const Dataset& ds) {
  std::vector<LabeledSegment> out;
  out.reserve(ds.entries.size());
  for (const DatasetEntry& e : ds.entries) out.push_back(featurize_recording(e.recording, e.recording_id));
  return out;
}

}  // namespace railevent
