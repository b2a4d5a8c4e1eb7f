#include "railevent/classical.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "railevent/rng.hpp"

namespace railevent::classical {

void ThresholdModel::validate() const {
  for (double t : thresholds) {
    if (!std::isfinite(t)) throw std::invalid_argument("threshold model: non-finite threshold");
  }
  if (!(fp_weight >= 1.0) || !std::isfinite(fp_weight)) {
    throw std::invalid_argument("threshold model: fp_weight must be >= 1");
  }
}

void SaParams::validate() const {
  if (!(initial_temp > 0.0)) throw std::invalid_argument("sa: initial_temp must be positive");
  if (!(cooling > 0.0 && cooling < 1.0)) throw std::invalid_argument("sa: cooling must lie in (0,1)");
  if (iters_per_temp <= 0) throw std::invalid_argument("sa: iters_per_temp must be positive");
  if (!(min_temp > 0.0) || min_temp >= initial_temp) {
    throw std::invalid_argument("sa: min_temp must lie in (0, initial_temp)");
  }
  if (!(neighbor_scale > 0.0)) throw std::invalid_argument("sa: neighbor_scale must be positive");
}

Quantities reduce_quantities(const FeatureFrame& f, bool normalize_by_speed) {
  Quantities q{f.vel_pp, f.vel_rms, f.acc_pp, f.acc_rms,
               *std::max_element(f.octave.begin(), f.octave.end())};
  if (normalize_by_speed) {
    if (!(f.speed_mps > 0.0)) throw std::invalid_argument("reduce_quantities: zero speed");
    for (double& v : q) v /= f.speed_mps;
  }
  return q;
}

int WindowVerdict::vote_count() const {
  return static_cast<int>(std::count(votes.begin(), votes.end(), true));
}

WindowVerdict classify_window(const Quantities& q, const ThresholdModel& m) {
  WindowVerdict v;
  for (std::size_t i = 0; i < kQuantityCount; ++i) v.votes[i] = q[i] > m.thresholds[i];
  v.event = static_cast<std::size_t>(v.vote_count()) >= kMajority;
  return v;
}

SegmentVerdict classify_segment_detail(std::span<const FeatureFrame> frames, const ThresholdModel& m) {
  if (frames.empty()) throw std::invalid_argument("classify_segment: empty input");
  SegmentVerdict out;
  int best_votes = -1;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const WindowVerdict v = classify_window(reduce_quantities(frames[i], m.normalize_by_speed), m);
    out.event = out.event || v.event;
    if (v.vote_count() > best_votes) {
      best_votes = v.vote_count();
      out.strongest_frame = i;
      out.strongest = v;
    }
  }
  return out;
}

bool classify_segment(std::span<const FeatureFrame> frames, const ThresholdModel& m) {
  return classify_segment_detail(frames, m).event;
}

double weighted_loss(const ThresholdModel& m, std::span<const LabeledSegment> data) {
  if (data.empty()) throw std::invalid_argument("weighted_loss: empty data");
  std::size_t fn = 0, fp = 0;
  for (const LabeledSegment& s : data) {
    const bool predicted = classify_segment(s.frames, m);
    if (s.is_event() && !predicted) ++fn;
    if (!s.is_event() && predicted) ++fp;
  }
  return static_cast<double>(fn) + m.fp_weight * static_cast<double>(fp);
}

QuantityTable::QuantityTable(std::span<const LabeledSegment> data, bool normalize_by_speed) {
  offsets_.push_back(0);
  for (const LabeledSegment& s : data) {
    if (s.frames.empty()) throw std::invalid_argument("training segment without frames");
    Quantities mx;
    mx.fill(-INFINITY);
    for (const FeatureFrame& f : s.frames) {
      const Quantities q = reduce_quantities(f, normalize_by_speed);
      for (std::size_t i = 0; i < kQuantityCount; ++i) mx[i] = std::max(mx[i], q[i]);
      frames_.push_back(q);
    }
    offsets_.push_back(frames_.size());
    seg_max_.push_back(mx);
    is_event_.push_back(s.is_event());
  }
}

std::span<const Quantities> QuantityTable::frames(std::size_t seg) const {
  return std::span<const Quantities>(frames_).subspan(offsets_[seg], offsets_[seg + 1] - offsets_[seg]);
}

std::size_t QuantityTable::positives() const {
  return static_cast<std::size_t>(std::count(is_event_.begin(), is_event_.end(), true));
}

bool QuantityTable::predict(std::size_t seg, const Quantities& thresholds) const {
  // A segment can only fire if a majority of its per-quantity maxima exceed.
  std::size_t possible = 0;
  for (std::size_t i = 0; i < kQuantityCount; ++i) possible += seg_max_[seg][i] > thresholds[i];
  if (possible < kMajority) return false;
  for (const Quantities& q : frames(seg)) {
    std::size_t votes = 0;
    for (std::size_t i = 0; i < kQuantityCount; ++i) votes += q[i] > thresholds[i];
    if (votes >= kMajority) return true;
  }
  return false;
}

double QuantityTable::loss(const Quantities& thresholds, double fp_weight) const {
  std::size_t fn = 0, fp = 0;
  for (std::size_t s = 0; s < segments(); ++s) {
    const bool predicted = predict(s, thresholds);
    if (is_event_[s] && !predicted) ++fn;
    if (!is_event_[s] && predicted) ++fp;
  }
  return static_cast<double>(fn) + fp_weight * static_cast<double>(fp);
}

namespace {

// Linear-interpolated percentile of an unsorted sample, p in [0,1].
double percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<double> column(const QuantityTable& table, std::size_t q, int which) {
  std::vector<double> out;
  for (std::size_t s = 0; s < table.segments(); ++s) {
    if (which == 0 && table.is_event(s)) continue;
    out.push_back(table.segment_max(s)[q]);
  }
  return out;
}

void require_both_classes(const QuantityTable& table) {
  const std::size_t pos = table.positives();
  if (pos == 0 || pos == table.segments()) {
    throw std::invalid_argument("train_thresholds: degenerate training set");
  }
}

}  // namespace

Quantities initial_thresholds(const QuantityTable& table) {
  require_both_classes(table);
  Quantities out{};
  for (std::size_t q = 0; q < kQuantityCount; ++q) out[q] = percentile(column(table, q, 0), 0.95);
  return out;
}

Quantities step_scales(const QuantityTable& table) {
  Quantities out{};
  for (std::size_t q = 0; q < kQuantityCount; ++q) {
    const std::vector<double> all = column(table, q, 1);
    double iqr = percentile(all, 0.75) - percentile(all, 0.25);
    if (!(iqr > 0.0)) {
      const auto [lo, hi] = std::minmax_element(all.begin(), all.end());
      iqr = *hi - *lo;
    }
    out[q] = iqr > 0.0 ? iqr : 1.0;
  }
  return out;
}

TrainResult anneal(const QuantityTable& table, const SaParams& sa, double fp_weight,
                   bool normalize_by_speed) {
  sa.validate();
  if (!(fp_weight >= 1.0)) throw std::invalid_argument("train_thresholds: fp_weight must be >= 1");
  require_both_classes(table);

  Rng rng(sa.seed);
  const Quantities scales = step_scales(table);
  Quantities current = initial_thresholds(table);
  double current_loss = table.loss(current, fp_weight);

  TrainResult result;
  result.initial_loss = current_loss;
  result.model.fp_weight = fp_weight;
  result.model.normalize_by_speed = normalize_by_speed;
  result.model.thresholds = current;
  result.loss = current_loss;
  result.evaluations = 1;

  for (double temp = sa.initial_temp; temp >= sa.min_temp; temp *= sa.cooling) {
    for (int it = 0; it < sa.iters_per_temp; ++it) {
      Quantities candidate = current;
      const std::size_t k = static_cast<std::size_t>(rng.below(kQuantityCount));
      candidate[k] += rng.normal() * sa.neighbor_scale * scales[k];
      const double candidate_loss = table.loss(candidate, fp_weight);
      ++result.evaluations;
      const double delta = candidate_loss - current_loss;
      const double u = rng.uniform();
      if (delta <= 0.0 || u < std::exp(-delta / temp)) {
        current = candidate;
        current_loss = candidate_loss;
        if (current_loss < result.loss) {
          result.loss = current_loss;
          result.model.thresholds = current;
        }
      }
    }
  }
  return result;
}

ThresholdModel train_thresholds(std::span<const LabeledSegment> data, const SaParams& sa,
                                double fp_weight, bool normalize_by_speed) {
  const QuantityTable table(data, normalize_by_speed);
  return anneal(table, sa, fp_weight, normalize_by_speed).model;
}

TrainResult train_chains(std::span<const LabeledSegment> data, const SaParams& sa, double fp_weight,
                         bool normalize_by_speed, std::size_t chains) {
  if (chains == 0) throw std::invalid_argument("train_chains: need at least one chain");
  const QuantityTable table(data, normalize_by_speed);
  TrainResult best;
  for (std::size_t c = 0; c < chains; ++c) {
    SaParams chain = sa;
    chain.seed = derive_seed(sa.seed, static_cast<std::uint64_t>(c));
    TrainResult r = anneal(table, chain, fp_weight, normalize_by_speed);
    if (c == 0 || r.loss < best.loss) best = r;
  }
  return best;
}

}  // namespace railevent::classical
