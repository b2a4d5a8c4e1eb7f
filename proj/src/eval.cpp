#include "railevent/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <fmt/format.h>

#include "railevent/rng.hpp"

namespace railevent::eval {

void SplitSpec::validate() const {
  if (train < 0.0 || val < 0.0 || test < 0.0) throw std::invalid_argument("split: negative fraction");
  if (std::abs(train + val + test - 1.0) > 1e-9) throw std::invalid_argument("split: fractions must sum to 1");
}

std::vector<std::size_t> apportion(std::size_t total, std::span<const double> fractions) {
  std::vector<std::size_t> out(fractions.size());
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double ideal = fractions[i] * static_cast<double>(total);
    out[i] = static_cast<std::size_t>(std::floor(ideal + 1e-9));
    assigned += out[i];
    rema.emplace_back(ideal - static_cast<double>(out[i]), i);
  }
  std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++out[rema[k % rema.size()].second];
  return out;
}

Split split(std::span<const SplitKey> keys, const SplitSpec& spec) {
  spec.validate();
  if (keys.size() < 10) throw std::invalid_argument("split: dataset too small (need >= 10 segments)");
  const std::array<double, 3> fractions = {spec.train, spec.val, spec.test};
  const std::vector<std::size_t> target = apportion(keys.size(), fractions);

  // Strata in a fixed order: (is_event, speed).
  std::map<std::pair<bool, long long>, std::vector<std::size_t>> strata_map;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto key = spec.stratified
                         ? std::make_pair(keys[i].is_event, std::llround(keys[i].speed_mps * 1e6))
                         : std::make_pair(false, 0LL);
    strata_map[key].push_back(i);
  }
  std::vector<std::vector<std::size_t>> strata;
  for (auto& [key, members] : strata_map) strata.push_back(std::move(members));

  Rng rng(derive_seed(spec.seed, "split"));
  for (auto& members : strata) {
    for (std::size_t i = members.size(); i > 1; --i) {
      std::swap(members[i - 1], members[static_cast<std::size_t>(rng.below(i))]);
    }
  }

  // Per-stratum quotas whose column sums match the global targets.
  const std::size_t S = strata.size();
  std::vector<std::array<std::size_t, 3>> quota(S);
  std::vector<std::size_t> row_left(S);
  std::array<std::size_t, 3> col_left = {target[0], target[1], target[2]};
  std::vector<std::tuple<double, std::size_t, std::size_t>> cells;
  for (std::size_t s = 0; s < S; ++s) {
    const double n = static_cast<double>(strata[s].size());
    std::size_t used = 0;
    for (std::size_t c = 0; c < 3; ++c) {
      const double ideal = fractions[c] * n;
      quota[s][c] = static_cast<std::size_t>(std::floor(ideal + 1e-9));
      used += quota[s][c];
      col_left[c] -= std::min(col_left[c], quota[s][c]);
      cells.emplace_back(ideal - static_cast<double>(quota[s][c]), s, c);
    }
    row_left[s] = strata[s].size() - used;
  }
  // Each cell rounds up at most once, so every stratum part stays within one of
  // its ideal size. Greedy by remainder first, then augmenting paths over the
  // (stratum, part) cells for whatever the greedy pass could not place.
  std::stable_sort(cells.begin(), cells.end(),
                   [](const auto& a, const auto& b) { return std::get<0>(a) > std::get<0>(b); });
  std::vector<std::array<bool, 3>> raised(S, std::array<bool, 3>{false, false, false});
  for (const auto& [frac, s, c] : cells) {
    if (frac > 1e-9 && row_left[s] > 0 && col_left[c] > 0) {
      raised[s][c] = true;
      --row_left[s];
      --col_left[c];
    }
  }
  auto augment = [&](std::size_t from, bool whole_cells) {
    // BFS over strata; prev_row[s] = (stratum, part) step that reached s.
    std::vector<std::pair<std::size_t, std::size_t>> prev(S, {S, 0});
    std::vector<bool> seen(S, false);
    std::vector<std::size_t> queue{from};
    seen[from] = true;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const std::size_t s = queue[head];
      for (std::size_t c = 0; c < 3; ++c) {
        if (raised[s][c]) continue;
        const double frac = fractions[c] * static_cast<double>(strata[s].size()) - static_cast<double>(quota[s][c]);
        if (!whole_cells && frac <= 1e-9) continue;
        if (col_left[c] > 0) {
          // flip the path back to `from`
          std::size_t row = s, col = c;
          while (true) {
            raised[row][col] = true;
            if (row == from) break;
            const auto [back, via] = prev[row];
            raised[row][via] = false;
            row = back;
            col = via;
          }
          --row_left[from];
          --col_left[c];
          return true;
        }
        for (std::size_t t = 0; t < S; ++t) {
          if (!seen[t] && raised[t][c]) {
            seen[t] = true;
            prev[t] = {s, c};
            queue.push_back(t);
          }
        }
      }
    }
    return false;
  };
  for (std::size_t s = 0; s < S; ++s) {
    while (row_left[s] > 0) {
      if (!augment(s, false) && !augment(s, true)) throw std::logic_error("split: apportionment failed");
    }
  }
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t c = 0; c < 3; ++c) quota[s][c] += raised[s][c];
  }

  Split out;
  for (std::size_t s = 0; s < S; ++s) {
    const auto& m = strata[s];
    const std::size_t a = quota[s][0], b = quota[s][0] + quota[s][1];
    out.train.insert(out.train.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(a));
    out.val.insert(out.val.end(), m.begin() + static_cast<std::ptrdiff_t>(a), m.begin() + static_cast<std::ptrdiff_t>(b));
    out.test.insert(out.test.end(), m.begin() + static_cast<std::ptrdiff_t>(b), m.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::size_t Confusion::row_sum(std::size_t truth) const {
  std::size_t s = 0;
  for (std::size_t c = 0; c < classes; ++c) s += at(truth, c);
  return s;
}

std::size_t Confusion::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

std::size_t Confusion::correct() const {
  std::size_t s = 0;
  for (std::size_t c = 0; c < classes; ++c) s += at(c, c);
  return s;
}

EvalResult evaluate(std::span<const Outcome> outcomes, Mode mode) {
  if (outcomes.empty()) throw std::invalid_argument("evaluate: empty test set");
  EvalResult r;
  r.confusion = Confusion(mode == Mode::binary ? 2 : kClassCount);
  for (const Outcome& o : outcomes) {
    std::size_t truth, predicted;
    if (mode == Mode::binary) {
      truth = o.truth != MaterialClass::none;
      predicted = o.predicted_event;
    } else {
      truth = static_cast<std::size_t>(o.truth);
      predicted = static_cast<std::size_t>(o.predicted);
    }
    ++r.confusion.counts[truth * r.confusion.classes + predicted];
  }
  r.accuracy = static_cast<double>(r.confusion.correct()) / static_cast<double>(r.confusion.total());
  return r;
}

EvalResult evaluate(std::span<const LabeledSegment> test, const Predictor& predictor, Mode mode) {
  std::vector<Outcome> outcomes;
  outcomes.reserve(test.size());
  for (const LabeledSegment& s : test) outcomes.push_back(predictor(s));
  return evaluate(outcomes, mode);
}

Predictor classical_predictor(const classical::ThresholdModel& m) {
  return [m](const LabeledSegment& s) {
    Outcome o;
    o.truth = s.label;
    o.predicted_event = classical::classify_segment(s.frames, m);
    // Binary detector: an event is reported without a material.
    o.predicted = MaterialClass::none;
    return o;
  };
}

Predictor cnn_predictor(const cnn::CnnModel& m) {
  return [m](const LabeledSegment& s) {
    const cnn::Prediction p = cnn::predict(m, cnn::to_tensor(s));
    return Outcome{s.label, p.cls, p.is_event};
  };
}

Summary summarize(std::span<const double> accuracies) {
  if (accuracies.empty()) throw std::invalid_argument("summarize: empty input");
  Summary s;
  s.max = *std::max_element(accuracies.begin(), accuracies.end());
  s.min = *std::min_element(accuracies.begin(), accuracies.end());
  s.mean = std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / static_cast<double>(accuracies.size());
  // Guard the ordering against rounding in the mean.
  s.mean = std::clamp(s.mean, s.min, s.max);
  return s;
}

Summary MethodResult::summary() const {
  std::vector<double> acc;
  for (const auto& s : sensors) acc.push_back(s.accuracy);
  return summarize(acc);
}

const MethodResult* Report::find(std::string_view method) const {
  for (const auto& m : methods) {
    if (m.method == method) return &m;
  }
  return nullptr;
}

double Report::accuracy(std::string_view method, std::string_view sensor) const {
  const MethodResult* m = find(method);
  if (m != nullptr) {
    for (const auto& s : m->sensors) {
      if (s.sensor == sensor) return s.accuracy;
    }
  }
  throw std::out_of_range(fmt::format("report: no result for {} / {}", method, sensor));
}

std::string render_table(const Report& r) {
  std::string out = fmt::format("{:<16}{:>16}{:>16}{:>16}\n", "method", "max accuracy", "min accuracy",
                                "mean accuracy");
  for (const auto& m : r.methods) {
    const Summary s = m.summary();
    out += fmt::format("{:<16}{:>15.1f}%{:>15.1f}%{:>15.1f}%\n", m.method, 100.0 * s.max, 100.0 * s.min,
                       100.0 * s.mean);
  }
  return out;
}

std::string render_csv(const Report& r) {
  std::string out = "method,sensor,accuracy\n";
  for (const auto& m : r.methods) {
    for (const auto& s : m.sensors) out += fmt::format("{},{},{}\n", m.method, s.sensor, s.accuracy);
  }
  for (const auto& m : r.methods) {
    const Summary s = m.summary();
    out += fmt::format("{},max,{}\n{},min,{}\n{},mean,{}\n", m.method, s.max, m.method, s.min, m.method, s.mean);
  }
  return out;
}

Report parse_csv(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line) || line != "method,sensor,accuracy") {
    throw std::runtime_error("report csv: missing header");
  }
  Report r;
  std::map<std::string, std::map<std::string, double>> summaries;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw std::runtime_error("report csv: malformed row: " + line);
    }
    const std::string method = line.substr(0, c1);
    const std::string sensor = line.substr(c1 + 1, c2 - c1 - 1);
    const double value = std::stod(line.substr(c2 + 1));
    if (sensor == "max" || sensor == "min" || sensor == "mean") {
      summaries[method][sensor] = value;
      continue;
    }
    auto it = std::find_if(r.methods.begin(), r.methods.end(), [&](const auto& m) { return m.method == method; });
    if (it == r.methods.end()) {
      r.methods.push_back({method, {}});
      it = std::prev(r.methods.end());
    }
    it->sensors.push_back({sensor, value, Confusion{}, Confusion{}});
  }
  for (const auto& m : r.methods) {
    const Summary s = m.summary();
    const auto found = summaries.find(m.method);
    if (found == summaries.end() || found->second.at("max") != s.max || found->second.at("min") != s.min ||
        found->second.at("mean") != s.mean) {
      throw std::runtime_error("report csv: summary rows disagree for " + m.method);
    }
  }
  return r;
}

std::string render_confusions(const Report& r) {
  std::string out;
  for (const auto& m : r.methods) {
    for (const auto& s : m.sensors) {
      out += fmt::format("{} / {}  binary [[TN {} FP {}] [FN {} TP {}]]\n", m.method, s.sensor, s.binary.at(0, 0),
                         s.binary.at(0, 1), s.binary.at(1, 0), s.binary.at(1, 1));
      if (s.multiclass.classes == 0) continue;
      out += "  truth\\pred";
      for (std::size_t c = 0; c < s.multiclass.classes; ++c) {
        out += fmt::format("{:>7}", to_string(static_cast<MaterialClass>(c)));
      }
      out += "\n";
      for (std::size_t t = 0; t < s.multiclass.classes; ++t) {
        out += fmt::format("  {:>10}", to_string(static_cast<MaterialClass>(t)));
        for (std::size_t c = 0; c < s.multiclass.classes; ++c) out += fmt::format("{:>7}", s.multiclass.at(t, c));
        out += "\n";
      }
    }
  }
  return out;
}

std::map<std::string, std::vector<LabeledSegment>> by_sensor(std::span<const LabeledSegment> segs) {
  std::map<std::string, std::vector<LabeledSegment>> out;
  for (const auto& s : segs) out[s.sensor_id].push_back(s);
  for (auto& [sensor, list] : out) {
    std::stable_sort(list.begin(), list.end(),
                     [](const auto& a, const auto& b) { return a.recording_id < b.recording_id; });
  }
  return out;
}

std::vector<SplitKey> split_keys(std::span<const LabeledSegment> segs) {
  std::vector<SplitKey> keys;
  keys.reserve(segs.size());
  for (const auto& s : segs) keys.push_back({s.is_event(), s.speed_mps});
  return keys;
}

Split benchmark_split(std::span<const LabeledSegment> reference, std::uint64_t master_seed) {
  SplitSpec spec;
  spec.seed = derive_seed(master_seed, "split");
  return split(split_keys(reference), spec);
}

classical::ThresholdModel train_classical_model(std::span<const LabeledSegment> train, const BenchmarkOptions& opts,
                                                const std::string& sensor, bool normalize_by_speed) {
  classical::SaParams sa = opts.sa;
  const std::string method = normalize_by_speed ? "classical-vel" : "classical-1";
  sa.seed = derive_seed(opts.seed, "sa/" + method + "/" + sensor);
  return classical::train_chains(train, sa, opts.fp_weight, normalize_by_speed, opts.sa_chains).model;
}

cnn::CnnModel train_cnn_model(std::span<const LabeledSegment> train, std::span<const LabeledSegment> val,
                              const BenchmarkOptions& opts, const std::string& sensor) {
  cnn::TrainConfig tc = opts.cnn;
  tc.seed = derive_seed(opts.seed, "cnn/" + sensor);
  return cnn::train(cnn::to_tensors(train), cnn::to_tensors(val), tc, opts.arch).model;
}

SensorResult score_classical(const std::string& sensor, std::span<const LabeledSegment> test,
                             const classical::ThresholdModel& m) {
  const EvalResult r = evaluate(test, classical_predictor(m), Mode::binary);
  return {sensor, r.accuracy, r.confusion, Confusion{}};
}

SensorResult score_cnn(const std::string& sensor, std::span<const LabeledSegment> test, const cnn::CnnModel& m) {
  const Predictor p = cnn_predictor(m);
  const EvalResult b = evaluate(test, p, Mode::binary);
  const EvalResult c = evaluate(test, p, Mode::multiclass);
  return {sensor, b.accuracy, b.confusion, c.confusion};
}

BenchmarkResult run_benchmark(const std::vector<SensorProfile>& sensors, std::span<const LabeledSegment> segments,
                              const BenchmarkOptions& opts) {
  if (sensors.empty()) throw std::invalid_argument("benchmark: no sensors");
  const auto grouped = by_sensor(segments);
  BenchmarkResult result;

  const auto& reference = grouped.at(sensors.front().id);
  result.split = benchmark_split(reference, opts.seed);

  MethodResult dl{"dl-1", {}}, plain{"classical-1", {}}, vel{"classical-vel", {}};
  for (const SensorProfile& sensor : sensors) {
    const std::vector<LabeledSegment>& segs = grouped.at(sensor.id);
    if (segs.size() != reference.size()) throw std::invalid_argument("benchmark: sensors have different recordings");
    const std::span<const LabeledSegment> all(segs);
    const auto train = pick(all, result.split.train);
    const auto val = pick(all, result.split.val);
    const auto test = pick(all, result.split.test);

    SensorModels models;
    models.sensor = sensor.id;
    models.classical_plain = train_classical_model(train, opts, sensor.id, false);
    models.classical_vel = train_classical_model(train, opts, sensor.id, true);
    models.dl = train_cnn_model(train, val, opts, sensor.id);

    dl.sensors.push_back(score_cnn(sensor.id, test, models.dl));
    plain.sensors.push_back(score_classical(sensor.id, test, models.classical_plain));
    vel.sensors.push_back(score_classical(sensor.id, test, models.classical_vel));
    result.models.push_back(std::move(models));
  }
  result.report.methods = {std::move(dl), std::move(plain), std::move(vel)};
  return result;
}

BenchmarkResult run_benchmark(const BenchmarkOptions& opts) {
  DatasetOptions d;
  d.n_events = opts.n_events;
  d.n_regular = opts.n_regular;
  d.seed = derive_seed(opts.seed, "dataset");
  const Dataset ds = generate_dataset(d);
  const auto segs = featurize_dataset(ds);
  return run_benchmark(ds.sensors, segs, opts);
}

}  // namespace railevent::eval
