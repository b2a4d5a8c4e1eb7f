#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "railevent/classical.hpp"
#include "railevent/cnn.hpp"
#include "railevent/segment.hpp"

namespace railevent::eval {

struct SplitSpec {
  double train = 0.40;
  double val = 0.30;
  double test = 0.30;
  std::uint64_t seed = 0;
  bool stratified = true;

  void validate() const;
};

/// What the splitter needs to know about one item.
struct SplitKey {
  bool is_event = false;
  double speed_mps = 0.0;
};

/// Item indices per part; disjoint, union = all, each sorted ascending.
struct Split {
  std::vector<std::size_t> train, val, test;
};

/// Largest-remainder apportionment of `total` over `fractions`.
std::vector<std::size_t> apportion(std::size_t total, std::span<const double> fractions);

/// Stratified by (is_event, speed); part sizes are the largest-remainder
/// apportionment of the total.
Split split(std::span<const SplitKey> keys, const SplitSpec& spec);

enum class Mode { binary, multiclass };

/// Square confusion matrix; rows are truth, columns prediction.
struct Confusion {
  std::size_t classes = 0;
  std::vector<std::size_t> counts;

  explicit Confusion(std::size_t n = 0) : classes(n), counts(n * n, 0) {}
  std::size_t at(std::size_t truth, std::size_t predicted) const { return counts[truth * classes + predicted]; }
  std::size_t row_sum(std::size_t truth) const;
  std::size_t total() const;
  std::size_t correct() const;
  bool operator==(const Confusion&) const = default;
};

struct Outcome {
  MaterialClass truth = MaterialClass::none;
  MaterialClass predicted = MaterialClass::none;
  bool predicted_event = false;
};

struct EvalResult {
  double accuracy = 0.0;
  Confusion confusion;
};

/// Binary mode collapses classes to event / non-event.
EvalResult evaluate(std::span<const Outcome> outcomes, Mode mode);

using Predictor = std::function<Outcome(const LabeledSegment&)>;
EvalResult evaluate(std::span<const LabeledSegment> test, const Predictor& predictor, Mode mode);

Predictor classical_predictor(const classical::ThresholdModel& m);
Predictor cnn_predictor(const cnn::CnnModel& m);

struct Summary {
  double max = 0.0;
  double min = 0.0;
  double mean = 0.0;
};

Summary summarize(std::span<const double> accuracies);

inline constexpr std::array<std::string_view, 3> kMethods = {"dl-1", "classical-1", "classical-vel"};

struct SensorResult {
  std::string sensor;
  double accuracy = 0.0;
  Confusion binary;
  Confusion multiclass;  // dl-1 only; empty otherwise
};

struct MethodResult {
  std::string method;
  std::vector<SensorResult> sensors;

  Summary summary() const;
};

struct Report {
  std::vector<MethodResult> methods;

  const MethodResult* find(std::string_view method) const;
  double accuracy(std::string_view method, std::string_view sensor) const;
};

/// Rows: methods; columns: max / min / mean accuracy in percent, one decimal.
std::string render_table(const Report& r);
/// method,sensor,accuracy rows, then method,max|min|mean,value summary rows.
std::string render_csv(const Report& r);
/// Inverse of render_csv for the per-sensor rows (summary rows are checked).
Report parse_csv(std::string_view csv);
std::string render_confusions(const Report& r);

struct BenchmarkOptions {
  std::uint64_t seed = 0;
  std::size_t n_events = 60;
  std::size_t n_regular = 96;
  classical::SaParams sa{};
  std::size_t sa_chains = 4;
  double fp_weight = 2.0;
  cnn::TrainConfig cnn{};
  cnn::Architecture arch{};
};

struct SensorModels {
  std::string sensor;
  classical::ThresholdModel classical_plain;
  classical::ThresholdModel classical_vel;
  cnn::CnnModel dl;
};

struct BenchmarkResult {
  Split split;
  std::vector<SensorModels> models;
  Report report;
};

/// Groups featurized segments per sensor, aligned by recording id.
std::map<std::string, std::vector<LabeledSegment>> by_sensor(std::span<const LabeledSegment> segs);

std::vector<SplitKey> split_keys(std::span<const LabeledSegment> segs);

template <typename T>
std::vector<T> pick(std::span<const T> items, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(items[i]);
  return out;
}

/// The split shared by every sensor and method, drawn from one sensor's
/// segments (recordings align by id across sensors).
Split benchmark_split(std::span<const LabeledSegment> reference, std::uint64_t master_seed);

/// normalize_by_speed selects classical-vel over classical-1.
classical::ThresholdModel train_classical_model(std::span<const LabeledSegment> train, const BenchmarkOptions& opts,
                                                const std::string& sensor, bool normalize_by_speed);
cnn::CnnModel train_cnn_model(std::span<const LabeledSegment> train, std::span<const LabeledSegment> val,
                              const BenchmarkOptions& opts, const std::string& sensor);

/// Binary accuracy on `test`; the multiclass confusion is filled for dl-1.
SensorResult score_classical(const std::string& sensor, std::span<const LabeledSegment> test,
                             const classical::ThresholdModel& m);
SensorResult score_cnn(const std::string& sensor, std::span<const LabeledSegment> test, const cnn::CnnModel& m);

/// Trains all three methods per sensor on the train split (dl-1 also uses the
/// validation split for model selection) and evaluates on the test split.
BenchmarkResult run_benchmark(const std::vector<SensorProfile>& sensors,
                              std::span<const LabeledSegment> segments, const BenchmarkOptions& opts);

/// Generates the default dataset from opts.seed, then runs run_benchmark.
BenchmarkResult run_benchmark(const BenchmarkOptions& opts);

}  // namespace railevent::eval
