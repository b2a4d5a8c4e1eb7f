#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "railevent/segment.hpp"

namespace railevent::cnn {

inline constexpr double kSeluLambda = 1.0507009873554805;
inline constexpr double kSeluAlpha = 1.6732632423543772;

/// Layer sizes. Conv1 has one set of kernels per input series; conv2 slides
/// square kernels over the stacked (series x kernels) by time image.
struct Architecture {
  std::size_t series = kFeatureCount;
  std::size_t conv1_kernels = 3;
  std::size_t conv1_width = 11;
  std::size_t conv2_kernels = 7;
  std::size_t conv2_size = 11;
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 32;
  std::size_t classes = kClassCount;

  std::size_t maps() const { return series * conv1_kernels; }
  std::size_t conv2_rows() const { return maps() - conv2_size + 1; }
  std::size_t pooled() const { return conv2_kernels * conv2_rows(); }
  std::size_t dense_inputs() const { return pooled() + 1; }
  std::size_t min_frames() const { return conv1_width + conv2_size - 1; }

  void validate() const;
  bool operator==(const Architecture&) const = default;
};

/// Offsets of each parameter block inside the flat parameter vector.
struct Layout {
  explicit Layout(const Architecture& a);

  bool is_bias(std::size_t index) const;

  std::size_t conv1_w, conv1_b, conv2_w, conv2_b, dense1_w, dense1_b, dense2_w, dense2_b, out_w,
      out_b, total;
};

/// Features enter the network as log(feature + kCompressFloor) before
/// standardization; the 14 quantities span several decades across materials
/// and speeds.
inline constexpr double kCompressFloor = 1e-9;
double compress(double feature);

/// Per-series and speed standardization statistics from the training split.
struct Standardizer {
  std::vector<double> feature_mean;
  std::vector<double> feature_std;
  double speed_mean = 0.0;
  double speed_std = 1.0;

  static Standardizer identity(std::size_t series);
  bool operator==(const Standardizer&) const = default;
};

struct TrainConfig {
  double learning_rate = 0.01;
  int epochs = 60;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  double momentum = 0.9;
  /// L2 penalty on weights (not biases), added to the gradient.
  double weight_decay = 1e-3;
  /// Keep conv1 kernels zero-mean after every step. Features are log-compressed,
  /// so this makes conv1 blind to a constant gain on any series.
  bool zero_mean_conv1 = true;

  void validate() const;
};

struct CnnModel;

/// Subtracts each conv1 kernel's mean from its taps.
void center_conv1(CnnModel& m);

struct CnnModel {
  static constexpr int kFormatVersion = 1;

  Architecture arch;
  std::vector<double> params;
  Standardizer standardizer;

  /// Parameters drawn uniformly with variance 1/fan_in; biases zero.
  static CnnModel initialize(const Architecture& arch, std::uint64_t seed);
  static CnnModel zeros(const Architecture& arch);

  void validate() const;
  bool operator==(const CnnModel&) const = default;
};

/// series-major features (series x frames), speed in m/s, class label.
struct SegmentTensor {
  std::size_t frames = 0;
  std::vector<double> features;
  double speed_mps = 0.0;
  MaterialClass label = MaterialClass::none;

  double at(std::size_t series, std::size_t t) const { return features[series * frames + t]; }
};

SegmentTensor to_tensor(const LabeledSegment& seg);
std::vector<SegmentTensor> to_tensors(std::span<const LabeledSegment> segs);

/// Intermediate activations of one forward pass.
struct Activations {
  std::size_t conv1_len = 0;
  std::size_t conv2_len = 0;
  std::vector<double> input;       // standardized series x frames
  std::vector<double> conv1;       // maps x conv1_len
  std::vector<double> conv2;       // conv2_kernels x conv2_rows x conv2_len
  std::vector<std::size_t> argmax;  // pooled -> time index in conv2_len
  std::vector<double> dense_in;    // pooled + speed
  std::vector<double> z1, a1, z2, a2, logits, probs;
};

double selu(double z);
double selu_derivative(double z);
std::vector<double> softmax(std::span<const double> logits);

/// -sum y_k log(max(p_k, 1e-12)).
double cross_entropy(std::span<const double> probs, std::span<const double> one_hot);
double cross_entropy(std::span<const double> probs, MaterialClass label);

Activations forward_pass(const CnnModel& m, const SegmentTensor& s);
std::vector<double> forward(const CnnModel& m, const SegmentTensor& s);

struct Gradient {
  double loss = 0.0;  // mean cross-entropy over the batch
  std::vector<double> params;
};

/// Exact gradient of the mean batch loss; max-pool routes to the first argmax.
Gradient backward(const CnnModel& m, std::span<const SegmentTensor> batch);

struct Prediction {
  MaterialClass cls = MaterialClass::none;
  bool is_event = false;
};

/// argmax with lowest index on ties.
Prediction predict_from_probs(std::span<const double> probs);
Prediction predict(const CnnModel& m, const SegmentTensor& s);

Standardizer fit_standardizer(std::span<const SegmentTensor> train, std::size_t series);

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_binary_accuracy = 0.0;
  double val_class_accuracy = 0.0;
  double val_loss = 0.0;
};

struct TrainOutcome {
  CnnModel model;
  int best_epoch = 0;
  std::vector<EpochStats> history;
};

/// Momentum SGD on shuffled mini-batches. Keeps the epoch with the best
/// validation accuracy (binary, then per-class, then lower validation loss,
/// earliest on exact ties); without a validation set the training split is
/// used instead.
TrainOutcome train(std::span<const SegmentTensor> train_set, std::span<const SegmentTensor> val_set,
                   const TrainConfig& cfg, const Architecture& arch = {});

}  // namespace railevent::cnn
