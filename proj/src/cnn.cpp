#include "railevent/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "railevent/rng.hpp"

namespace railevent::cnn {

void Architecture::validate() const {
  if (series == 0 || conv1_kernels == 0 || conv1_width == 0 || conv2_kernels == 0 ||
      conv2_size == 0 || hidden1 == 0 || hidden2 == 0 || classes < 2) {
    throw std::invalid_argument("cnn architecture: all sizes must be positive");
  }
  if (maps() < conv2_size) throw std::invalid_argument("cnn architecture: conv2 taller than map stack");
}

Layout::Layout(const Architecture& a) {
  std::size_t at = 0;
  auto take = [&at](std::size_t n) {
    const std::size_t start = at;
    at += n;
    return start;
  };
  conv1_w = take(a.maps() * a.conv1_width);
  conv1_b = take(a.maps());
  conv2_w = take(a.conv2_kernels * a.conv2_size * a.conv2_size);
  conv2_b = take(a.conv2_kernels);
  dense1_w = take(a.hidden1 * a.dense_inputs());
  dense1_b = take(a.hidden1);
  dense2_w = take(a.hidden2 * a.hidden1);
  dense2_b = take(a.hidden2);
  out_w = take(a.classes * a.hidden2);
  out_b = take(a.classes);
  total = at;
}

bool Layout::is_bias(std::size_t i) const {
  return (i >= conv1_b && i < conv2_w) || (i >= conv2_b && i < dense1_w) || (i >= dense1_b && i < dense2_w) ||
         (i >= dense2_b && i < out_w) || i >= out_b;
}

Standardizer Standardizer::identity(std::size_t series) {
  Standardizer s;
  s.feature_mean.assign(series, 0.0);
  s.feature_std.assign(series, 1.0);
  return s;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train config: learning_rate must be positive");
  if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
  if (batch_size == 0) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("train config: momentum must lie in [0,1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("train config: weight_decay must be non-negative");
}

CnnModel CnnModel::zeros(const Architecture& arch) {
  arch.validate();
  CnnModel m;
  m.arch = arch;
  m.params.assign(Layout(arch).total, 0.0);
  m.standardizer = Standardizer::identity(arch.series);
  return m;
}

void center_conv1(CnnModel& m) {
  const Layout l(m.arch);
  const std::size_t w = m.arch.conv1_width;
  for (std::size_t k = 0; k < m.arch.maps(); ++k) {
    double* kernel = &m.params[l.conv1_w + k * w];
    const double mu = std::accumulate(kernel, kernel + w, 0.0) / static_cast<double>(w);
    for (std::size_t j = 0; j < w; ++j) kernel[j] -= mu;
  }
}

CnnModel CnnModel::initialize(const Architecture& arch, std::uint64_t seed) {
  CnnModel m = zeros(arch);
  const Layout l(arch);
  Rng rng(seed);
  auto fill = [&](std::size_t offset, std::size_t count, std::size_t fan_in) {
    const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i) m.params[offset + i] = rng.uniform(-bound, bound);
  };
  fill(l.conv1_w, l.conv1_b - l.conv1_w, arch.conv1_width);
  center_conv1(m);
  fill(l.conv2_w, l.conv2_b - l.conv2_w, arch.conv2_size * arch.conv2_size);
  fill(l.dense1_w, l.dense1_b - l.dense1_w, arch.dense_inputs());
  fill(l.dense2_w, l.dense2_b - l.dense2_w, arch.hidden1);
  fill(l.out_w, l.out_b - l.out_w, arch.hidden2);
  return m;
}

void CnnModel::validate() const {
  arch.validate();
  if (params.size() != Layout(arch).total) throw std::invalid_argument("cnn model: parameter count mismatch");
  for (double p : params) {
    if (!std::isfinite(p)) throw std::invalid_argument("cnn model: non-finite parameter");
  }
  if (standardizer.feature_mean.size() != arch.series || standardizer.feature_std.size() != arch.series) {
    throw std::invalid_argument("cnn model: standardizer size mismatch");
  }
}

SegmentTensor to_tensor(const LabeledSegment& seg) {
  SegmentTensor t;
  t.frames = seg.frames.size();
  t.features.assign(kFeatureCount * t.frames, 0.0);
  for (std::size_t f = 0; f < t.frames; ++f) {
    const auto q = seg.frames[f].quantities();
    for (std::size_t s = 0; s < kFeatureCount; ++s) t.features[s * t.frames + f] = q[s];
  }
  t.speed_mps = seg.speed_mps;
  t.label = seg.label;
  return t;
}

std::vector<SegmentTensor> to_tensors(std::span<const LabeledSegment> segs) {
  std::vector<SegmentTensor> out;
  out.reserve(segs.size());
  for (const auto& s : segs) out.push_back(to_tensor(s));
  return out;
}

double selu(double z) { return z > 0.0 ? kSeluLambda * z : kSeluLambda * kSeluAlpha * (std::exp(z) - 1.0); }

double selu_derivative(double z) { return z > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(z); }

std::vector<double> softmax(std::span<const double> logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - peak);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

double cross_entropy(std::span<const double> probs, std::span<const double> one_hot) {
  double loss = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (one_hot[k] != 0.0) loss -= one_hot[k] * std::log(std::max(probs[k], 1e-12));
  }
  return loss;
}

double cross_entropy(std::span<const double> probs, MaterialClass label) {
  return -std::log(std::max(probs[static_cast<std::size_t>(label)], 1e-12));
}

double compress(double feature) { return std::log(std::max(feature, 0.0) + kCompressFloor); }

namespace {

// y = W x + b with W rows x cols row-major.
void affine(const double* w, const double* b, std::span<const double> x, std::vector<double>& y,
            std::size_t rows) {
  y.assign(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = w + r * x.size();
    double acc = b[r];
    for (std::size_t c = 0; c < x.size(); ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

}  // namespace

Activations forward_pass(const CnnModel& m, const SegmentTensor& s) {
  const Architecture& a = m.arch;
  const Layout l(a);
  if (s.frames < a.min_frames()) throw std::invalid_argument("cnn forward: segment too short");
  if (s.features.size() != a.series * s.frames) throw std::invalid_argument("cnn forward: feature shape mismatch");
  const double* p = m.params.data();

  Activations act;
  const std::size_t T = s.frames;
  act.conv1_len = T - a.conv1_width + 1;
  act.conv2_len = act.conv1_len - a.conv2_size + 1;
  const std::size_t L1 = act.conv1_len, L2 = act.conv2_len;

  act.input.resize(a.series * T);
  for (std::size_t ser = 0; ser < a.series; ++ser) {
    const double mu = m.standardizer.feature_mean[ser];
    const double sd = m.standardizer.feature_std[ser];
    for (std::size_t t = 0; t < T; ++t) {
      act.input[ser * T + t] = (compress(s.features[ser * T + t]) - mu) / sd;
    }
  }

  act.conv1.assign(a.maps() * L1, 0.0);
  for (std::size_t map = 0; map < a.maps(); ++map) {
    const double* x = &act.input[(map / a.conv1_kernels) * T];
    const double* w = p + l.conv1_w + map * a.conv1_width;
    double* out = &act.conv1[map * L1];
    for (std::size_t t = 0; t < L1; ++t) {
      double acc = p[l.conv1_b + map];
      for (std::size_t j = 0; j < a.conv1_width; ++j) acc += w[j] * x[t + j];
      out[t] = acc;
    }
  }

  const std::size_t R = a.conv2_rows(), K = a.conv2_size;
  act.conv2.assign(a.conv2_kernels * R * L2, 0.0);
  for (std::size_t k = 0; k < a.conv2_kernels; ++k) {
    const double* w = p + l.conv2_w + k * K * K;
    for (std::size_t r = 0; r < R; ++r) {
      double* out = &act.conv2[(k * R + r) * L2];
      std::fill(out, out + L2, p[l.conv2_b + k]);
      for (std::size_t i = 0; i < K; ++i) {
        const double* row = &act.conv1[(r + i) * L1];
        for (std::size_t j = 0; j < K; ++j) {
          const double wij = w[i * K + j];
          for (std::size_t t = 0; t < L2; ++t) out[t] += wij * row[t + j];
        }
      }
    }
  }

  act.argmax.assign(a.pooled(), 0);
  act.dense_in.assign(a.dense_inputs(), 0.0);
  for (std::size_t c = 0; c < a.pooled(); ++c) {
    const double* row = &act.conv2[c * L2];
    const std::size_t best = static_cast<std::size_t>(std::max_element(row, row + L2) - row);
    act.argmax[c] = best;
    act.dense_in[c] = row[best];
  }
  act.dense_in[a.pooled()] = (s.speed_mps - m.standardizer.speed_mean) / m.standardizer.speed_std;

  affine(p + l.dense1_w, p + l.dense1_b, act.dense_in, act.z1, a.hidden1);
  act.a1.resize(a.hidden1);
  std::transform(act.z1.begin(), act.z1.end(), act.a1.begin(), selu);
  affine(p + l.dense2_w, p + l.dense2_b, act.a1, act.z2, a.hidden2);
  act.a2.resize(a.hidden2);
  std::transform(act.z2.begin(), act.z2.end(), act.a2.begin(), selu);
  affine(p + l.out_w, p + l.out_b, act.a2, act.logits, a.classes);
  act.probs = softmax(act.logits);
  return act;
}

std::vector<double> forward(const CnnModel& m, const SegmentTensor& s) { return forward_pass(m, s).probs; }

Gradient backward(const CnnModel& m, std::span<const SegmentTensor> batch) {
  if (batch.empty()) throw std::invalid_argument("cnn backward: empty batch");
  const Architecture& a = m.arch;
  const Layout l(a);
  const double* p = m.params.data();
  const double scale = 1.0 / static_cast<double>(batch.size());

  Gradient g;
  g.params.assign(l.total, 0.0);
  double* gp = g.params.data();

  std::vector<double> d_logits(a.classes), d_a2(a.hidden2), d_z2(a.hidden2), d_a1(a.hidden1),
      d_z1(a.hidden1), d_in(a.dense_inputs());
  for (const SegmentTensor& s : batch) {
    if (static_cast<std::size_t>(s.label) >= a.classes) throw std::invalid_argument("cnn backward: label out of range");
    const Activations act = forward_pass(m, s);
    g.loss += scale * cross_entropy(act.probs, s.label);

    for (std::size_t k = 0; k < a.classes; ++k) {
      d_logits[k] = scale * (act.probs[k] - (k == static_cast<std::size_t>(s.label) ? 1.0 : 0.0));
    }

    // Output layer.
    std::fill(d_a2.begin(), d_a2.end(), 0.0);
    for (std::size_t k = 0; k < a.classes; ++k) {
      gp[l.out_b + k] += d_logits[k];
      for (std::size_t h = 0; h < a.hidden2; ++h) {
        gp[l.out_w + k * a.hidden2 + h] += d_logits[k] * act.a2[h];
        d_a2[h] += p[l.out_w + k * a.hidden2 + h] * d_logits[k];
      }
    }
    for (std::size_t h = 0; h < a.hidden2; ++h) d_z2[h] = d_a2[h] * selu_derivative(act.z2[h]);

    std::fill(d_a1.begin(), d_a1.end(), 0.0);
    for (std::size_t h = 0; h < a.hidden2; ++h) {
      gp[l.dense2_b + h] += d_z2[h];
      for (std::size_t i = 0; i < a.hidden1; ++i) {
        gp[l.dense2_w + h * a.hidden1 + i] += d_z2[h] * act.a1[i];
        d_a1[i] += p[l.dense2_w + h * a.hidden1 + i] * d_z2[h];
      }
    }
    for (std::size_t h = 0; h < a.hidden1; ++h) d_z1[h] = d_a1[h] * selu_derivative(act.z1[h]);

    const std::size_t n_in = a.dense_inputs();
    std::fill(d_in.begin(), d_in.end(), 0.0);
    for (std::size_t h = 0; h < a.hidden1; ++h) {
      gp[l.dense1_b + h] += d_z1[h];
      for (std::size_t i = 0; i < n_in; ++i) {
        gp[l.dense1_w + h * n_in + i] += d_z1[h] * act.dense_in[i];
        d_in[i] += p[l.dense1_w + h * n_in + i] * d_z1[h];
      }
    }

    // Max-pool routes each pooled gradient to its argmax; conv2 then spreads
    // it back over the conv1 maps.
    const std::size_t L1 = act.conv1_len, R = a.conv2_rows(), K = a.conv2_size;
    std::vector<double> d_conv1(a.maps() * L1, 0.0);
    for (std::size_t k = 0; k < a.conv2_kernels; ++k) {
      for (std::size_t r = 0; r < R; ++r) {
        const std::size_t c = k * R + r;
        const double gv = d_in[c];
        if (gv == 0.0) continue;
        const std::size_t t = act.argmax[c];
        gp[l.conv2_b + k] += gv;
        for (std::size_t i = 0; i < K; ++i) {
          for (std::size_t j = 0; j < K; ++j) {
            const std::size_t src = (r + i) * L1 + t + j;
            gp[l.conv2_w + k * K * K + i * K + j] += gv * act.conv1[src];
            d_conv1[src] += gv * p[l.conv2_w + k * K * K + i * K + j];
          }
        }
      }
    }

    const std::size_t T = s.frames;
    for (std::size_t map = 0; map < a.maps(); ++map) {
      const double* x = &act.input[(map / a.conv1_kernels) * T];
      for (std::size_t t = 0; t < L1; ++t) {
        const double gv = d_conv1[map * L1 + t];
        if (gv == 0.0) continue;
        gp[l.conv1_b + map] += gv;
        for (std::size_t j = 0; j < a.conv1_width; ++j) gp[l.conv1_w + map * a.conv1_width + j] += gv * x[t + j];
      }
    }
  }
  return g;
}

Prediction predict_from_probs(std::span<const double> probs) {
  const std::size_t best = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  Prediction pr;
  pr.cls = static_cast<MaterialClass>(best);
  pr.is_event = pr.cls != MaterialClass::none;
  return pr;
}

Prediction predict(const CnnModel& m, const SegmentTensor& s) { return predict_from_probs(forward(m, s)); }

Standardizer fit_standardizer(std::span<const SegmentTensor> train, std::size_t series) {
  if (train.empty()) throw std::invalid_argument("fit_standardizer: empty training set");
  Standardizer st = Standardizer::identity(series);
  for (std::size_t ser = 0; ser < series; ++ser) {
    double sum = 0.0, sq = 0.0, n = 0.0;
    for (const SegmentTensor& s : train) {
      for (std::size_t t = 0; t < s.frames; ++t) {
        const double v = compress(s.at(ser, t));
        sum += v;
        sq += v * v;
        n += 1.0;
      }
    }
    const double mu = sum / n;
    const double var = std::max(0.0, sq / n - mu * mu);
    st.feature_mean[ser] = mu;
    st.feature_std[ser] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  double sum = 0.0, sq = 0.0;
  for (const SegmentTensor& s : train) {
    sum += s.speed_mps;
    sq += s.speed_mps * s.speed_mps;
  }
  const double n = static_cast<double>(train.size());
  st.speed_mean = sum / n;
  const double var = std::max(0.0, sq / n - st.speed_mean * st.speed_mean);
  st.speed_std = var > 0.0 ? std::sqrt(var) : 1.0;
  return st;
}

namespace {

struct Score {
  double binary = 0.0;
  double per_class = 0.0;
  double loss = 0.0;

  bool better_than(const Score& o) const {
    if (binary != o.binary) return binary > o.binary;
    if (per_class != o.per_class) return per_class > o.per_class;
    return loss < o.loss;
  }
};

Score score(const CnnModel& m, std::span<const SegmentTensor> set) {
  Score sc;
  for (const SegmentTensor& s : set) {
    const std::vector<double> probs = forward(m, s);
    const Prediction pr = predict_from_probs(probs);
    sc.binary += pr.is_event == (s.label != MaterialClass::none);
    sc.per_class += pr.cls == s.label;
    sc.loss += cross_entropy(probs, s.label);
  }
  const double n = static_cast<double>(set.size());
  sc.binary /= n;
  sc.per_class /= n;
  sc.loss /= n;
  return sc;
}

}  // namespace

TrainOutcome train(std::span<const SegmentTensor> train_set, std::span<const SegmentTensor> val_set,
                   const TrainConfig& cfg, const Architecture& arch) {
  cfg.validate();
  arch.validate();
  if (train_set.empty()) throw std::invalid_argument("cnn train: degenerate split (empty)");
  {
    std::vector<bool> seen(arch.classes, false);
    for (const auto& s : train_set) seen[static_cast<std::size_t>(s.label)] = true;
    if (std::count(seen.begin(), seen.end(), true) < 2) {
      throw std::invalid_argument("cnn train: degenerate split (fewer than 2 classes)");
    }
  }

  CnnModel model = CnnModel::initialize(arch, derive_seed(cfg.seed, "init"));
  model.standardizer = fit_standardizer(train_set, arch.series);

  const std::span<const SegmentTensor> selection = val_set.empty() ? train_set : val_set;
  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> velocity(model.params.size(), 0.0);
  std::vector<SegmentTensor> batch;
  const Layout layout(arch);

  TrainOutcome out;
  out.model = model;
  Score best{-1.0, -1.0, INFINITY};

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.below(i))]);
    }
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(train_set[order[i]]);
      const Gradient g = backward(model, batch);
      epoch_loss += g.loss * static_cast<double>(batch.size());
      for (std::size_t i = 0; i < velocity.size(); ++i) {
        const double decay = layout.is_bias(i) ? 0.0 : cfg.weight_decay * model.params[i];
        velocity[i] = cfg.momentum * velocity[i] - cfg.learning_rate * (g.params[i] + decay);
        model.params[i] += velocity[i];
      }
      if (cfg.zero_mean_conv1) center_conv1(model);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss / static_cast<double>(order.size());
    const Score sc = score(model, selection);
    stats.val_binary_accuracy = sc.binary;
    stats.val_class_accuracy = sc.per_class;
    stats.val_loss = sc.loss;
    out.history.push_back(stats);
    if (sc.better_than(best)) {
      best = sc;
      out.model = model;
      out.best_epoch = epoch;
    }
  }
  return out;
}

}  // namespace railevent::cnn
