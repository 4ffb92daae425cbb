// Copyright 2026 The gmfsim Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

// Small differentiable classifiers with hand-written backprop.
//
// Parameters live in one flat DenseVector, layer-major and row-major
// within each layer:
//
//   LOGREG  W[C x F], b[C]
//   MLP1    W1[H x F], b1[H], W2[C x H], b2[C]   (tanh hidden layer)
//
// The loss is mean softmax cross-entropy over the batch.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gmf/data.hpp"
#include "gmf/error.hpp"
#include "gmf/grad_core.hpp"

namespace gmf {

enum class ModelKind { kLogReg, kMlp1 };

inline std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::kLogReg ? "logreg" : "mlp1";
}

struct ModelSpec {
  ModelKind kind = ModelKind::kLogReg;
  std::size_t n_features = 0;
  std::size_t n_classes = 0;
  std::size_t hidden_units = 0;  // MLP1 only

  void validate() const {
    if (n_features == 0 || n_classes < 2) {
      throw PreconditionError("ModelSpec: need n_features >= 1 and n_classes >= 2");
    }
    if (kind == ModelKind::kMlp1 && hidden_units == 0) {
      throw PreconditionError("ModelSpec: MLP1 needs hidden_units >= 1");
    }
  }

  std::size_t param_count() const {
    if (kind == ModelKind::kLogReg) return n_classes * n_features + n_classes;
    return hidden_units * n_features + hidden_units + n_classes * hidden_units + n_classes;
  }
};

struct Batch {
  std::size_t n_features = 0;
  std::vector<double> features;  // row-major, size() x n_features
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * n_features, n_features);
  }
};

inline Batch make_batch(const Dataset& ds, std::span<const std::size_t> indices) {
  Batch b;
  b.n_features = ds.n_features();
  b.features.reserve(indices.size() * ds.n_features());
  for (auto i : indices) {
    auto r = ds.row(i);
    b.features.insert(b.features.end(), r.begin(), r.end());
    b.labels.push_back(ds.label(i));
  }
  return b;
}

// Glorot-uniform weights, zero biases.
inline DenseVector init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  auto rng = make_rng(seed, 0x1417);
  DenseVector w(spec.param_count());
  auto fill = [&](std::size_t offset, std::size_t fan_out, std::size_t fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < fan_out * fan_in; ++i) w[offset + i] = dist(rng);
  };
  if (spec.kind == ModelKind::kLogReg) {
    fill(0, spec.n_classes, spec.n_features);
  } else {
    const std::size_t h = spec.hidden_units;
    fill(0, h, spec.n_features);
    fill(h * spec.n_features + h, spec.n_classes, h);
  }
  return w;
}

namespace detail {

// Views into the flat parameter (or gradient) vector.
template <class T>
struct Layers {
  std::span<T> w1, b1, w2, b2;  // w2/b2 empty for LOGREG

  Layers(const ModelSpec& spec, std::span<T> flat) {
    const std::size_t f = spec.n_features;
    const std::size_t c = spec.n_classes;
    if (spec.kind == ModelKind::kLogReg) {
      w1 = flat.subspan(0, c * f);
      b1 = flat.subspan(c * f, c);
    } else {
      const std::size_t h = spec.hidden_units;
      w1 = flat.subspan(0, h * f);
      b1 = flat.subspan(h * f, h);
      w2 = flat.subspan(h * f + h, c * h);
      b2 = flat.subspan(h * f + h + c * h, c);
    }
  }
};

// out = W x + b for W[rows x cols]
inline void affine(std::span<const double> w, std::span<const double> b, std::span<const double> x,
                   std::span<double> out) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < out.size(); ++r) {
    double acc = b[r];
    const double* wr = w.data() + r * cols;
    for (std::size_t j = 0; j < cols; ++j) acc += wr[j] * x[j];
    out[r] = acc;
  }
}

// Forward pass for one sample. Fills hidden activations (MLP1) and logits.
inline void forward(const ModelSpec& spec, const Layers<const double>& p, std::span<const double> x,
                    std::span<double> hidden, std::span<double> logits) {
  if (spec.kind == ModelKind::kLogReg) {
    affine(p.w1, p.b1, x, logits);
  } else {
    affine(p.w1, p.b1, x, hidden);
    for (double& h : hidden) h = std::tanh(h);
    affine(p.w2, p.b2, hidden, logits);
  }
}

// In-place softmax; returns log-sum-exp of the input logits.
inline double softmax_inplace(std::span<double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double& v : z) s += (v = std::exp(v - mx));
  for (double& v : z) v /= s;
  return mx + std::log(s);
}

inline void check_input(const ModelSpec& spec, const DenseVector& w, std::size_t n_features) {
  spec.validate();
  detail::check_dims(w.dim(), spec.param_count(), "model parameters");
  detail::check_dims(n_features, spec.n_features, "model features");
}

}  // namespace detail

struct LossGrad {
  double loss;
  DenseVector grad;
};

inline LossGrad loss_and_grad(const ModelSpec& spec, const DenseVector& w, const Batch& batch) {
  detail::check_input(spec, w, batch.n_features);
  if (batch.size() == 0) throw PreconditionError("loss_and_grad: empty batch");

  const detail::Layers<const double> p(spec, w.values());
  DenseVector grad(spec.param_count());
  detail::Layers<double> g(spec, grad.values());

  const std::size_t c_n = spec.n_classes;
  const std::size_t h_n = spec.hidden_units;
  std::vector<double> hidden(h_n), probs(c_n), dhidden(h_n);
  double loss = 0.0;

  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto x = batch.row(i);
    const auto y = static_cast<std::size_t>(batch.labels[i]);
    if (y >= c_n) throw PreconditionError("loss_and_grad: label out of range");
    detail::forward(spec, p, x, hidden, probs);
    const double zy = probs[y];
    loss += detail::softmax_inplace(probs) - zy;
    probs[y] -= 1.0;  // dL/dlogits

    // Output layer: inputs are x (LOGREG) or the hidden activations (MLP1).
    const bool mlp = spec.kind == ModelKind::kMlp1;
    std::span<const double> in = mlp ? std::span<const double>(hidden) : x;
    std::span<double> gw = mlp ? g.w2 : g.w1;
    std::span<double> gb = mlp ? g.b2 : g.b1;
    for (std::size_t c = 0; c < c_n; ++c) {
      const double d = probs[c];
      double* row = gw.data() + c * in.size();
      for (std::size_t j = 0; j < in.size(); ++j) row[j] += d * in[j];
      gb[c] += d;
    }
    if (mlp) {
      for (std::size_t j = 0; j < h_n; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < c_n; ++c) acc += probs[c] * p.w2[c * h_n + j];
        dhidden[j] = acc * (1.0 - hidden[j] * hidden[j]);
      }
      for (std::size_t j = 0; j < h_n; ++j) {
        double* row = g.w1.data() + j * x.size();
        for (std::size_t f = 0; f < x.size(); ++f) row[f] += dhidden[j] * x[f];
        g.b1[j] += dhidden[j];
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& v : grad.values()) v *= inv;
  loss *= inv;
  if (!std::isfinite(loss) || !grad.all_finite()) {
    throw NumericError("loss_and_grad: non-finite loss or gradient");
  }
  return {loss, std::move(grad)};
}

struct Evaluation {
  double accuracy;
  double loss;
};

// Top-1 accuracy and mean loss. Ties in the logits go to the lowest class.
inline Evaluation evaluate(const ModelSpec& spec, const DenseVector& w, const Dataset& ds) {
  detail::check_input(spec, w, ds.n_features());
  if (ds.n_samples() == 0) throw PreconditionError("evaluate: empty dataset");
  const detail::Layers<const double> p(spec, w.values());
  std::vector<double> hidden(spec.hidden_units), z(spec.n_classes);
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t i = 0; i < ds.n_samples(); ++i) {
    detail::forward(spec, p, ds.row(i), hidden, z);
    const auto y = static_cast<std::size_t>(ds.label(i));
    const auto pred = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
    if (pred == y) ++correct;
    const double zy = z[y];
    loss += detail::softmax_inplace(z) - zy;
  }
  const double n = static_cast<double>(ds.n_samples());
  return {static_cast<double>(correct) / n, loss / n};
}

// Cycles through a fixed index set in seeded, per-epoch shuffled order.
// A batch that runs past the end of an epoch continues into the next one.
class BatchSampler {
 public:
  BatchSampler(std::vector<std::size_t> indices, std::uint64_t seed, std::uint64_t stream)
      : order_(std::move(indices)), rng_(make_rng(seed, stream)) {
    if (order_.empty()) throw PreconditionError("BatchSampler: empty index set");
    std::shuffle(order_.begin(), order_.end(), rng_);
  }

  // Draws min(batch_size, population) indices.
  std::vector<std::size_t> next(std::size_t batch_size) {
    const std::size_t b = std::min(batch_size, order_.size());
    std::vector<std::size_t> out;
    out.reserve(b);
    while (out.size() < b) {
      if (cursor_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        cursor_ = 0;
      }
      out.push_back(order_[cursor_++]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::mt19937_64 rng_;
  std::size_t cursor_ = 0;
};

}  // namespace gmf
