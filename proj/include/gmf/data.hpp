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

// Labelled datasets: synthetic Gaussian blobs, CSV ingestion, stratified
// train/test split.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gmf/error.hpp"

namespace gmf {

// Seeds a generator from (seed, stream) so independent consumers of one
// experiment seed never share a random sequence.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

class Dataset {
 public:
  Dataset(std::size_t n_features, std::size_t n_classes, std::vector<double> features,
          std::vector<int> labels)
      : n_features_(n_features),
        n_classes_(n_classes),
        features_(std::move(features)),
        labels_(std::move(labels)) {
    if (n_features_ == 0 || n_classes_ == 0) {
      throw DataError("Dataset: n_features and n_classes must be positive");
    }
    if (labels_.empty()) throw DataError("Dataset: no samples");
    if (features_.size() != labels_.size() * n_features_) {
      throw DataError("Dataset: feature matrix is not n_samples x n_features");
    }
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] < 0 || static_cast<std::size_t>(labels_[i]) >= n_classes_) {
        throw DataError("Dataset: label of sample " + std::to_string(i) + " out of range");
      }
    }
  }

  std::size_t n_samples() const { return labels_.size(); }
  std::size_t n_features() const { return n_features_; }
  std::size_t n_classes() const { return n_classes_; }

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features_).subspan(i * n_features_, n_features_);
  }
  int label(std::size_t i) const { return labels_[i]; }
  std::span<const int> labels() const { return labels_; }
  std::span<const double> features() const { return features_; }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(n_classes_, 0);
    for (int y : labels_) ++counts[static_cast<std::size_t>(y)];
    return counts;
  }

  // Probability of each class among the samples.
  std::vector<double> class_props() const {
    auto counts = class_counts();
    std::vector<double> p(n_classes_);
    for (std::size_t c = 0; c < n_classes_; ++c) {
      p[c] = static_cast<double>(counts[c]) / static_cast<double>(n_samples());
    }
    return p;
  }

  void require_all_classes() const {
    auto counts = class_counts();
    for (std::size_t c = 0; c < n_classes_; ++c) {
      if (counts[c] == 0) throw DataError("Dataset: class " + std::to_string(c) + " has no samples");
    }
  }

  Dataset subset(std::span<const std::size_t> indices) const {
    if (indices.empty()) throw DataError("Dataset::subset: empty index list");
    std::vector<double> f;
    std::vector<int> y;
    f.reserve(indices.size() * n_features_);
    y.reserve(indices.size());
    for (auto i : indices) {
      if (i >= n_samples()) throw DataError("Dataset::subset: index out of range");
      auto r = row(i);
      f.insert(f.end(), r.begin(), r.end());
      y.push_back(labels_[i]);
    }
    return Dataset(n_features_, n_classes_, std::move(f), std::move(y));
  }

 private:
  std::size_t n_features_;
  std::size_t n_classes_;
  std::vector<double> features_;  // row-major
  std::vector<int> labels_;
};

// Gaussian blobs with unit isotropic noise. Class means sit on a regular
// simplex with pairwise distance `class_separation`, randomly rotated into
// feature space. With fewer features than classes the simplex is projected
// and distances are only approximate. Class sizes differ by at most one.
inline Dataset make_synthetic(std::size_t n_classes, std::size_t n_features, std::size_t n_samples,
                              double class_separation, std::uint64_t seed) {
  if (n_classes < 2) throw PreconditionError("make_synthetic: need at least 2 classes");
  if (n_features < 1) throw PreconditionError("make_synthetic: need at least 1 feature");
  if (n_samples < n_classes) throw PreconditionError("make_synthetic: fewer samples than classes");
  if (!(class_separation >= 0.0)) throw PreconditionError("make_synthetic: negative separation");

  auto rng = make_rng(seed, 0x5eed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Orthonormal columns q_c in R^ambient via Gram-Schmidt.
  const std::size_t ambient = std::max(n_features, n_classes);
  std::vector<std::vector<double>> q;
  while (q.size() < n_classes) {
    std::vector<double> x(ambient);
    for (double& xi : x) xi = normal(rng);
    for (const auto& b : q) {
      double proj = 0.0;
      for (std::size_t i = 0; i < ambient; ++i) proj += x[i] * b[i];
      for (std::size_t i = 0; i < ambient; ++i) x[i] -= proj * b[i];
    }
    double norm = 0.0;
    for (double xi : x) norm += xi * xi;
    norm = std::sqrt(norm);
    if (norm < 1e-8) continue;
    for (double& xi : x) xi /= norm;
    q.push_back(std::move(x));
  }
  std::vector<double> centroid(ambient, 0.0);
  for (const auto& b : q) {
    for (std::size_t i = 0; i < ambient; ++i) centroid[i] += b[i] / static_cast<double>(n_classes);
  }
  const double scale = class_separation / std::sqrt(2.0);
  std::vector<std::vector<double>> means(n_classes, std::vector<double>(n_features));
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t i = 0; i < n_features; ++i) means[c][i] = scale * (q[c][i] - centroid[i]);
  }

  std::vector<int> labels(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) labels[i] = static_cast<int>(i % n_classes);
  std::shuffle(labels.begin(), labels.end(), rng);

  std::vector<double> features(n_samples * n_features);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const auto& mu = means[static_cast<std::size_t>(labels[i])];
    for (std::size_t j = 0; j < n_features; ++j) {
      features[i * n_features + j] = mu[j] + normal(rng);
    }
  }
  Dataset ds(n_features, n_classes, std::move(features), std::move(labels));
  ds.require_all_classes();
  return ds;
}

struct CsvDataset {
  Dataset dataset;
  // original_labels[k] is the file's label value mapped to class k.
  std::vector<long long> original_labels;
};

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace detail

// Parses `f0,...,fM,label` CSV text. Labels must be integers; they are
// remapped to 0..n_classes-1 in ascending order of their original value.
inline CsvDataset parse_csv(std::istream& in, const std::string& source = "<csv>") {
  std::string line;
  std::size_t line_no = 0;
  std::size_t n_cols = 0;
  bool have_header = false;
  std::vector<double> features;
  std::vector<long long> raw_labels;

  auto fail = [&](const std::string& msg) {
    throw DataError(source + ":" + std::to_string(line_no) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view text = detail::trim(line);
    if (line_no == 1 && text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
    if (text.empty()) continue;
    auto cells = detail::split_commas(text);
    if (!have_header) {
      if (cells.size() < 2) fail("header needs at least one feature column and a label column");
      if (detail::trim(cells.back()) != "label") fail("last header column must be 'label'");
      n_cols = cells.size();
      have_header = true;
      continue;
    }
    if (cells.size() != n_cols) {
      fail("expected " + std::to_string(n_cols) + " columns, found " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c + 1 < n_cols; ++c) {
      auto cell = detail::trim(cells[c]);
      double x = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), x);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty() || !std::isfinite(x)) {
        fail("column " + std::to_string(c + 1) + ": '" + std::string(cell) + "' is not a finite number");
      }
      features.push_back(x);
    }
    auto cell = detail::trim(cells.back());
    long long y = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), y);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
      fail("column " + std::to_string(n_cols) + ": label '" + std::string(cell) +
           "' is not an integer");
    }
    raw_labels.push_back(y);
  }
  if (!have_header) throw DataError(source + ": empty file");
  if (raw_labels.empty()) throw DataError(source + ": no data rows");

  std::map<long long, int> remap;
  for (auto y : raw_labels) remap.emplace(y, 0);
  std::vector<long long> originals;
  for (auto& [orig, idx] : remap) {
    idx = static_cast<int>(originals.size());
    originals.push_back(orig);
  }
  std::vector<int> labels;
  labels.reserve(raw_labels.size());
  for (auto y : raw_labels) labels.push_back(remap.at(y));

  return {Dataset(n_cols - 1, originals.size(), std::move(features), std::move(labels)),
          std::move(originals)};
}

inline CsvDataset load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset file '" + path + "'");
  return parse_csv(in, path);
}

struct TrainTestSplit {
  Dataset train;
  Dataset test;
};

// Holds out round(fraction * n_c) samples of every class c for testing.
inline TrainTestSplit stratified_split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw PreconditionError("stratified_split: test_fraction must be in (0, 1)");
  }
  auto rng = make_rng(seed, 0x7e57);
  std::vector<std::vector<std::size_t>> by_class(ds.n_classes());
  for (std::size_t i = 0; i < ds.n_samples(); ++i) {
    by_class[static_cast<std::size_t>(ds.label(i))].push_back(i);
  }
  std::vector<std::size_t> train_idx, test_idx;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(members.size())));
    test_idx.insert(test_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
    train_idx.insert(train_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test), members.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  if (train_idx.empty() || test_idx.empty()) {
    throw DataError("stratified_split: dataset too small for the requested test fraction");
  }
  return {ds.subset(train_idx), ds.subset(test_idx)};
}

}  // namespace gmf
