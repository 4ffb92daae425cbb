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

// Dense and sparse vector arithmetic shared by every compression policy.
//
// DenseVector holds parameters, gradients and the per-client memories.
// SparseVector is the unit of transmission: every message a client uploads
// or the server broadcasts is one SparseVector. Mask is a sorted index set
// produced by top-k selection.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gmf/error.hpp"

namespace gmf {

// Norms at or below this are treated as zero by normalize().
inline constexpr double kNormEpsilon = 1e-12;

class DenseVector {
 public:
  explicit DenseVector(std::size_t dim) : values_(dim, 0.0) { check_dim(); }
  explicit DenseVector(std::vector<double> values) : values_(std::move(values)) {
    check_dim();
  }
  DenseVector(std::initializer_list<double> values) : values_(values) { check_dim(); }

  std::size_t dim() const { return values_.size(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(),
                       [](double x) { return std::isfinite(x); });
  }

  friend bool operator==(const DenseVector&, const DenseVector&) = default;

 private:
  void check_dim() const {
    if (values_.empty()) throw PreconditionError("DenseVector: dim must be positive");
  }

  std::vector<double> values_;
};

struct SparseEntry {
  std::uint32_t index;
  double value;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

class SparseVector {
 public:
  explicit SparseVector(std::size_t dim) : dim_(dim) { validate(); }

  // Entries must be strictly increasing by index, in range and nonzero.
  SparseVector(std::size_t dim, std::vector<SparseEntry> entries)
      : dim_(dim), entries_(std::move(entries)) {
    validate();
  }

  std::size_t dim() const { return dim_; }
  std::size_t nnz() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::span<const SparseEntry> entries() const { return entries_; }

  friend bool operator==(const SparseVector&, const SparseVector&) = default;

 private:
  void validate() const {
    if (dim_ == 0) throw PreconditionError("SparseVector: dim must be positive");
    if (dim_ > UINT32_MAX) throw PreconditionError("SparseVector: dim exceeds 32-bit index range");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (e.index >= dim_) {
        throw PreconditionError("SparseVector: index " + std::to_string(e.index) +
                                " out of range for dim " + std::to_string(dim_));
      }
      if (i > 0 && entries_[i - 1].index >= e.index) {
        throw PreconditionError("SparseVector: indices must be strictly increasing");
      }
      if (e.value == 0.0) throw PreconditionError("SparseVector: stored values must be nonzero");
    }
  }

  std::size_t dim_;
  std::vector<SparseEntry> entries_;
};

class Mask {
 public:
  explicit Mask(std::size_t dim) : dim_(dim) { validate(); }
  Mask(std::size_t dim, std::vector<std::uint32_t> selected)
      : dim_(dim), selected_(std::move(selected)) {
    validate();
  }

  static Mask all(std::size_t dim) {
    std::vector<std::uint32_t> idx(dim);
    std::iota(idx.begin(), idx.end(), 0u);
    return Mask(dim, std::move(idx));
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return selected_.size(); }
  std::span<const std::uint32_t> selected() const { return selected_; }

  bool contains(std::uint32_t i) const {
    return std::binary_search(selected_.begin(), selected_.end(), i);
  }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  void validate() const {
    if (dim_ == 0) throw PreconditionError("Mask: dim must be positive");
    for (std::size_t i = 0; i < selected_.size(); ++i) {
      if (selected_[i] >= dim_) throw PreconditionError("Mask: index out of range");
      if (i > 0 && selected_[i - 1] >= selected_[i]) {
        throw PreconditionError("Mask: indices must be sorted and unique");
      }
    }
  }

  std::size_t dim_;
  std::vector<std::uint32_t> selected_;
};

// Indices of the `keep` largest |v[i]|, returned sorted. Equal magnitudes
// go to the lower index.
inline Mask topk_select(const DenseVector& v, std::size_t keep) {
  const std::size_t d = v.dim();
  if (keep < 1 || keep > d) {
    throw PreconditionError("topk_select: keep=" + std::to_string(keep) +
                            " outside [1, " + std::to_string(d) + "]");
  }
  std::vector<std::uint32_t> idx(d);
  std::iota(idx.begin(), idx.end(), 0u);
  if (keep < d) {
    // Strict total order, so the selected set does not depend on the
    // nth_element implementation.
    auto before = [&v](std::uint32_t a, std::uint32_t b) {
      const double fa = std::fabs(v[a]);
      const double fb = std::fabs(v[b]);
      return fa > fb || (fa == fb && a < b);
    };
    std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep), idx.end(),
                     before);
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());
  }
  return Mask(d, std::move(idx));
}

// Selected coordinates of v. Selected zeros are not stored.
inline SparseVector apply_mask(const DenseVector& v, const Mask& m) {
  detail::check_dims(v.dim(), m.dim(), "apply_mask");
  std::vector<SparseEntry> entries;
  entries.reserve(m.size());
  for (auto i : m.selected()) {
    if (v[i] != 0.0) entries.push_back({i, v[i]});
  }
  return SparseVector(v.dim(), std::move(entries));
}

// v with the selected coordinates zeroed.
inline DenseVector complement_mask_zero(DenseVector v, const Mask& m) {
  detail::check_dims(v.dim(), m.dim(), "complement_mask_zero");
  for (auto i : m.selected()) v[i] = 0.0;
  return v;
}

inline double l2_norm(const DenseVector& v) {
  double acc = 0.0;
  for (double x : v.values()) acc += x * x;
  return std::sqrt(acc);
}

// v / ||v||_2, or v unchanged when ||v||_2 <= kNormEpsilon.
inline DenseVector normalize(DenseVector v) {
  const double n = l2_norm(v);
  if (n <= kNormEpsilon) return v;
  for (double& x : v.values()) x /= n;
  return v;
}

inline DenseVector densify(const SparseVector& g) {
  DenseVector out(g.dim());
  for (const auto& e : g.entries()) out[e.index] = e.value;
  return out;
}

// Nonzero coordinates of v.
inline SparseVector sparsify(const DenseVector& v) {
  std::vector<SparseEntry> entries;
  for (std::size_t i = 0; i < v.dim(); ++i) {
    if (v[i] != 0.0) entries.push_back({static_cast<std::uint32_t>(i), v[i]});
  }
  return SparseVector(v.dim(), std::move(entries));
}

inline double dot(const SparseVector& a, const DenseVector& b) {
  detail::check_dims(a.dim(), b.dim(), "dot");
  double acc = 0.0;
  for (const auto& e : a.entries()) acc += e.value * b[e.index];
  return acc;
}

// target += scale * g
inline void axpy(double scale, const SparseVector& g, DenseVector& target) {
  detail::check_dims(g.dim(), target.dim(), "axpy");
  for (const auto& e : g.entries()) target[e.index] += scale * e.value;
}

// scale * sum(vs). Each coordinate is summed in list order and then
// scaled once, so the result is bitwise reproducible for a fixed list
// order. Coordinates that cancel to exactly zero are dropped.
inline SparseVector sparse_sum_scaled(std::span<const SparseVector> vs, double scale) {
  if (vs.empty()) throw PreconditionError("sparse_sum_scaled: empty list");
  const std::size_t d = vs.front().dim();
  std::vector<double> acc(d, 0.0);
  std::vector<char> touched(d, 0);
  std::vector<std::uint32_t> support;
  for (const auto& g : vs) {
    detail::check_dims(g.dim(), d, "sparse_sum_scaled");
    for (const auto& e : g.entries()) {
      if (!touched[e.index]) {
        touched[e.index] = 1;
        support.push_back(e.index);
      }
      acc[e.index] += e.value;
    }
  }
  std::sort(support.begin(), support.end());
  std::vector<SparseEntry> entries;
  entries.reserve(support.size());
  for (auto i : support) {
    const double value = acc[i] * scale;
    if (value != 0.0) entries.push_back({i, value});
  }
  return SparseVector(d, std::move(entries));
}

// |a ∩ b| / |a ∪ b|; two empty masks count as identical.
inline double mask_jaccard(const Mask& a, const Mask& b) {
  detail::check_dims(a.dim(), b.dim(), "mask_jaccard");
  auto sa = a.selected();
  auto sb = b.selected();
  std::size_t inter = 0;
  std::size_t i = 0, j = 0;
  while (i < sa.size() && j < sb.size()) {
    if (sa[i] == sb[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (sa[i] < sb[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  const std::size_t uni = sa.size() + sb.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// Mean pairwise Jaccard over unordered pairs; 1.0 with fewer than two masks.
inline double mean_pairwise_jaccard(std::span<const Mask> masks) {
  if (masks.size() < 2) return 1.0;
  double acc = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    for (std::size_t j = i + 1; j < masks.size(); ++j) {
      acc += mask_jaccard(masks[i], masks[j]);
      ++pairs;
    }
  }
  return acc / static_cast<double>(pairs);
}

}  // namespace gmf
