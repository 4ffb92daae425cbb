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

// Label-skew partitioning with a controlled earth mover's distance (EMD).
//
// EMD here is the client-weighted L1 distance between each client's label
// distribution and the population's: sum_k w_k * ||p_k - p||_1. It is 0 for
// a perfectly stratified split and 2 * (1 - 1/C) when every client holds a
// single class of a balanced C-class population.
//
// partition_by_target_emd mixes a uniform (stratified) allocation with a
// Dirichlet-skewed one and bisects on the mixing coefficient until the
// achieved EMD of the integer allocation hits the target.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gmf/data.hpp"
#include "gmf/error.hpp"

namespace gmf {

inline double emd(std::span<const std::vector<double>> client_props,
                  std::span<const double> client_weights, std::span<const double> global_props) {
  if (client_props.size() != client_weights.size()) {
    throw DimensionError("emd: " + std::to_string(client_props.size()) + " clients but " +
                         std::to_string(client_weights.size()) + " weights");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < client_props.size(); ++k) {
    detail::check_dims(client_props[k].size(), global_props.size(), "emd");
    const double row_sum = std::accumulate(client_props[k].begin(), client_props[k].end(), 0.0);
    if (std::fabs(row_sum - 1.0) > 1e-6) {
      throw PreconditionError("emd: client " + std::to_string(k) + " proportions sum to " +
                              std::to_string(row_sum));
    }
    double l1 = 0.0;
    for (std::size_t c = 0; c < global_props.size(); ++c) {
      l1 += std::fabs(client_props[k][c] - global_props[c]);
    }
    total += client_weights[k] * l1;
  }
  return total;
}

// Client x class sample counts.
using AllocationMatrix = std::vector<std::vector<std::size_t>>;

struct MixingStep {
  double mixing;  // 0 = stratified, 1 = fully skewed
  double emd;
};

struct PartitionSpec {
  std::vector<std::vector<std::size_t>> assignments;  // sorted sample indices per client
  std::vector<std::vector<double>> client_class_props;
  std::vector<double> client_weights;  // shard size / total
  std::vector<double> global_props;
  double achieved_emd = 0.0;
  double mixing = 0.0;
  std::vector<MixingStep> trace;  // every evaluated mixing coefficient, in evaluation order

  std::size_t n_clients() const { return assignments.size(); }
};

struct PartitionOptions {
  double dirichlet_alpha = 0.1;
  double tolerance = 0.005;  // stop bisecting once |achieved - target| <= tolerance
  int max_iterations = 60;
};

namespace detail {

inline std::vector<std::size_t> shard_sizes(std::size_t n, std::size_t k) {
  std::vector<std::size_t> r(k, n / k);
  for (std::size_t i = 0; i < n % k; ++i) ++r[i];
  return r;
}

inline double allocation_emd(const AllocationMatrix& a, std::span<const std::size_t> class_counts) {
  std::size_t n = 0;
  for (auto c : class_counts) n += c;
  const double total = static_cast<double>(n);
  double acc = 0.0;
  for (const auto& row : a) {
    const std::size_t r = std::accumulate(row.begin(), row.end(), std::size_t{0});
    if (r == 0) continue;
    double l1 = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      l1 += std::fabs(static_cast<double>(row[c]) / static_cast<double>(r) -
                      static_cast<double>(class_counts[c]) / total);
    }
    acc += static_cast<double>(r) / total * l1;
  }
  return acc;
}

// Integer matrix with exactly the given row and column sums, close to the
// real matrix t (which must already have those margins).
inline AllocationMatrix round_allocation(const std::vector<std::vector<double>>& t,
                                         std::span<const std::size_t> rows,
                                         std::span<const std::size_t> cols) {
  const std::size_t k_n = rows.size();
  const std::size_t c_n = cols.size();
  AllocationMatrix a(k_n, std::vector<std::size_t>(c_n, 0));
  std::vector<long long> row_def(rows.begin(), rows.end());
  std::vector<long long> col_def(cols.begin(), cols.end());
  struct Cell {
    double frac;
    std::size_t k, c;
  };
  std::vector<Cell> cells;
  for (std::size_t k = 0; k < k_n; ++k) {
    for (std::size_t c = 0; c < c_n; ++c) {
      const double x = std::max(0.0, t[k][c]);
      auto fl = static_cast<std::size_t>(std::floor(x + 1e-9));
      fl = std::min<std::size_t>(fl, static_cast<std::size_t>(std::min(row_def[k], col_def[c])));
      a[k][c] = fl;
      row_def[k] -= static_cast<long long>(fl);
      col_def[c] -= static_cast<long long>(fl);
      cells.push_back({x - std::floor(x + 1e-9), k, c});
    }
  }
  std::stable_sort(cells.begin(), cells.end(),
                   [](const Cell& x, const Cell& y) { return x.frac > y.frac; });
  for (const auto& cell : cells) {
    if (cell.frac <= 1e-9) break;
    if (row_def[cell.k] > 0 && col_def[cell.c] > 0) {
      ++a[cell.k][cell.c];
      --row_def[cell.k];
      --col_def[cell.c];
    }
  }
  // Margins sum to the same total, so any remaining deficits pair up.
  for (std::size_t k = 0; k < k_n; ++k) {
    for (std::size_t c = 0; c < c_n && row_def[k] > 0; ++c) {
      const long long add = std::min(row_def[k], col_def[c]);
      if (add <= 0) continue;
      a[k][c] += static_cast<std::size_t>(add);
      row_def[k] -= add;
      col_def[c] -= add;
    }
  }
  return a;
}

// Each client draws class preferences from Dirichlet(alpha); classes are
// then poured into clients in proportion to those preferences, capped by
// each client's remaining shard capacity.
inline AllocationMatrix dirichlet_allocation(std::span<const std::size_t> rows,
                                             std::span<const std::size_t> cols, double alpha,
                                             std::mt19937_64& rng) {
  const std::size_t k_n = rows.size();
  const std::size_t c_n = cols.size();
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<std::vector<double>> pref(k_n, std::vector<double>(c_n));
  for (auto& p : pref) {
    double s = 0.0;
    for (double& x : p) s += (x = gamma(rng));
    if (s <= 0.0) {
      std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(c_n));
    } else {
      for (double& x : p) x /= s;
    }
  }
  std::vector<std::size_t> order(c_n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  AllocationMatrix a(k_n, std::vector<std::size_t>(c_n, 0));
  std::vector<std::size_t> cap(rows.begin(), rows.end());
  for (auto c : order) {
    std::size_t remaining = cols[c];
    while (remaining > 0) {
      std::vector<double> w(k_n, 0.0);
      double wsum = 0.0;
      for (std::size_t k = 0; k < k_n; ++k) {
        if (cap[k] > 0) wsum += (w[k] = pref[k][c]);
      }
      if (wsum <= 0.0) {
        for (std::size_t k = 0; k < k_n; ++k) wsum += (w[k] = static_cast<double>(cap[k]));
      }
      std::size_t placed = 0;
      for (std::size_t k = 0; k < k_n && placed < remaining; ++k) {
        if (w[k] <= 0.0) continue;
        auto share = static_cast<std::size_t>(std::floor(w[k] / wsum * static_cast<double>(remaining)));
        share = std::min({share, cap[k], remaining - placed});
        a[k][c] += share;
        cap[k] -= share;
        placed += share;
      }
      if (placed == 0) {
        // Flooring left nothing placed: give one sample to the heaviest client.
        std::size_t best = 0;
        for (std::size_t k = 1; k < k_n; ++k) {
          if (w[k] > w[best]) best = k;
        }
        ++a[best][c];
        --cap[best];
        placed = 1;
      }
      remaining -= placed;
    }
  }
  return a;
}

// Classes in random order, concatenated and cut into contiguous shards:
// the most skewed allocation the margins allow, up to class order.
inline AllocationMatrix sorted_shard_allocation(std::span<const std::size_t> rows,
                                                std::span<const std::size_t> cols,
                                                std::mt19937_64& rng) {
  std::vector<std::size_t> order(cols.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  AllocationMatrix a(rows.size(), std::vector<std::size_t>(cols.size(), 0));
  std::size_t k = 0;
  std::size_t cap = rows[0];
  for (auto c : order) {
    std::size_t left = cols[c];
    while (left > 0) {
      while (cap == 0) cap = rows[++k];
      const std::size_t take = std::min(left, cap);
      a[k][c] += take;
      left -= take;
      cap -= take;
    }
  }
  return a;
}

}  // namespace detail

inline PartitionSpec partition_by_target_emd(const Dataset& ds, std::size_t n_clients,
                                             double target_emd, std::uint64_t seed,
                                             const PartitionOptions& options = {}) {
  if (n_clients == 0) throw PreconditionError("partition: n_clients must be positive");
  if (n_clients > ds.n_samples()) {
    throw PreconditionError("partition: " + std::to_string(n_clients) + " clients but only " +
                            std::to_string(ds.n_samples()) + " samples");
  }
  if (!(target_emd >= 0.0 && target_emd < 2.0)) {
    throw PreconditionError("partition: target EMD must be in [0, 2)");
  }
  const auto cols = ds.class_counts();
  const auto rows = detail::shard_sizes(ds.n_samples(), n_clients);
  const double n = static_cast<double>(ds.n_samples());
  const std::size_t c_n = ds.n_classes();

  auto rng = make_rng(seed, 0x9a27);

  // Uniform allocation: every client mirrors the population.
  std::vector<std::vector<double>> uniform(n_clients, std::vector<double>(c_n));
  for (std::size_t k = 0; k < n_clients; ++k) {
    for (std::size_t c = 0; c < c_n; ++c) {
      uniform[k][c] = static_cast<double>(cols[c]) * static_cast<double>(rows[k]) / n;
    }
  }

  AllocationMatrix skewed = detail::dirichlet_allocation(rows, cols, options.dirichlet_alpha, rng);
  if (detail::allocation_emd(skewed, cols) < target_emd + options.tolerance) {
    skewed = detail::sorted_shard_allocation(rows, cols, rng);
  }
  const double max_emd = detail::allocation_emd(skewed, cols);
  if (max_emd < target_emd - options.tolerance) {
    throw DataError("partition: target EMD " + std::to_string(target_emd) +
                    " unreachable; the most skewed allocation of this dataset over " +
                    std::to_string(n_clients) + " clients reaches only " + std::to_string(max_emd));
  }

  PartitionSpec spec;
  auto mix = [&](double lambda) {
    std::vector<std::vector<double>> t(n_clients, std::vector<double>(c_n));
    for (std::size_t k = 0; k < n_clients; ++k) {
      for (std::size_t c = 0; c < c_n; ++c) {
        t[k][c] = (1.0 - lambda) * uniform[k][c] + lambda * static_cast<double>(skewed[k][c]);
      }
    }
    auto a = detail::round_allocation(t, rows, cols);
    spec.trace.push_back({lambda, detail::allocation_emd(a, cols)});
    return a;
  };

  AllocationMatrix best = mix(0.0);
  double best_err = std::fabs(spec.trace.back().emd - target_emd);
  double best_lambda = 0.0;
  if (best_err > options.tolerance) {
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < options.max_iterations; ++it) {
      const double mid = 0.5 * (lo + hi);
      auto a = mix(mid);
      const double achieved = spec.trace.back().emd;
      const double err = std::fabs(achieved - target_emd);
      if (err < best_err) {
        best = std::move(a);
        best_err = err;
        best_lambda = mid;
      }
      if (err <= options.tolerance) break;
      (achieved < target_emd ? lo : hi) = mid;
    }
  }

  // Deal each class's shuffled samples out according to the allocation.
  std::vector<std::vector<std::size_t>> by_class(c_n);
  for (std::size_t i = 0; i < ds.n_samples(); ++i) {
    by_class[static_cast<std::size_t>(ds.label(i))].push_back(i);
  }
  spec.assignments.assign(n_clients, {});
  for (std::size_t c = 0; c < c_n; ++c) {
    std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < n_clients; ++k) {
      for (std::size_t j = 0; j < best[k][c]; ++j) spec.assignments[k].push_back(by_class[c][pos++]);
    }
  }
  for (auto& a : spec.assignments) std::sort(a.begin(), a.end());

  spec.global_props.resize(c_n);
  for (std::size_t c = 0; c < c_n; ++c) spec.global_props[c] = static_cast<double>(cols[c]) / n;
  for (std::size_t k = 0; k < n_clients; ++k) {
    std::vector<double> p(c_n);
    for (std::size_t c = 0; c < c_n; ++c) {
      p[c] = static_cast<double>(best[k][c]) / static_cast<double>(rows[k]);
    }
    spec.client_class_props.push_back(std::move(p));
    spec.client_weights.push_back(static_cast<double>(rows[k]) / n);
  }
  spec.achieved_emd = emd(spec.client_class_props, spec.client_weights, spec.global_props);
  spec.mixing = best_lambda;
  return spec;
}

}  // namespace gmf
