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

#include <algorithm>
#include <numeric>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "gmf/partition.hpp"

namespace gmf {
namespace {

std::vector<double> uniform_props(std::size_t c) { return std::vector<double>(c, 1.0 / c); }

// Recomputes a client's label distribution from its assigned samples.
std::vector<double> props_of(const Dataset& ds, const std::vector<std::size_t>& idx) {
  std::vector<double> p(ds.n_classes());
  for (auto i : idx) p[static_cast<std::size_t>(ds.label(i))] += 1.0;
  for (auto& x : p) x /= static_cast<double>(idx.size());
  return p;
}

TEST(Emd, UniformClientsIsZero) {
  std::vector<std::vector<double>> clients(5, uniform_props(10));
  std::vector<double> w(5, 0.2);
  EXPECT_DOUBLE_EQ(emd(clients, w, uniform_props(10)), 0.0);
}

TEST(Emd, SingleClassClient) {
  std::vector<std::vector<double>> clients{{1.0, 0.0}};
  std::vector<double> w{1.0};
  EXPECT_DOUBLE_EQ(emd(clients, w, std::vector<double>{0.5, 0.5}), 1.0);
}

TEST(Emd, OneClassPerClientIsMaximal) {
  std::vector<std::vector<double>> clients;
  for (std::size_t k = 0; k < 10; ++k) {
    std::vector<double> p(10);
    p[k] = 1.0;
    clients.push_back(p);
  }
  std::vector<double> w(10, 0.1);
  EXPECT_NEAR(emd(clients, w, uniform_props(10)), 1.8, 1e-12);
}

TEST(Emd, InvariantUnderClassRelabeling) {
  auto rng = make_rng(3);
  std::gamma_distribution<double> gamma(0.5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<double>> clients(6, std::vector<double>(5));
    for (auto& p : clients) {
      for (auto& x : p) x = gamma(rng) + 1e-6;
      const double s = std::accumulate(p.begin(), p.end(), 0.0);
      for (auto& x : p) x /= s;
    }
    std::vector<double> global(5);
    for (const auto& p : clients) {
      for (std::size_t c = 0; c < 5; ++c) global[c] += p[c] / 6.0;
    }
    std::vector<double> w(6, 1.0 / 6.0);
    const double base = emd(clients, w, global);
    EXPECT_LE(base, 2.0);

    std::vector<std::size_t> perm{3, 0, 4, 1, 2};
    auto permute = [&](const std::vector<double>& p) {
      std::vector<double> q(5);
      for (std::size_t c = 0; c < 5; ++c) q[perm[c]] = p[c];
      return q;
    };
    std::vector<std::vector<double>> pc;
    for (const auto& p : clients) pc.push_back(permute(p));
    EXPECT_NEAR(emd(pc, w, permute(global)), base, 1e-12);
  }
}

TEST(Emd, ShapeErrors) {
  std::vector<std::vector<double>> clients{{0.5, 0.5}};
  std::vector<double> two_weights{0.5, 0.5};
  EXPECT_THROW(emd(clients, two_weights, std::vector<double>{0.5, 0.5}), DimensionError);
  std::vector<double> w{1.0};
  EXPECT_THROW(emd(clients, w, std::vector<double>{1.0}), DimensionError);
  std::vector<std::vector<double>> unnormalized{{0.5, 0.6}};
  EXPECT_THROW(emd(unnormalized, w, std::vector<double>{0.5, 0.5}), PreconditionError);
}

class PartitionTargets : public ::testing::TestWithParam<double> {};

TEST_P(PartitionTargets, HitsTargetWithValidShards) {
  const double target = GetParam();
  auto ds = make_synthetic(10, 4, 4000, 1.0, 77);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto spec = partition_by_target_emd(ds, 20, target, seed);
    EXPECT_NEAR(spec.achieved_emd, target, 0.05) << "seed " << seed;

    std::set<std::size_t> seen;
    std::size_t lo = ds.n_samples(), hi = 0;
    for (std::size_t k = 0; k < spec.n_clients(); ++k) {
      const auto& a = spec.assignments[k];
      ASSERT_FALSE(a.empty());
      lo = std::min(lo, a.size());
      hi = std::max(hi, a.size());
      for (auto i : a) EXPECT_TRUE(seen.insert(i).second) << "sample " << i << " assigned twice";
      auto p = props_of(ds, a);
      for (std::size_t c = 0; c < p.size(); ++c) {
        EXPECT_NEAR(p[c], spec.client_class_props[k][c], 1e-12);
      }
      EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
    }
    EXPECT_LE(hi - lo, 1u);
    EXPECT_NEAR(emd(spec.client_class_props, spec.client_weights, ds.class_props()),
                spec.achieved_emd, 1e-12);
  }
}

INSTANTIATE_TEST_SUITE_P(SkewLevels, PartitionTargets,
                         ::testing::Values(0.0, 0.48, 0.76, 0.87, 0.99, 1.18, 1.35));

TEST(Partition, BalancedTargetIsNearlyStratified) {
  auto ds = make_synthetic(10, 4, 2000, 1.0, 1);
  EXPECT_LT(partition_by_target_emd(ds, 20, 0.0, 4).achieved_emd, 0.02);
}

TEST(Partition, TraceIsMonotoneInMixing) {
  auto ds = make_synthetic(10, 4, 4000, 1.0, 8);
  for (double target : {0.3, 0.76, 1.18, 1.6}) {
    auto spec = partition_by_target_emd(ds, 20, target, 2);
    auto trace = spec.trace;
    ASSERT_GE(trace.size(), 2u);
    std::sort(trace.begin(), trace.end(),
              [](const MixingStep& a, const MixingStep& b) { return a.mixing < b.mixing; });
    for (std::size_t i = 1; i < trace.size(); ++i) {
      EXPECT_GE(trace[i].emd, trace[i - 1].emd)
          << "target " << target << " mixing " << trace[i - 1].mixing << " -> " << trace[i].mixing;
    }
  }
}

TEST(Partition, DeterministicGivenSeed) {
  auto ds = make_synthetic(10, 4, 1000, 1.0, 5);
  auto a = partition_by_target_emd(ds, 20, 0.87, 11);
  auto b = partition_by_target_emd(ds, 20, 0.87, 11);
  auto c = partition_by_target_emd(ds, 20, 0.87, 12);
  EXPECT_EQ(a.assignments, b.assignments);
  EXPECT_NE(a.assignments, c.assignments);
}

TEST(Partition, Errors) {
  auto ds = make_synthetic(10, 4, 200, 1.0, 5);
  EXPECT_THROW(partition_by_target_emd(ds, 0, 0.5, 0), PreconditionError);
  EXPECT_THROW(partition_by_target_emd(ds, 201, 0.5, 0), PreconditionError);
  EXPECT_THROW(partition_by_target_emd(ds, 20, 2.0, 0), PreconditionError);
  // Two clients can hold at most 5 classes each: EMD tops out at 1.0.
  EXPECT_THROW(partition_by_target_emd(ds, 2, 1.35, 0), DataError);
}

}  // namespace
}  // namespace gmf
