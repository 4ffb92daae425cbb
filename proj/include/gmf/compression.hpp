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

// Sparsifying compression policies and their client-side memories.
//
//   TOPK     plain residual accumulation, mask from |V|
//   DGC      momentum correction (U, V), mask from |V|
//   GMC      global momentum folded into the residual, mask from |V|
//   DGCWGM   DGC on the client; momentum kept on the server
//   DGCWGMF  DGC plus global momentum fusion: the mask comes from
//            Z = |(1 - tau) N(V) + tau N(M)| while the values sent are V's

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "gmf/error.hpp"
#include "gmf/grad_core.hpp"

namespace gmf {

enum class PolicyKind { kTopK, kDgc, kGmc, kDgcWgm, kDgcWgmf };

inline std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kTopK: return "topk";
    case PolicyKind::kDgc: return "dgc";
    case PolicyKind::kGmc: return "gmc";
    case PolicyKind::kDgcWgm: return "dgcwgm";
    case PolicyKind::kDgcWgmf: return "dgcwgmf";
  }
  return "unknown";
}

inline std::optional<PolicyKind> parse_policy_kind(std::string_view name) {
  for (auto k : {PolicyKind::kTopK, PolicyKind::kDgc, PolicyKind::kGmc, PolicyKind::kDgcWgm,
                 PolicyKind::kDgcWgmf}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

// ceil(rate * dim) clamped to [1, dim]. A product within 1e-9 (relative) of
// an integer snaps to it, so decimal rates such as 0.07 * 100 give 7, not 8.
inline std::size_t keep_count(double rate, std::size_t dim) {
  if (!(rate > 0.0 && rate <= 1.0)) throw PreconditionError("keep_count: rate must be in (0, 1]");
  const double x = rate * static_cast<double>(dim);
  const double nearest = std::round(x);
  const double k = std::fabs(x - nearest) <= 1e-9 * std::max(1.0, x) ? nearest : std::ceil(x);
  return std::clamp<std::size_t>(static_cast<std::size_t>(k), 1, dim);
}

struct CompressionPolicy {
  PolicyKind kind = PolicyKind::kDgc;
  double rate = 0.1;   // keep fraction
  double alpha = 0.9;  // local momentum
  double beta = 0.9;   // global momentum
  double tau = 0.0;    // fusion ratio, set per round by the schedule

  void validate() const {
    if (!(rate > 0.0 && rate <= 1.0)) throw PreconditionError("policy: rate must be in (0, 1]");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw PreconditionError("policy: alpha must be in [0, 1)");
    if (!(beta >= 0.0 && beta < 1.0)) throw PreconditionError("policy: beta must be in [0, 1)");
    if (!(tau >= 0.0 && tau <= 1.0)) throw PreconditionError("policy: tau must be in [0, 1]");
  }

  std::size_t keep(std::size_t dim) const { return keep_count(rate, dim); }
};

struct ClientMemory {
  DenseVector u;  // momentum
  DenseVector v;  // residual
  DenseVector m;  // accumulated global momentum

  static ClientMemory zeros(std::size_t dim) {
    return {DenseVector(dim), DenseVector(dim), DenseVector(dim)};
  }

  std::size_t dim() const { return v.dim(); }

  void check() const {
    detail::check_dims(u.dim(), v.dim(), "ClientMemory");
    detail::check_dims(m.dim(), v.dim(), "ClientMemory");
  }

  friend bool operator==(const ClientMemory&, const ClientMemory&) = default;
};

// u <- alpha u + grad;  v <- v + u
inline ClientMemory momentum_correction(ClientMemory mem, const DenseVector& grad, double alpha) {
  mem.check();
  detail::check_dims(grad.dim(), mem.dim(), "momentum_correction");
  for (std::size_t i = 0; i < grad.dim(); ++i) {
    mem.u[i] = alpha * mem.u[i] + grad[i];
    mem.v[i] += mem.u[i];
  }
  return mem;
}

// Residual accumulation without momentum (TOPK): v <- v + grad
inline ClientMemory accumulate_residual(ClientMemory mem, const DenseVector& grad) {
  mem.check();
  detail::check_dims(grad.dim(), mem.dim(), "accumulate_residual");
  for (std::size_t i = 0; i < grad.dim(); ++i) mem.v[i] += grad[i];
  return mem;
}

// m <- beta m + g_hat_prev
inline ClientMemory accumulate_global_momentum(ClientMemory mem, const SparseVector& g_hat_prev,
                                               double beta) {
  mem.check();
  detail::check_dims(g_hat_prev.dim(), mem.dim(), "accumulate_global_momentum");
  for (double& x : mem.m.values()) x *= beta;
  axpy(1.0, g_hat_prev, mem.m);
  return mem;
}

// m <- beta m + g_hat_prev;  v <- v + grad + m. The global momentum takes
// the place of the local one; u stays untouched.
inline ClientMemory gmc_compensate(ClientMemory mem, const DenseVector& grad,
                                   const SparseVector& g_hat_prev, double beta) {
  mem = accumulate_global_momentum(std::move(mem), g_hat_prev, beta);
  detail::check_dims(grad.dim(), mem.dim(), "gmc_compensate");
  for (std::size_t i = 0; i < grad.dim(); ++i) mem.v[i] += grad[i] + mem.m[i];
  return mem;
}

// Z = |(1 - tau) N(v) + tau N(m)|
inline DenseVector gmf_reference(const DenseVector& v, const DenseVector& m, double tau) {
  detail::check_dims(v.dim(), m.dim(), "gmf_reference");
  if (!(tau >= 0.0 && tau <= 1.0)) throw PreconditionError("gmf_reference: tau must be in [0, 1]");
  DenseVector z = normalize(v);
  const DenseVector nm = normalize(m);
  for (std::size_t i = 0; i < z.dim(); ++i) {
    z[i] = std::fabs((1.0 - tau) * z[i] + tau * nm[i]);
  }
  return z;
}

struct CompressResult {
  SparseVector g;
  ClientMemory memory;
  Mask mask;
};

// Selects the mask, emits V under it and clears the sent coordinates from
// U and V. M is left alone.
inline CompressResult compress(ClientMemory mem, const CompressionPolicy& policy) {
  mem.check();
  policy.validate();
  const std::size_t keep = policy.keep(mem.dim());

  // At tau == 0 the fused reference is |N(V)|, which ranks like |V|. Using
  // |V| directly keeps the mask bitwise equal to DGC's even where dividing
  // by the norm would round two magnitudes into a tie.
  const bool fused = policy.kind == PolicyKind::kDgcWgmf && policy.tau > 0.0;
  Mask mask = fused ? topk_select(gmf_reference(mem.v, mem.m, policy.tau), keep)
                    : topk_select(mem.v, keep);

  SparseVector g = apply_mask(mem.v, mask);
  mem.u = complement_mask_zero(std::move(mem.u), mask);
  mem.v = complement_mask_zero(std::move(mem.v), mask);
  return {std::move(g), std::move(mem), std::move(mask)};
}

}  // namespace gmf
