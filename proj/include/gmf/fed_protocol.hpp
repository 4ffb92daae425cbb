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

// Client and server steps of one synchronous federated round, plus the
// communication ledger that meters the encoded messages.
//
// Round t on client k:
//   grad  <- local gradient at W
//   memory compensation (policy-specific)
//   M     <- beta M + G_hat[t-1]             (DGCWGMF only)
//   g, mask, memory <- compress(memory)
// Server: G_hat[t] <- mean of the g's (DGCWGM: server momentum instead).
// Every client: W <- W - eta G_hat[t].

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gmf/codec.hpp"
#include "gmf/compression.hpp"
#include "gmf/error.hpp"
#include "gmf/grad_core.hpp"
#include "gmf/model.hpp"

namespace gmf {

struct ClientState {
  std::uint32_t client_id = 0;
  DenseVector w;
  ClientMemory memory;
  CompressionPolicy policy;

  static ClientState create(std::uint32_t id, DenseVector w_init, const CompressionPolicy& policy) {
    policy.validate();
    const std::size_t d = w_init.dim();
    return {id, std::move(w_init), ClientMemory::zeros(d), policy};
  }
};

struct ClientRoundResult {
  SparseVector g;
  Mask mask;
  ClientState state;
  double loss;
};

// `local_gradient(const DenseVector& w) -> LossGrad` supplies the batch
// gradient. W itself is not updated here.
template <class GradientFn>
ClientRoundResult client_round(ClientState state, GradientFn&& local_gradient,
                               const SparseVector& g_hat_prev, double tau) {
  state.memory.check();
  detail::check_dims(state.w.dim(), state.memory.dim(), "client_round");
  detail::check_dims(g_hat_prev.dim(), state.w.dim(), "client_round");
  state.policy.tau = tau;
  state.policy.validate();

  LossGrad lg = local_gradient(static_cast<const DenseVector&>(state.w));
  detail::check_dims(lg.grad.dim(), state.w.dim(), "client_round gradient");
  if (!std::isfinite(lg.loss) || !lg.grad.all_finite()) {
    throw NumericError("client " + std::to_string(state.client_id) + ": non-finite local gradient");
  }

  const auto& pol = state.policy;
  switch (pol.kind) {
    case PolicyKind::kTopK:
      state.memory = accumulate_residual(std::move(state.memory), lg.grad);
      break;
    case PolicyKind::kDgc:
    case PolicyKind::kDgcWgm:
      state.memory = momentum_correction(std::move(state.memory), lg.grad, pol.alpha);
      break;
    case PolicyKind::kDgcWgmf:
      state.memory = momentum_correction(std::move(state.memory), lg.grad, pol.alpha);
      state.memory = accumulate_global_momentum(std::move(state.memory), g_hat_prev, pol.beta);
      break;
    case PolicyKind::kGmc:
      state.memory = gmc_compensate(std::move(state.memory), lg.grad, g_hat_prev, pol.beta);
      break;
  }
  if (!state.memory.v.all_finite() || !state.memory.m.all_finite()) {
    throw NumericError("client " + std::to_string(state.client_id) + ": memory became non-finite");
  }

  auto [g, memory, mask] = compress(std::move(state.memory), pol);
  state.memory = std::move(memory);
  return {std::move(g), std::move(mask), std::move(state), lg.loss};
}

inline ClientRoundResult client_round(ClientState state, const ModelSpec& spec, const Batch& batch,
                                      const SparseVector& g_hat_prev, double tau) {
  return client_round(
      std::move(state), [&](const DenseVector& w) { return loss_and_grad(spec, w, batch); },
      g_hat_prev, tau);
}

struct ServerState {
  DenseVector global_momentum;  // stays zero unless the policy is DGCWGM
  double beta = 0.0;
  std::uint64_t round = 0;

  static ServerState create(std::size_t dim, double beta) { return {DenseVector(dim), beta, 0}; }
};

struct AggregateResult {
  SparseVector g_hat;
  ServerState server;
};

// Averages the client messages in list order. Under DGCWGM the average
// feeds the server momentum and the broadcast is every nonzero coordinate
// of that momentum.
inline AggregateResult server_aggregate(std::span<const SparseVector> gs, ServerState server,
                                        PolicyKind kind) {
  if (gs.empty()) throw PreconditionError("server_aggregate: no client messages");
  detail::check_dims(gs.front().dim(), server.global_momentum.dim(), "server_aggregate");
  SparseVector base = sparse_sum_scaled(gs, 1.0 / static_cast<double>(gs.size()));
  ++server.round;
  if (kind != PolicyKind::kDgcWgm) return {std::move(base), std::move(server)};

  for (double& x : server.global_momentum.values()) x *= server.beta;
  axpy(1.0, base, server.global_momentum);
  SparseVector g_hat = sparsify(server.global_momentum);
  return {std::move(g_hat), std::move(server)};
}

// w - eta * g_hat
inline DenseVector apply_global_update(DenseVector w, const SparseVector& g_hat, double eta) {
  detail::check_dims(w.dim(), g_hat.dim(), "apply_global_update");
  if (!(eta > 0.0)) throw PreconditionError("apply_global_update: eta must be positive");
  axpy(-eta, g_hat, w);
  return w;
}

enum class DownloadAccounting {
  kPerClient,  // the broadcast is paid once for every client
  kMulticast,  // the broadcast is paid once in total
};

struct RoundLedger {
  std::uint64_t round = 0;
  std::vector<std::size_t> upload_bytes;    // per client
  std::vector<std::size_t> download_bytes;  // per client
  std::size_t upload_nnz = 0;               // summed over clients
  std::size_t download_nnz = 0;             // entries in the broadcast
  double mean_mask_jaccard = 1.0;

  std::size_t total_upload() const { return sum(upload_bytes); }
  std::size_t total_download() const { return sum(download_bytes); }

  friend bool operator==(const RoundLedger&, const RoundLedger&) = default;

 private:
  static std::size_t sum(const std::vector<std::size_t>& v) {
    std::size_t s = 0;
    for (auto x : v) s += x;
    return s;
  }
};

// Meters one round from the encoded messages actually exchanged.
inline RoundLedger record_round(std::uint64_t round, std::span<const codec::Bytes> uploads,
                                const codec::Bytes& broadcast, std::span<const Mask> masks,
                                DownloadAccounting accounting = DownloadAccounting::kPerClient) {
  RoundLedger ledger;
  ledger.round = round;
  for (const auto& msg : uploads) {
    ledger.upload_bytes.push_back(msg.size());
    ledger.upload_nnz += codec::entry_count(msg);
  }
  ledger.download_nnz = codec::entry_count(broadcast);
  ledger.download_bytes.assign(uploads.size(), 0);
  if (accounting == DownloadAccounting::kPerClient) {
    for (auto& b : ledger.download_bytes) b = broadcast.size();
  } else if (!ledger.download_bytes.empty()) {
    ledger.download_bytes.front() = broadcast.size();
  }
  ledger.mean_mask_jaccard = mean_pairwise_jaccard(masks);
  return ledger;
}

// Running totals over rounds.
struct CommTotals {
  std::size_t upload_bytes = 0;
  std::size_t download_bytes = 0;

  void add(const RoundLedger& r) {
    upload_bytes += r.total_upload();
    download_bytes += r.total_download();
  }
  std::size_t total() const { return upload_bytes + download_bytes; }
};

}  // namespace gmf
