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

// Experiment orchestration: configuration, fusion-ratio schedule, the
// synchronous round loop and the multi-policy drivers.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include "gmf/codec.hpp"
#include "gmf/compression.hpp"
#include "gmf/data.hpp"
#include "gmf/error.hpp"
#include "gmf/fed_protocol.hpp"
#include "gmf/model.hpp"
#include "gmf/partition.hpp"

namespace gmf {

struct DatasetConfig {
  enum class Source { kSynthetic, kCsv };
  Source source = Source::kSynthetic;
  // synthetic
  std::size_t n_classes = 10;
  std::size_t n_features = 32;
  std::size_t n_samples = 4000;
  double class_separation = 3.0;
  // csv
  std::string path;
};

struct TaskConfig {
  ModelKind model = ModelKind::kLogReg;
  std::size_t hidden_units = 64;
  DatasetConfig dataset;
};

// Staircase from `start` to `end` in `n_steps` evenly spaced steps.
struct TauSchedule {
  double start = 0.0;
  double end = 0.6;
  std::size_t n_steps = 10;
};

struct PolicyConfig {
  PolicyKind kind = PolicyKind::kDgc;
  double rate = 0.1;
  double alpha = 0.9;
  double beta = 0.9;

  CompressionPolicy to_policy(double tau = 0.0) const { return {kind, rate, alpha, beta, tau}; }
};

// eta * decay_factor^floor(round / decay_every); constant when decay_every == 0.
struct LearningRate {
  double eta = 0.1;
  double decay_factor = 1.0;
  std::size_t decay_every = 0;

  double at(std::size_t round) const {
    if (decay_every == 0) return eta;
    return eta * std::pow(decay_factor, static_cast<double>(round / decay_every));
  }
};

struct ExperimentConfig {
  TaskConfig task;
  std::size_t n_clients = 20;
  std::size_t n_rounds = 220;
  std::size_t batch_size = 32;
  PolicyConfig policy;
  TauSchedule tau_schedule;
  LearningRate lr;
  double target_emd = 0.0;
  std::uint64_t seed = 0;
  double test_fraction = 0.1;
  DownloadAccounting download_accounting = DownloadAccounting::kPerClient;
  std::size_t threads = 1;
  std::string output_path;

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
    if (n_clients < 1) fail("n_clients must be >= 1");
    if (n_rounds < 1) fail("n_rounds must be >= 1");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (threads < 1) fail("threads must be >= 1");
    if (!(policy.rate > 0.0 && policy.rate <= 1.0)) fail("policy.rate must be in (0, 1]");
    if (!(policy.alpha >= 0.0 && policy.alpha < 1.0)) fail("policy.alpha must be in [0, 1)");
    if (!(policy.beta >= 0.0 && policy.beta < 1.0)) fail("policy.beta must be in [0, 1)");
    const auto& ts = tau_schedule;
    if (!(ts.start >= 0.0 && ts.end <= 1.0 && ts.start <= ts.end)) {
      fail("tau_schedule needs 0 <= start <= end <= 1");
    }
    if (ts.n_steps < 1) fail("tau_schedule.n_steps must be >= 1");
    if (!(lr.eta > 0.0)) fail("eta must be positive");
    if (!(lr.decay_factor > 0.0)) fail("eta decay factor must be positive");
    if (!(target_emd >= 0.0 && target_emd < 2.0)) fail("target_emd must be in [0, 2)");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) fail("test_fraction must be in (0, 1)");
    if (task.model == ModelKind::kMlp1 && task.hidden_units < 1) fail("hidden_units must be >= 1");
    const auto& ds = task.dataset;
    if (ds.source == DatasetConfig::Source::kCsv && ds.path.empty()) fail("dataset.path is empty");
    if (ds.source == DatasetConfig::Source::kSynthetic) {
      if (ds.n_classes < 2) fail("dataset.n_classes must be >= 2");
      if (ds.n_features < 1) fail("dataset.n_features must be >= 1");
      if (ds.n_samples < ds.n_classes) fail("dataset.n_samples must be >= n_classes");
      if (!(ds.class_separation >= 0.0)) fail("dataset.class_separation must be >= 0");
    }
  }
};

// Step index floor(round * n_steps / n_rounds), capped at n_steps - 1.
// Every step is visited when n_rounds >= n_steps and the last round sits on
// `end`.
inline double tau_at(const TauSchedule& schedule, std::size_t round, std::size_t n_rounds) {
  if (n_rounds == 0 || round >= n_rounds) throw PreconditionError("tau_at: round out of range");
  if (schedule.n_steps <= 1) return schedule.start;
  const std::size_t step = std::min(schedule.n_steps - 1, round * schedule.n_steps / n_rounds);
  return schedule.start + static_cast<double>(step) * (schedule.end - schedule.start) /
                              static_cast<double>(schedule.n_steps - 1);
}

struct MetricsRow {
  std::size_t round = 0;
  std::string policy;
  double tau = 0.0;
  double train_loss = 0.0;  // mean client batch loss
  double test_accuracy = 0.0;
  std::size_t upload_bytes_cum = 0;
  std::size_t download_bytes_cum = 0;
  std::size_t broadcast_nnz = 0;
  double mean_mask_jaccard = 0.0;
};

// Everything shared by runs that must be comparable: data, partition and
// the initial model.
struct ExperimentSetup {
  Dataset train;
  Dataset test;
  PartitionSpec partition;
  ModelSpec model;
  DenseVector w_init;
  std::vector<long long> label_mapping;  // CSV only
};

inline Dataset load_dataset(const DatasetConfig& cfg, std::uint64_t seed,
                            std::vector<long long>* label_mapping = nullptr) {
  if (cfg.source == DatasetConfig::Source::kCsv) {
    auto csv = load_csv(cfg.path);
    if (label_mapping) *label_mapping = csv.original_labels;
    return std::move(csv.dataset);
  }
  return make_synthetic(cfg.n_classes, cfg.n_features, cfg.n_samples, cfg.class_separation, seed);
}

inline ExperimentSetup prepare_setup(const ExperimentConfig& config) {
  config.validate();
  std::vector<long long> mapping;
  Dataset all = load_dataset(config.task.dataset, config.seed, &mapping);
  auto split = stratified_split(all, config.test_fraction, config.seed);
  auto partition = partition_by_target_emd(split.train, config.n_clients, config.target_emd, config.seed);
  ModelSpec model{config.task.model, all.n_features(), all.n_classes(), config.task.hidden_units};
  DenseVector w_init = init_params(model, config.seed);
  return {std::move(split.train), std::move(split.test), std::move(partition), model,
          std::move(w_init), std::move(mapping)};
}

// What one round exchanged, for observers that need more than MetricsRow.
struct RoundTrace {
  std::size_t round;
  double tau;
  std::span<const codec::Bytes> uploads;
  const codec::Bytes& broadcast;
  std::span<const Mask> masks;
  const RoundLedger& ledger;
  const MetricsRow& row;
};

using RoundObserver = std::function<void(const RoundTrace&)>;

struct RunResult {
  std::vector<MetricsRow> rows;
  std::vector<RoundLedger> ledgers;
  CommTotals totals;
  DenseVector final_w;
  double final_accuracy = 0.0;
};

// Runs the synchronous round loop on a prepared setup. Clients may be
// stepped on several threads; aggregation always happens in client order,
// so results do not depend on `threads`.
inline RunResult run_experiment(const ExperimentConfig& config, const ExperimentSetup& setup,
                                const RoundObserver& observer = {}) {
  config.validate();
  const std::size_t k_n = config.n_clients;
  if (setup.partition.n_clients() != k_n) {
    throw ConfigError("run_experiment: setup was partitioned for a different client count");
  }
  const std::size_t d = setup.w_init.dim();
  const std::string policy_name(to_string(config.policy.kind));
  const CompressionPolicy base_policy = config.policy.to_policy();

  std::vector<ClientState> clients;
  std::vector<BatchSampler> samplers;
  clients.reserve(k_n);
  samplers.reserve(k_n);
  for (std::size_t k = 0; k < k_n; ++k) {
    clients.push_back(ClientState::create(static_cast<std::uint32_t>(k), setup.w_init, base_policy));
    samplers.emplace_back(setup.partition.assignments[k], config.seed, 1000 + k);
  }
  ServerState server = ServerState::create(d, config.policy.beta);
  SparseVector g_hat_prev(d);

  RunResult result{{}, {}, {}, setup.w_init, 0.0};
  std::vector<std::optional<ClientRoundResult>> outcomes(k_n);
  std::vector<Batch> batches(k_n);

  for (std::size_t t = 0; t < config.n_rounds; ++t) {
    const double tau = tau_at(config.tau_schedule, t, config.n_rounds);

    // Batches are drawn sequentially so sampling order never depends on threads.
    for (std::size_t k = 0; k < k_n; ++k) {
      batches[k] = make_batch(setup.train, samplers[k].next(config.batch_size));
    }
    auto step = [&](std::size_t k) {
      try {
        outcomes[k].emplace(
            client_round(std::move(clients[k]), setup.model, batches[k], g_hat_prev, tau));
      } catch (const Error& e) {
        throw Error("round " + std::to_string(t) + ", client " + std::to_string(k) + ": " + e.what());
      }
    };
    if (config.threads <= 1 || k_n == 1) {
      for (std::size_t k = 0; k < k_n; ++k) step(k);
    } else {
      const std::size_t workers = std::min(config.threads, k_n);
      std::vector<std::future<void>> futures;
      for (std::size_t w = 0; w < workers; ++w) {
        futures.push_back(std::async(std::launch::async, [&, w] {
          for (std::size_t k = w; k < k_n; k += workers) step(k);
        }));
      }
      for (auto& f : futures) f.get();
    }

    std::vector<codec::Bytes> uploads;
    std::vector<SparseVector> received;
    std::vector<Mask> masks;
    uploads.reserve(k_n);
    received.reserve(k_n);
    masks.reserve(k_n);
    double loss_sum = 0.0;
    for (std::size_t k = 0; k < k_n; ++k) {
      auto& out = *outcomes[k];
      uploads.push_back(codec::encode(out.g));
      received.push_back(codec::decode(uploads.back(), d));
      masks.push_back(std::move(out.mask));
      clients[k] = std::move(out.state);
      loss_sum += out.loss;
      outcomes[k].reset();
    }

    auto aggregated = server_aggregate(received, std::move(server), config.policy.kind);
    server = std::move(aggregated.server);
    const codec::Bytes broadcast = codec::encode(aggregated.g_hat);
    SparseVector g_hat = codec::decode(broadcast, d);

    const double eta = config.lr.at(t);
    for (auto& c : clients) c.w = apply_global_update(std::move(c.w), g_hat, eta);
    if (!clients.front().w.all_finite()) {
      throw NumericError("round " + std::to_string(t) + ": model parameters became non-finite");
    }

    RoundLedger ledger = record_round(t, uploads, broadcast, masks, config.download_accounting);
    result.totals.add(ledger);
    const Evaluation eval = evaluate(setup.model, clients.front().w, setup.test);

    MetricsRow row{t,
                   policy_name,
                   tau,
                   loss_sum / static_cast<double>(k_n),
                   eval.accuracy,
                   result.totals.upload_bytes,
                   result.totals.download_bytes,
                   ledger.download_nnz,
                   ledger.mean_mask_jaccard};
    if (observer) observer(RoundTrace{t, tau, uploads, broadcast, masks, ledger, row});
    result.rows.push_back(std::move(row));
    result.ledgers.push_back(std::move(ledger));
    g_hat_prev = std::move(g_hat);
  }
  result.final_w = clients.front().w;
  result.final_accuracy = result.rows.back().test_accuracy;
  return result;
}

inline RunResult run_experiment(const ExperimentConfig& config, const RoundObserver& observer = {}) {
  return run_experiment(config, prepare_setup(config), observer);
}

struct ComparisonRow {
  std::string policy;
  double final_accuracy = 0.0;
  double delta_accuracy = 0.0;  // vs the first policy
  std::size_t upload_bytes = 0;
  std::size_t download_bytes = 0;
  std::size_t total_bytes = 0;
  long long delta_total_bytes = 0;  // vs the first policy
};

struct Comparison {
  std::vector<ComparisonRow> table;
  std::vector<RunResult> runs;  // same order as the policies
};

// Runs every policy on one shared setup; the first policy is the baseline.
inline Comparison compare_policies(const ExperimentConfig& base,
                                   const std::vector<PolicyConfig>& policies,
                                   const RoundObserver& observer = {}) {
  if (policies.empty()) throw PreconditionError("compare_policies: no policies");
  const ExperimentSetup setup = prepare_setup(base);
  Comparison out;
  for (const auto& p : policies) {
    ExperimentConfig cfg = base;
    cfg.policy = p;
    out.runs.push_back(run_experiment(cfg, setup, observer));
  }
  const auto& ref = out.runs.front();
  for (std::size_t i = 0; i < policies.size(); ++i) {
    const auto& r = out.runs[i];
    out.table.push_back({std::string(to_string(policies[i].kind)), r.final_accuracy,
                         r.final_accuracy - ref.final_accuracy, r.totals.upload_bytes,
                         r.totals.download_bytes, r.totals.total(),
                         static_cast<long long>(r.totals.total()) -
                             static_cast<long long>(ref.totals.total())});
  }
  return out;
}

struct RatePoint {
  std::string policy;
  double compression_rate = 0.0;
  double final_accuracy = 0.0;
  std::size_t upload_bytes = 0;
  std::size_t download_bytes = 0;
  std::size_t total_bytes = 0;
};

// Accuracy and traffic as a function of the keep rate, one series per policy.
inline std::vector<RatePoint> sweep_rates(const ExperimentConfig& base,
                                          const std::vector<PolicyConfig>& policies,
                                          const std::vector<double>& rates) {
  if (policies.empty() || rates.empty()) throw PreconditionError("sweep_rates: nothing to sweep");
  const ExperimentSetup setup = prepare_setup(base);
  std::vector<RatePoint> points;
  for (const auto& p : policies) {
    for (double rate : rates) {
      ExperimentConfig cfg = base;
      cfg.policy = p;
      cfg.policy.rate = rate;
      auto r = run_experiment(cfg, setup);
      points.push_back({std::string(to_string(p.kind)), rate, r.final_accuracy,
                        r.totals.upload_bytes, r.totals.download_bytes, r.totals.total()});
    }
  }
  return points;
}

}  // namespace gmf
