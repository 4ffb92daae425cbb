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

// JSON experiment configuration. One experiment per file:
//
// {
//   "task": {"model": "mlp1", "hidden_units": 64,
//            "dataset": {"source": "synthetic", "n_classes": 10, "n_features": 32,
//                        "n_samples": 4000, "class_separation": 3.0}},
//   "n_clients": 20, "n_rounds": 220, "batch_size": 32,
//   "policy": {"kind": "dgcwgmf", "rate": 0.1, "alpha": 0.9, "beta": 0.9},
//   "tau_schedule": {"start": 0.0, "end": 0.6, "n_steps": 10},
//   "eta": 0.1, "eta_decay": {"factor": 0.1, "every": 100},
//   "target_emd": 1.35, "seed": 0, "test_fraction": 0.1,
//   "download_accounting": "per_client", "threads": 1,
//   "output_path": "metrics.csv"
// }
//
// Every key is optional; missing keys keep their defaults. Unknown keys are
// rejected. A CSV dataset uses {"source": "csv", "path": "data.csv"}.

#pragma once

#include <fstream>
#include <initializer_list>
#include <string>

#include <nlohmann/json.hpp>

#include "gmf/error.hpp"
#include "gmf/harness.hpp"

namespace gmf {

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& j, const std::string& where,
                           std::initializer_list<const char*> known) {
  if (!j.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("config: unknown key '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: '" + (where.empty() ? std::string(key) : where + "." + key) +
                      "' has the wrong type");
  }
}

inline PolicyKind parse_kind(const std::string& name) {
  auto k = parse_policy_kind(name);
  if (!k) throw ConfigError("config: unknown policy kind '" + name + "'");
  return *k;
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::read;
  detail::reject_unknown(j, "", {"task", "n_clients", "n_rounds", "batch_size", "policy",
                                 "tau_schedule", "eta", "eta_decay", "target_emd", "seed",
                                 "test_fraction", "download_accounting", "threads",
                                 "output_path"});
  ExperimentConfig c;
  if (j.contains("task")) {
    const auto& t = j.at("task");
    detail::reject_unknown(t, "task", {"model", "hidden_units", "dataset"});
    std::string model = std::string(to_string(c.task.model));
    read(t, "model", model, "task");
    if (model == "logreg") {
      c.task.model = ModelKind::kLogReg;
    } else if (model == "mlp1") {
      c.task.model = ModelKind::kMlp1;
    } else {
      throw ConfigError("config: unknown model '" + model + "'");
    }
    read(t, "hidden_units", c.task.hidden_units, "task");
    if (t.contains("dataset")) {
      const auto& d = t.at("dataset");
      detail::reject_unknown(d, "task.dataset", {"source", "n_classes", "n_features", "n_samples",
                                                 "class_separation", "path"});
      std::string source = "synthetic";
      read(d, "source", source, "task.dataset");
      if (source == "synthetic") {
        c.task.dataset.source = DatasetConfig::Source::kSynthetic;
      } else if (source == "csv") {
        c.task.dataset.source = DatasetConfig::Source::kCsv;
      } else {
        throw ConfigError("config: unknown dataset source '" + source + "'");
      }
      read(d, "n_classes", c.task.dataset.n_classes, "task.dataset");
      read(d, "n_features", c.task.dataset.n_features, "task.dataset");
      read(d, "n_samples", c.task.dataset.n_samples, "task.dataset");
      read(d, "class_separation", c.task.dataset.class_separation, "task.dataset");
      read(d, "path", c.task.dataset.path, "task.dataset");
    }
  }
  read(j, "n_clients", c.n_clients, "");
  read(j, "n_rounds", c.n_rounds, "");
  read(j, "batch_size", c.batch_size, "");
  if (j.contains("policy")) {
    const auto& p = j.at("policy");
    detail::reject_unknown(p, "policy", {"kind", "rate", "alpha", "beta"});
    std::string kind = std::string(to_string(c.policy.kind));
    read(p, "kind", kind, "policy");
    c.policy.kind = detail::parse_kind(kind);
    read(p, "rate", c.policy.rate, "policy");
    read(p, "alpha", c.policy.alpha, "policy");
    read(p, "beta", c.policy.beta, "policy");
  }
  if (j.contains("tau_schedule")) {
    const auto& s = j.at("tau_schedule");
    detail::reject_unknown(s, "tau_schedule", {"start", "end", "n_steps"});
    read(s, "start", c.tau_schedule.start, "tau_schedule");
    read(s, "end", c.tau_schedule.end, "tau_schedule");
    read(s, "n_steps", c.tau_schedule.n_steps, "tau_schedule");
  }
  read(j, "eta", c.lr.eta, "");
  if (j.contains("eta_decay")) {
    const auto& e = j.at("eta_decay");
    detail::reject_unknown(e, "eta_decay", {"factor", "every"});
    read(e, "factor", c.lr.decay_factor, "eta_decay");
    read(e, "every", c.lr.decay_every, "eta_decay");
  }
  read(j, "target_emd", c.target_emd, "");
  read(j, "seed", c.seed, "");
  read(j, "test_fraction", c.test_fraction, "");
  std::string accounting = "per_client";
  read(j, "download_accounting", accounting, "");
  if (accounting == "per_client") {
    c.download_accounting = DownloadAccounting::kPerClient;
  } else if (accounting == "multicast") {
    c.download_accounting = DownloadAccounting::kMulticast;
  } else {
    throw ConfigError("config: download_accounting must be 'per_client' or 'multicast'");
  }
  read(j, "threads", c.threads, "");
  read(j, "output_path", c.output_path, "");
  c.validate();
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json dataset;
  if (c.task.dataset.source == DatasetConfig::Source::kCsv) {
    dataset = {{"source", "csv"}, {"path", c.task.dataset.path}};
  } else {
    dataset = {{"source", "synthetic"},
               {"n_classes", c.task.dataset.n_classes},
               {"n_features", c.task.dataset.n_features},
               {"n_samples", c.task.dataset.n_samples},
               {"class_separation", c.task.dataset.class_separation}};
  }
  return {
      {"task",
       {{"model", std::string(to_string(c.task.model))},
        {"hidden_units", c.task.hidden_units},
        {"dataset", dataset}}},
      {"n_clients", c.n_clients},
      {"n_rounds", c.n_rounds},
      {"batch_size", c.batch_size},
      {"policy",
       {{"kind", std::string(to_string(c.policy.kind))},
        {"rate", c.policy.rate},
        {"alpha", c.policy.alpha},
        {"beta", c.policy.beta}}},
      {"tau_schedule",
       {{"start", c.tau_schedule.start}, {"end", c.tau_schedule.end}, {"n_steps", c.tau_schedule.n_steps}}},
      {"eta", c.lr.eta},
      {"eta_decay", {{"factor", c.lr.decay_factor}, {"every", c.lr.decay_every}}},
      {"target_emd", c.target_emd},
      {"seed", c.seed},
      {"test_fraction", c.test_fraction},
      {"download_accounting",
       c.download_accounting == DownloadAccounting::kPerClient ? "per_client" : "multicast"},
      {"threads", c.threads},
      {"output_path", c.output_path},
  };
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace gmf
