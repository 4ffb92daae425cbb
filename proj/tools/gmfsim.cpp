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

// gmfsim: command-line driver for the federated compression simulator.
//
//   gmfsim run CONFIG [overrides]
//   gmfsim compare CONFIG --policies dgc,gmc,dgcwgm,dgcwgmf [overrides]
//   gmfsim sweep-rate CONFIG --rates 0.1,0.3,0.5 [--policies ...] [overrides]
//   gmfsim partition-report CONFIG [overrides]
//
// Exit codes: 0 success, 1 configuration error, 2 runtime error.
// GMFSIM_LOG_LEVEL selects the log verbosity (trace ... off, default info).

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "gmf/gmf.hpp"

namespace {

using namespace gmf;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> rounds;
  std::optional<std::size_t> clients;
  std::optional<std::size_t> threads;
  std::optional<double> rate;
  std::optional<double> target_emd;
  std::optional<double> eta;
  std::optional<std::string> policy;
  std::optional<std::string> output;

  void attach(CLI::App& cmd) {
    cmd.add_option("--seed", seed, "Experiment seed");
    cmd.add_option("--rounds", rounds, "Number of rounds");
    cmd.add_option("--clients", clients, "Number of clients");
    cmd.add_option("--threads", threads, "Client worker threads");
    cmd.add_option("--rate", rate, "Keep rate in (0, 1]");
    cmd.add_option("--target-emd", target_emd, "Target label-skew EMD");
    cmd.add_option("--eta", eta, "Learning rate");
    cmd.add_option("--policy", policy, "Policy kind: topk, dgc, gmc, dgcwgm, dgcwgmf");
    cmd.add_option("--output", output, "Output CSV path (default: config output_path, else stdout)");
  }

  ExperimentConfig apply(ExperimentConfig c) const {
    if (seed) c.seed = *seed;
    if (rounds) c.n_rounds = *rounds;
    if (clients) c.n_clients = *clients;
    if (threads) c.threads = *threads;
    if (rate) c.policy.rate = *rate;
    if (target_emd) c.target_emd = *target_emd;
    if (eta) c.lr.eta = *eta;
    if (policy) c.policy.kind = parse_kind(*policy);
    if (output) c.output_path = *output;
    c.validate();
    return c;
  }

  static PolicyKind parse_kind(const std::string& name) {
    auto k = parse_policy_kind(name);
    if (!k) throw ConfigError("unknown policy '" + name + "'");
    return *k;
  }
};

std::vector<PolicyConfig> policy_list(const ExperimentConfig& c, const std::vector<std::string>& names) {
  if (names.empty()) return {c.policy};
  std::vector<PolicyConfig> out;
  for (const auto& n : names) {
    PolicyConfig p = c.policy;
    p.kind = Overrides::parse_kind(n);
    out.push_back(p);
  }
  return out;
}

template <class Rows, class Emit, class Write>
void deliver(const Rows& rows, const std::string& path, Emit emit, Write write) {
  if (path.empty()) {
    write(std::span(rows), std::cout);
  } else {
    emit(rows, path);
    spdlog::info("wrote {}", path);
  }
}

void cmd_run(const ExperimentConfig& c) {
  spdlog::info("run: policy={} rate={} clients={} rounds={} target_emd={} seed={}",
               to_string(c.policy.kind), c.policy.rate, c.n_clients, c.n_rounds, c.target_emd, c.seed);
  const auto setup = prepare_setup(c);
  spdlog::info("partition achieved EMD {:.4f}, model dimension {}", setup.partition.achieved_emd,
               setup.w_init.dim());
  auto result = run_experiment(c, setup, [](const RoundTrace& t) {
    spdlog::debug("round {} tau={:.3f} loss={:.5f} acc={:.4f} broadcast_nnz={} jaccard={:.4f}",
                  t.round, t.tau, t.row.train_loss, t.row.test_accuracy, t.row.broadcast_nnz,
                  t.row.mean_mask_jaccard);
  });
  spdlog::info("final accuracy {:.4f}, upload {} B, download {} B", result.final_accuracy,
               result.totals.upload_bytes, result.totals.download_bytes);
  deliver(result.rows, c.output_path, emit_csv,
          [](std::span<const MetricsRow> r, std::ostream& o) { write_metrics_csv(r, o); });
}

void cmd_compare(const ExperimentConfig& c, const std::vector<std::string>& names) {
  const auto policies = policy_list(c, names);
  spdlog::info("compare: {} policies, rate={} target_emd={}", policies.size(), c.policy.rate, c.target_emd);
  auto cmp = compare_policies(c, policies);
  for (const auto& row : cmp.table) {
    spdlog::info("{:>8}: accuracy {:.4f} ({:+.4f}), total {} B ({:+d})", row.policy, row.final_accuracy,
                 row.delta_accuracy, row.total_bytes, row.delta_total_bytes);
  }
  deliver(cmp.table, c.output_path, emit_comparison,
          [](std::span<const ComparisonRow> r, std::ostream& o) { write_comparison(r, o); });
}

void cmd_sweep(const ExperimentConfig& c, const std::vector<std::string>& names,
               const std::vector<double>& rates) {
  if (rates.empty()) throw ConfigError("sweep-rate: --rates is empty");
  for (double r : rates) {
    if (!(r > 0.0 && r <= 1.0)) throw ConfigError("sweep-rate: rates must be in (0, 1]");
  }
  const auto policies = policy_list(c, names);
  spdlog::info("sweep-rate: {} policies x {} rates", policies.size(), rates.size());
  auto points = sweep_rates(c, policies, rates);
  deliver(points, c.output_path, emit_plot_data,
          [](std::span<const RatePoint> r, std::ostream& o) { write_plot_data(r, o); });
}

void cmd_partition_report(const ExperimentConfig& c) {
  const auto setup = prepare_setup(c);
  const auto& p = setup.partition;
  std::cout << "target_emd," << format_real(c.target_emd) << "\nachieved_emd,"
            << format_real(p.achieved_emd) << "\nmixing," << format_real(p.mixing) << "\n";
  std::cout << "client,n_samples,weight,l1_distance";
  for (std::size_t k = 0; k < p.global_props.size(); ++k) std::cout << ",p" << k;
  std::cout << '\n';
  for (std::size_t k = 0; k < p.n_clients(); ++k) {
    double l1 = 0.0;
    for (std::size_t j = 0; j < p.global_props.size(); ++j) {
      l1 += std::fabs(p.client_class_props[k][j] - p.global_props[j]);
    }
    std::cout << k << ',' << p.assignments[k].size() << ',' << format_real(p.client_weights[k]) << ','
              << format_real(l1);
    for (double x : p.client_class_props[k]) std::cout << ',' << format_real(x);
    std::cout << '\n';
  }
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("gmfsim");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  if (const char* lvl = std::getenv("GMFSIM_LOG_LEVEL")) {
    spdlog::set_level(spdlog::level::from_str(lvl));
  } else {
    spdlog::set_level(spdlog::level::info);
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"Federated gradient-compression simulator"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides overrides;
  std::vector<std::string> policies;
  std::vector<double> rates;

  auto* run = app.add_subcommand("run", "Run one experiment and emit per-round metrics");
  auto* compare = app.add_subcommand("compare", "Run several policies on one shared setup");
  auto* sweep = app.add_subcommand("sweep-rate", "Final accuracy and traffic across keep rates");
  auto* report = app.add_subcommand("partition-report", "Print the label-skew partition");
  for (auto* cmd : {run, compare, sweep, report}) {
    cmd->add_option("config", config_path, "JSON experiment config")->required();
    overrides.attach(*cmd);
  }
  compare->add_option("--policies", policies, "Comma-separated policy kinds")->delimiter(',')->required();
  sweep->add_option("--policies", policies, "Comma-separated policy kinds (default: config policy)")
      ->delimiter(',');
  sweep->add_option("--rates", rates, "Comma-separated keep rates")->delimiter(',')->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const ExperimentConfig config = overrides.apply(load_config(config_path));
    if (run->parsed()) cmd_run(config);
    if (compare->parsed()) cmd_compare(config, policies);
    if (sweep->parsed()) cmd_sweep(config, policies, rates);
    if (report->parsed()) cmd_partition_report(config);
  } catch (const ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
