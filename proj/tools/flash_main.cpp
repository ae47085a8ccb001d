// Copyright 2026 The flash authors
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

#include <csignal>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "flash/flash.h"

namespace {

volatile std::sig_atomic_t g_signalled = 0;

extern "C" void on_signal(int) {
  g_signalled = 1;
  flash_request_interrupt();
}

constexpr int kExitInterrupted = 130;

int report_failure(flash_status status) {
  if (status == FLASH_ERR_INTERRUPTED || g_signalled) {
    std::fprintf(stderr, "flash: interrupted; trace rows written so far are kept\n");
    return kExitInterrupted;
  }
  std::fprintf(stderr, "flash: %s: %s\n", flash_status_name(status), flash_last_error());
  return status == FLASH_ERR_CONFIG_PARSE || status == FLASH_ERR_INVALID_SPEC ? 2 : 1;
}

struct RunOptions {
  std::string spec;
  std::string executor = "synthetic";
  std::string t_init = "30";
  std::string t_prune = "30";
  std::string t_total = "36000";
  std::string top_r = "10";
  std::string xi = "100";
  std::string ridge_lambda = "1";
  std::string cache_bytes = "1073741824";
  std::string candidate_budget = "2000";
  std::string per_run_timeout = "900";
  std::string seed = "0";
  std::string dataset_id = "input";
  std::string noise_sd = "0.02";
  std::string synthetic_seed;
  std::string trace_out;
};

int run_command(const RunOptions& o) {
  flash_spec* spec = nullptr;
  flash_config* config = nullptr;
  flash_outcome* outcome = nullptr;
  auto cleanup = [&] {
    flash_outcome_free(outcome);
    flash_config_free(config);
    flash_spec_free(spec);
  };

  flash_status status = flash_spec_load_file(o.spec.c_str(), &spec);
  if (status == FLASH_OK) status = flash_config_create(&config);
  const std::pair<const char*, const std::string*> settings[] = {
      {"t_init", &o.t_init},
      {"t_prune", &o.t_prune},
      {"t_total", &o.t_total},
      {"top_r", &o.top_r},
      {"xi", &o.xi},
      {"ridge_lambda", &o.ridge_lambda},
      {"cache_bytes", &o.cache_bytes},
      {"candidate_budget", &o.candidate_budget},
      {"per_run_timeout", &o.per_run_timeout},
      {"seed", &o.seed},
      {"dataset_id", &o.dataset_id},
      {"synthetic_noise_sd", &o.noise_sd},
      {"synthetic_seed", &o.synthetic_seed},
  };
  for (const auto& [key, value] : settings) {
    if (status != FLASH_OK) break;
    if (!value->empty()) status = flash_config_set(config, key, value->c_str());
  }
  if (status == FLASH_OK) status = flash_config_set_executor(config, o.executor.c_str());
  if (status == FLASH_OK) {
    const char* trace = o.trace_out.empty() ? nullptr : o.trace_out.c_str();
    status = flash_run(spec, config, trace, &outcome);
  }
  if (status != FLASH_OK) {
    cleanup();
    return report_failure(status);
  }

  std::printf("best metric: %.17g\n", flash_outcome_best_metric(outcome));
  std::printf("best path: %s\n", flash_outcome_best_path(outcome));
  std::printf("best hyperparams: %s\n", flash_outcome_best_hyperparams_json(outcome));
  if (!flash_outcome_within_pruned(outcome)) {
    std::printf("note: no run landed inside the pruned subgraph; best overall shown\n");
  }
  std::printf("runs: %zu\n", flash_outcome_trace_rows(outcome));
  std::printf("pruned paths:\n");
  for (std::size_t i = 0; i < flash_outcome_top_path_count(outcome); ++i) {
    std::printf("  %zu. %s\n", i + 1, flash_outcome_top_path(outcome, i));
  }
  cleanup();
  return 0;
}

int report_command(const std::string& trace, const std::string& csv) {
  char* summary = nullptr;
  const flash_status status =
      flash_report(trace.c_str(), csv.empty() ? nullptr : csv.c_str(), &summary);
  if (status != FLASH_OK) return report_failure(status);
  std::fputs(summary, stdout);
  flash_string_free(summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budgeted configuration search for multi-step analytic pipelines"};
  app.require_subcommand(1);

  RunOptions o;
  auto* run = app.add_subcommand("run", "Search a pipeline spec and write a trace");
  run->add_option("--spec", o.spec, "Pipeline spec (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--executor", o.executor, "synthetic | subprocess:\"<command>\"")
      ->capture_default_str();
  run->add_option("--t-init", o.t_init, "Phase 1 budget: runs (30) or seconds (30s)")
      ->capture_default_str();
  run->add_option("--t-prune", o.t_prune, "Phase 2 budget: runs (30) or seconds (30s)")
      ->capture_default_str();
  run->add_option("--t-total", o.t_total, "Total budget in seconds")->capture_default_str();
  run->add_option("--top-r", o.top_r, "Paths kept after pruning")->capture_default_str();
  run->add_option("--xi", o.xi, "EIPS exploration parameter")->capture_default_str();
  run->add_option("--ridge-lambda", o.ridge_lambda, "Ridge penalty")->capture_default_str();
  run->add_option("--cache-bytes", o.cache_bytes, "Prefix cache budget")->capture_default_str();
  run->add_option("--candidate-budget", o.candidate_budget, "Paths scored per selection")
      ->capture_default_str();
  run->add_option("--per-run-timeout", o.per_run_timeout, "Seconds per pipeline run")
      ->capture_default_str();
  run->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  run->add_option("--dataset-id", o.dataset_id, "Input dataset token")->capture_default_str();
  run->add_option("--synthetic-noise-sd", o.noise_sd, "Synthetic benchmark noise")
      ->capture_default_str();
  run->add_option("--synthetic-seed", o.synthetic_seed,
                  "Synthetic benchmark seed (defaults to --seed)");
  run->add_option("--trace-out", o.trace_out, "Trace CSV to write");

  std::string trace;
  std::string csv;
  auto* report = app.add_subcommand("report", "Summarize a trace file");
  report->add_option("--trace", trace, "Trace CSV")->required();
  report->add_option("--csv", csv, "Write the best-so-far series here");

  CLI11_PARSE(app, argc, argv);

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  if (run->parsed()) return run_command(o);
  return report_command(trace, csv);
}
