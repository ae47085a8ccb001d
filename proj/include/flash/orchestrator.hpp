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

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "flash/cache.hpp"
#include "flash/executor.hpp"
#include "flash/finetune.hpp"
#include "flash/optimal_design.hpp"
#include "flash/pipeline_graph.hpp"
#include "flash/surrogate.hpp"

namespace flash {

// Budget of phases 1 and 2: a number of runs or a number of seconds.
struct PhaseBudget {
  enum class Unit { kIterations, kSeconds };

  Unit unit = Unit::kIterations;
  double amount = 30;

  static PhaseBudget iterations(std::size_t n) { return {Unit::kIterations, double(n)}; }
  static PhaseBudget seconds(double s) { return {Unit::kSeconds, s}; }

  // "30" is 30 runs, "30s" is 30 seconds. Throws Error(kConfigParse).
  static PhaseBudget parse(std::string_view text);
  std::string to_string() const;

  friend bool operator==(const PhaseBudget&, const PhaseBudget&) = default;
};

struct BudgetConfig {
  PhaseBudget t_init = PhaseBudget::iterations(30);
  PhaseBudget t_prune = PhaseBudget::iterations(30);
  double t_total = 36000.0;  // seconds, covering all three phases
  double per_run_timeout = 900.0;
  std::size_t top_r = 10;
  double xi = 100.0;
  double ridge_lambda = kDefaultRidgeLambda;
  std::uint64_t cache_budget_bytes = kDefaultCacheBytes;
  std::size_t candidate_budget = 2000;
  std::uint64_t seed = 0;
  std::string dataset_id = "input";

  // Throws Error(kConfigParse) on out-of-range values.
  void validate() const;
};

// Draws tried before a loop concludes its space holds no unevaluated
// configuration.
inline constexpr int kMaxDuplicateDraws = 32;

// Penalty added to the worst observed metric for timed-out or failed runs.
inline constexpr double kFailurePenalty = 1.0;

struct TraceRow {
  std::size_t iter = 0;
  int phase = 1;  // 1..3 for the optimizer; 0 for baseline random search
  double wall_clock_s = 0.0;
  std::string path;
  std::string hyperparams_json;
  double metric = 0.0;
  double cost_s = 0.0;
  double best_so_far = 0.0;
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;

  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

inline constexpr std::string_view kTraceHeader =
    "iter,phase,wall_clock_s,path,hyperparams_json,metric,cost_s,best_so_far,cache_hits,"
    "cache_misses";

std::string format_trace_row(const TraceRow& row);

// Throws Error(kTraceParse) on a bad header, a malformed row, or no rows.
std::vector<TraceRow> parse_trace(std::string_view text);
std::vector<TraceRow> read_trace(const std::filesystem::path& path);

// Appends rows to a CSV file, flushing after each one.
class TraceWriter {
 public:
  explicit TraceWriter(const std::filesystem::path& path);
  void append(const TraceRow& row);

 private:
  std::ofstream out_;
};

using TraceSink = std::function<void(const TraceRow&)>;

// One evaluated configuration. Paths are always expressed in the full spec.
struct EvaluationRecord {
  PipelinePath path;
  HyperparamAssignment hyperparams;
  double metric = 0.0;
  double cost_seconds = 0.0;
  int phase = 1;
  bool penalized = false;  // timed out or failed; metric is the penalty
};

struct TuningOutcome {
  PipelinePath best_path;
  HyperparamAssignment best_hyperparams;
  double best_metric = 0.0;
  // False only when nothing was ever evaluated inside the pruned subgraph and
  // the outcome falls back to the best record overall.
  bool within_pruned = true;
  std::vector<PipelinePath> top_paths;  // ranked phase-2 selection
  std::vector<TraceRow> trace;
};

// Runs configurations through a shared cache and keeps the clock, the
// evaluation records and the trace. Timed-out and failed runs are recorded
// with the penalty metric; other executor errors propagate.
class RunRecorder {
 public:
  RunRecorder(const PipelineSpec& spec, Executor& executor, const BudgetConfig& config,
              TraceSink sink = {});
  RunRecorder(const RunRecorder&) = delete;
  RunRecorder& operator=(const RunRecorder&) = delete;

  const EvaluationRecord& evaluate(const PipelinePath& path, const HyperparamAssignment& hp,
                                   int phase);

  // Whether this exact configuration was already evaluated.
  bool seen(const PipelinePath& path, const HyperparamAssignment& hp) const;

  // Simulated seconds charged so far, or wall seconds since construction.
  double clock() const;
  // Worst non-penalized metric plus kFailurePenalty; kFailurePenalty if none.
  double penalty_metric() const;

  const std::vector<EvaluationRecord>& records() const { return records_; }
  const std::vector<TraceRow>& trace() const { return trace_; }
  const CachePool& cache() const { return cache_; }

 private:
  const PipelineSpec& spec_;
  Executor& executor_;
  const BudgetConfig& config_;
  TraceSink sink_;
  CachePool cache_;
  std::vector<EvaluationRecord> records_;
  std::vector<TraceRow> trace_;
  std::unordered_set<Digest128, Digest128Hash> seen_;
  double simulated_ = 0.0;
  std::int64_t wall_start_ns_;
};

// Process-wide interrupt flag, safe to set from a signal handler.
void request_interrupt() noexcept;
void clear_interrupt() noexcept;
bool interrupt_requested() noexcept;

// The three-phase search over one spec. Phases must run in order; each call
// consumes budget from the shared clock (simulated seconds when the executor
// declares simulated time, wall seconds otherwise). Interrupts surface as
// Error(kInterrupted) after the current run's trace row is written.
class TuningSession {
 public:
  TuningSession(PipelineSpec spec, Executor& executor, BudgetConfig config, TraceSink sink = {});
  TuningSession(const TuningSession&) = delete;
  TuningSession& operator=(const TuningSession&) = delete;

  // Optimal-design initialization. Throws Error(kBudgetTooSmall) when no run
  // completes.
  void phase1_initialize();

  // EIPS-driven exploration, then ranking at xi = 0 and pruning to the top-r
  // paths. Returns the pruned spec.
  const PipelineSpec& phase2_prune();

  // Density-ratio tuning inside the pruned spec until t_total is spent or
  // every draw repeats an evaluated configuration.
  TuningOutcome phase3_finetune();

  TuningOutcome run();

  const PipelineSpec& spec() const { return spec_; }
  const BudgetConfig& config() const { return config_; }
  const ObservationSet& observations() const { return observations_; }
  const std::vector<EvaluationRecord>& records() const { return recorder_.records(); }
  const std::vector<TraceRow>& trace() const { return recorder_.trace(); }
  const LinearSurrogate& metric_model() const { return *metric_model_; }
  const LinearSurrogate& cost_model() const { return *cost_model_; }
  const DesignState& design() const { return design_; }
  const CachePool& cache() const { return recorder_.cache(); }
  double clock_seconds() const { return recorder_.clock(); }
  const std::optional<PipelineSpec>& pruned_spec() const { return pruned_; }
  const std::vector<PipelinePath>& top_paths() const { return top_paths_; }
  std::size_t phase2_iterations() const { return phase2_iterations_; }

  // Phase-3 seed: records whose path lies in the pruned spec, re-encoded there.
  HistorySet seeded_history() const;

 private:
  void evaluate(const PipelinePath& path, const HyperparamAssignment& hp, int phase);
  bool phase_budget_left(const PhaseBudget& budget, std::size_t runs, double started) const;
  bool total_budget_left() const;
  void refit();
  void check_interrupt() const;

  PipelineSpec spec_;
  Executor& executor_;
  BudgetConfig config_;
  RunRecorder recorder_;
  Rng rng_;
  ObservationSet observations_;
  DesignState design_;
  std::optional<LinearSurrogate> metric_model_;
  std::optional<LinearSurrogate> cost_model_;
  std::optional<PipelineSpec> pruned_;
  std::vector<PipelinePath> top_paths_;
  std::size_t phase2_iterations_ = 0;
  int stage_ = 0;
};

// Uniformly random fresh configurations until t_total is spent, with the
// same cache, clock and penalty rules as TuningSession. Trace rows use phase 0.
TuningOutcome random_search(const PipelineSpec& spec, Executor& executor,
                            const BudgetConfig& config, TraceSink sink = {});

// Best-so-far value at a clock reading: the minimum metric over rows whose
// wall_clock_s does not exceed `seconds`; +inf if there are none.
double best_at(const std::vector<TraceRow>& trace, double seconds);

struct TraceSummary {
  std::array<std::size_t, 4> phase_counts{};  // index = phase
  std::size_t rows = 0;
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;
  double hit_rate = 0.0;
  double best_metric = 0.0;
  std::size_t best_iter = 0;
  std::string best_path;
  std::string best_hyperparams_json;
  double total_seconds = 0.0;
  // (iter, wall_clock_s, metric, running minimum of metric)
  struct Point {
    std::size_t iter;
    double wall_clock_s;
    double metric;
    double best_so_far;
  };
  std::vector<Point> series;
};

// Throws Error(kTraceParse) for an empty trace.
TraceSummary summarize_trace(const std::vector<TraceRow>& trace);
std::string format_summary(const TraceSummary& summary);
std::string summary_csv(const TraceSummary& summary);

}  // namespace flash
