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

#include "flash/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "flash/digest.hpp"
#include "flash/error.hpp"
#include "flash/spec_io.hpp"

namespace flash {

namespace {

std::atomic<bool> g_interrupt{false};

std::int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

[[noreturn]] void config_error(const std::string& message) {
  throw Error(ErrorCode::kConfigParse, message);
}

std::string quote(std::string_view field) {
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string hyperparams_text(const HyperparamAssignment& hp) {
  return canonical_json(assignment_to_json(hp));
}

// Splits one CSV record starting at `pos`; advances past its line break.
std::vector<std::string> split_record(std::string_view text, std::size_t& pos) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool in_quotes = false;
  while (pos < text.size()) {
    const char c = text[pos++];
    if (in_quotes) {
      if (c == '"') {
        if (pos < text.size() && text[pos] == '"') {
          field += '"';
          ++pos;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && field.empty() && !quoted) {
      quoted = in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      quoted = false;
    } else if (c == '\n') {
      break;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (in_quotes) throw Error(ErrorCode::kTraceParse, "unterminated quoted field");
  fields.push_back(std::move(field));
  return fields;
}

template <typename T>
T parse_number(const std::string& field, std::size_t line, const char* column) {
  T value{};
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw Error(ErrorCode::kTraceParse, "line " + std::to_string(line) + ": bad " + column +
                                            " value '" + field + "'");
  }
  return value;
}

}  // namespace

void request_interrupt() noexcept { g_interrupt.store(true, std::memory_order_relaxed); }
void clear_interrupt() noexcept { g_interrupt.store(false, std::memory_order_relaxed); }
bool interrupt_requested() noexcept { return g_interrupt.load(std::memory_order_relaxed); }

PhaseBudget PhaseBudget::parse(std::string_view text) {
  PhaseBudget out;
  std::string_view number = text;
  if (!number.empty() && number.back() == 's') {
    out.unit = Unit::kSeconds;
    number.remove_suffix(1);
  }
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), value);
  if (number.empty() || ec != std::errc() || ptr != number.data() + number.size() ||
      !std::isfinite(value) || value <= 0.0) {
    config_error("phase budget must be a positive count or seconds with an 's' suffix, got '" +
                 std::string(text) + "'");
  }
  if (out.unit == Unit::kIterations && value != std::floor(value)) {
    config_error("iteration budget must be a whole number, got '" + std::string(text) + "'");
  }
  out.amount = value;
  return out;
}

std::string PhaseBudget::to_string() const {
  return canonical_double(amount) + (unit == Unit::kSeconds ? "s" : "");
}

void BudgetConfig::validate() const {
  if (!(t_init.amount > 0.0) || !(t_prune.amount > 0.0)) config_error("phase budgets must be > 0");
  if (!(t_total > 0.0) || !std::isfinite(t_total)) config_error("t_total must be > 0");
  if (!(per_run_timeout > 0.0)) config_error("per_run_timeout must be > 0");
  if (top_r < 1) config_error("top_r must be >= 1");
  if (!(xi >= 0.0) || !std::isfinite(xi)) config_error("xi must be finite and >= 0");
  if (!(ridge_lambda > 0.0) || !std::isfinite(ridge_lambda)) {
    config_error("ridge_lambda must be > 0");
  }
  if (candidate_budget < 1) config_error("candidate_budget must be >= 1");
  if (dataset_id.empty()) config_error("dataset_id must not be empty");
}

std::string format_trace_row(const TraceRow& row) {
  std::string out;
  out += std::to_string(row.iter);
  out += ',' + std::to_string(row.phase);
  out += ',' + canonical_double(row.wall_clock_s);
  out += ',' + quote(row.path);
  out += ',' + quote(row.hyperparams_json);
  out += ',' + canonical_double(row.metric);
  out += ',' + canonical_double(row.cost_s);
  out += ',' + canonical_double(row.best_so_far);
  out += ',' + std::to_string(row.cache_hits);
  out += ',' + std::to_string(row.cache_misses);
  return out;
}

std::vector<TraceRow> parse_trace(std::string_view text) {
  std::size_t pos = 0;
  const auto header = split_record(text, pos);
  std::string joined;
  for (std::size_t i = 0; i < header.size(); ++i) joined += (i ? "," : "") + header[i];
  if (joined != kTraceHeader) throw Error(ErrorCode::kTraceParse, "unexpected trace header");

  std::vector<TraceRow> rows;
  std::size_t line = 1;
  while (pos < text.size()) {
    ++line;
    const auto f = split_record(text, pos);
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() != 10) {
      throw Error(ErrorCode::kTraceParse,
                  "line " + std::to_string(line) + ": expected 10 fields, got " +
                      std::to_string(f.size()));
    }
    TraceRow row;
    row.iter = parse_number<std::size_t>(f[0], line, "iter");
    row.phase = parse_number<int>(f[1], line, "phase");
    if (row.phase < 0 || row.phase > 3) {
      throw Error(ErrorCode::kTraceParse, "line " + std::to_string(line) + ": bad phase");
    }
    row.wall_clock_s = parse_number<double>(f[2], line, "wall_clock_s");
    row.path = f[3];
    row.hyperparams_json = f[4];
    row.metric = parse_number<double>(f[5], line, "metric");
    row.cost_s = parse_number<double>(f[6], line, "cost_s");
    row.best_so_far = parse_number<double>(f[7], line, "best_so_far");
    row.cache_hits = parse_number<std::size_t>(f[8], line, "cache_hits");
    row.cache_misses = parse_number<std::size_t>(f[9], line, "cache_misses");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::kTraceParse, "trace has no rows");
  return rows;
}

std::vector<TraceRow> read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open trace " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trace(buf.str());
}

TraceWriter::TraceWriter(const std::filesystem::path& path)
    : out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw Error(ErrorCode::kIo, "cannot write trace " + path.string());
  out_ << kTraceHeader << '\n' << std::flush;
}

void TraceWriter::append(const TraceRow& row) {
  out_ << format_trace_row(row) << '\n' << std::flush;
  if (!out_) throw Error(ErrorCode::kIo, "trace write failed");
}

RunRecorder::RunRecorder(const PipelineSpec& spec, Executor& executor, const BudgetConfig& config,
                         TraceSink sink)
    : spec_(spec),
      executor_(executor),
      config_(config),
      sink_(std::move(sink)),
      cache_(config.cache_budget_bytes),
      wall_start_ns_(now_ns()) {}

bool RunRecorder::seen(const PipelinePath& path, const HyperparamAssignment& hp) const {
  return seen_.contains(
      make_prefix_key(spec_, path, hp, path.num_steps(), config_.dataset_id).digest);
}

double RunRecorder::clock() const {
  if (executor_.time_mode() == TimeMode::kSimulated) return simulated_;
  return static_cast<double>(now_ns() - wall_start_ns_) * 1e-9;
}

double RunRecorder::penalty_metric() const {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& r : records_) {
    if (!r.penalized) worst = std::max(worst, r.metric);
  }
  return std::isfinite(worst) ? worst + kFailurePenalty : kFailurePenalty;
}

const EvaluationRecord& RunRecorder::evaluate(const PipelinePath& path,
                                              const HyperparamAssignment& hp, int phase) {
  EvaluationRecord record{path, hp, 0.0, 0.0, phase, false};
  std::size_t hits = 0;
  std::size_t misses = 0;
  try {
    RunResult result = run_pipeline_with_cache(spec_, config_.dataset_id, path, hp, cache_,
                                               executor_, config_.per_run_timeout);
    record.metric = result.metric;
    record.cost_seconds = result.cost_seconds;
    hits = result.cache_hits();
    misses = result.cache_misses();
  } catch (const StepTimeout&) {
    record.metric = penalty_metric();
    record.cost_seconds = config_.per_run_timeout;
    record.penalized = true;
  } catch (const StepFailed&) {
    record.metric = penalty_metric();
    record.penalized = true;
  }
  simulated_ += record.cost_seconds;
  seen_.insert(make_prefix_key(spec_, path, hp, path.num_steps(), config_.dataset_id).digest);
  records_.push_back(std::move(record));
  const EvaluationRecord& stored = records_.back();

  TraceRow row;
  row.iter = trace_.size() + 1;
  row.phase = phase;
  row.wall_clock_s = clock();
  row.path = path_label(spec_, path);
  row.hyperparams_json = hyperparams_text(hp);
  row.metric = stored.metric;
  row.cost_s = stored.cost_seconds;
  row.best_so_far =
      trace_.empty() ? stored.metric : std::min(trace_.back().best_so_far, stored.metric);
  row.cache_hits = hits;
  row.cache_misses = misses;
  trace_.push_back(row);
  if (sink_) sink_(row);
  return stored;
}

namespace {

TuningOutcome best_outcome(const std::vector<EvaluationRecord>& records,
                           const std::vector<TraceRow>& trace, const PipelineSpec& spec,
                           const PipelineSpec* pruned) {
  const EvaluationRecord* best = nullptr;
  const EvaluationRecord* best_any = nullptr;
  for (const auto& r : records) {
    if (!best_any || r.metric < best_any->metric) best_any = &r;
    if (pruned && !translate_path(spec, r.path, *pruned)) continue;
    if (!best || r.metric < best->metric) best = &r;
  }
  if (!best_any) throw Error(ErrorCode::kBudgetTooSmall, "no run completed within the budget");
  const bool within = best != nullptr;
  if (!best) best = best_any;
  return {best->path, best->hyperparams, best->metric, within, {}, trace};
}

}  // namespace

TuningSession::TuningSession(PipelineSpec spec, Executor& executor, BudgetConfig config,
                             TraceSink sink)
    : spec_(std::move(spec)),
      executor_(executor),
      config_(std::move(config)),
      recorder_(spec_, executor_, config_, std::move(sink)),
      rng_(config_.seed),
      observations_(spec_.num_algorithms()),
      design_(spec_.num_algorithms()) {
  config_.validate();
}

void TuningSession::check_interrupt() const {
  if (interrupt_requested()) throw Error(ErrorCode::kInterrupted, "interrupted");
}

bool TuningSession::total_budget_left() const { return clock_seconds() < config_.t_total; }

bool TuningSession::phase_budget_left(const PhaseBudget& budget, std::size_t runs,
                                      double started) const {
  if (!total_budget_left()) return false;
  if (budget.unit == PhaseBudget::Unit::kIterations) {
    return static_cast<double>(runs) < budget.amount;
  }
  return clock_seconds() - started < budget.amount;
}

void TuningSession::evaluate(const PipelinePath& path, const HyperparamAssignment& hp,
                             int phase) {
  const EvaluationRecord& rec = recorder_.evaluate(path, hp, phase);
  observations_.append(path.onehot(), rec.metric, rec.cost_seconds);
}

void TuningSession::refit() {
  metric_model_ = fit_metric_model(observations_, config_.ridge_lambda);
  cost_model_ = fit_cost_model(observations_, config_.ridge_lambda);
}

void TuningSession::phase1_initialize() {
  if (stage_ != 0) throw Error(ErrorCode::kInvalidArgument, "phase 1 already ran");
  stage_ = 1;
  const auto candidates = generate_candidates(
      spec_, default_candidate_count(spec_, config_.candidate_budget), rng_);
  const double started = clock_seconds();
  std::size_t runs = 0;
  while (phase_budget_left(config_.t_init, runs, started)) {
    check_interrupt();
    const PipelinePath& path = greedy_online_next(candidates, design_.gram());
    design_.add(path);
    const HyperparamAssignment hp = sample_random_hyperparams(spec_, path, rng_);
    evaluate(path, hp, 1);
    ++runs;
    refit();
  }
  if (runs == 0) throw Error(ErrorCode::kBudgetTooSmall, "phase 1 completed no run");
}

const PipelineSpec& TuningSession::phase2_prune() {
  if (stage_ != 1) throw Error(ErrorCode::kInvalidArgument, "phase 2 needs phase 1 first");
  stage_ = 2;
  const double started = clock_seconds();
  std::size_t runs = 0;
  while (phase_budget_left(config_.t_prune, runs, started)) {
    check_interrupt();
    const PipelinePath path =
        select_next_path(spec_, *metric_model_, *cost_model_, observations_.best_metric(),
                         config_.xi, config_.candidate_budget, rng_);
    const HyperparamAssignment hp = sample_random_hyperparams(spec_, path, rng_);
    evaluate(path, hp, 2);
    ++runs;
    refit();
  }
  phase2_iterations_ = runs;

  auto candidates = sample_distinct_paths(spec_, config_.candidate_budget, rng_);
  for (const auto& r : records()) candidates.push_back(r.path);
  std::sort(candidates.begin(), candidates.end());
  const auto ranked = rank_by_eips(std::move(candidates), *metric_model_, *cost_model_,
                                   observations_.best_metric(), 0.0);
  top_paths_.clear();
  for (std::size_t i = 0; i < ranked.size() && i < config_.top_r; ++i) {
    top_paths_.push_back(ranked[i].path);
  }
  pruned_ = prune_to_subgraph(spec_, top_paths_);
  return *pruned_;
}

HistorySet TuningSession::seeded_history() const {
  HistorySet history;
  if (!pruned_) return history;
  for (const auto& r : records()) {
    if (auto p = translate_path(spec_, r.path, *pruned_)) {
      history.push_back({std::move(*p), r.hyperparams, r.metric});
    }
  }
  return history;
}

TuningOutcome TuningSession::phase3_finetune() {
  if (stage_ != 2) throw Error(ErrorCode::kInvalidArgument, "phase 3 needs phase 2 first");
  stage_ = 3;
  const PipelineSpec& pruned = *pruned_;
  std::optional<DensityModel> model;
  if (HistorySet seed = seeded_history(); !seed.empty()) {
    model = build_model(pruned, std::move(seed));
  }
  while (total_budget_left()) {
    check_interrupt();
    std::optional<std::pair<PipelinePath, HyperparamAssignment>> next;
    std::optional<PipelinePath> full;
    for (int draw = 0; draw < kMaxDuplicateDraws; ++draw) {
      if (model && draw == 0) {
        next = propose(*model, kDefaultProposalCandidates, rng_);
      } else {
        PipelinePath p = sample_random_path(pruned, rng_);
        HyperparamAssignment hp = sample_random_hyperparams(pruned, p, rng_);
        next.emplace(std::move(p), std::move(hp));
      }
      full = translate_path(pruned, next->first, spec_);
      if (!recorder_.seen(*full, next->second)) break;
      full.reset();
    }
    if (!full) break;
    evaluate(*full, next->second, 3);
    HistoryRecord entry{next->first, next->second, records().back().metric};
    if (model) {
      model = update(*model, std::move(entry));
    } else {
      model = build_model(pruned, {std::move(entry)});
    }
  }
  TuningOutcome out = best_outcome(records(), trace(), spec_, &pruned);
  out.top_paths = top_paths_;
  return out;
}

TuningOutcome TuningSession::run() {
  phase1_initialize();
  phase2_prune();
  return phase3_finetune();
}

TuningOutcome random_search(const PipelineSpec& spec, Executor& executor,
                            const BudgetConfig& config, TraceSink sink) {
  config.validate();
  RunRecorder recorder(spec, executor, config, std::move(sink));
  Rng rng(config.seed);
  while (recorder.clock() < config.t_total) {
    if (interrupt_requested()) throw Error(ErrorCode::kInterrupted, "interrupted");
    bool fresh = false;
    for (int draw = 0; draw < kMaxDuplicateDraws && !fresh; ++draw) {
      PipelinePath path = sample_random_path(spec, rng);
      HyperparamAssignment hp = sample_random_hyperparams(spec, path, rng);
      if (recorder.seen(path, hp)) continue;
      recorder.evaluate(path, hp, 0);
      fresh = true;
    }
    if (!fresh) break;
  }
  return best_outcome(recorder.records(), recorder.trace(), spec, nullptr);
}

double best_at(const std::vector<TraceRow>& trace, double seconds) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& row : trace) {
    if (row.wall_clock_s <= seconds) best = std::min(best, row.metric);
  }
  return best;
}

TraceSummary summarize_trace(const std::vector<TraceRow>& trace) {
  if (trace.empty()) throw Error(ErrorCode::kTraceParse, "trace has no rows");
  TraceSummary s;
  s.rows = trace.size();
  double running = std::numeric_limits<double>::infinity();
  for (const auto& row : trace) {
    ++s.phase_counts.at(static_cast<std::size_t>(row.phase));
    s.cache_hits += row.cache_hits;
    s.cache_misses += row.cache_misses;
    if (row.metric < running) {
      running = row.metric;
      s.best_iter = row.iter;
      s.best_path = row.path;
      s.best_hyperparams_json = row.hyperparams_json;
    }
    s.series.push_back({row.iter, row.wall_clock_s, row.metric, running});
    s.total_seconds = std::max(s.total_seconds, row.wall_clock_s);
  }
  s.best_metric = running;
  const std::size_t lookups = s.cache_hits + s.cache_misses;
  s.hit_rate = lookups ? static_cast<double>(s.cache_hits) / static_cast<double>(lookups) : 0.0;
  return s;
}

std::string format_summary(const TraceSummary& s) {
  std::ostringstream out;
  out << "rows: " << s.rows << '\n';
  for (int phase = 0; phase <= 3; ++phase) {
    const std::size_t n = s.phase_counts[static_cast<std::size_t>(phase)];
    if (phase == 0 && n == 0) continue;
    out << (phase == 0 ? std::string("baseline") : "phase " + std::to_string(phase))
        << " runs: " << n << '\n';
  }
  out << "clock: " << canonical_double(s.total_seconds) << " s\n";
  out << "cache hits: " << s.cache_hits << ", misses: " << s.cache_misses
      << ", hit rate: " << canonical_double(s.hit_rate) << '\n';
  out << "best metric: " << canonical_double(s.best_metric) << " (iter " << s.best_iter << ")\n";
  out << "best path: " << s.best_path << '\n';
  out << "best hyperparams: " << s.best_hyperparams_json << '\n';
  out << "best-so-far series (iter, wall_clock_s, best_so_far):\n";
  double last = std::numeric_limits<double>::infinity();
  for (const auto& p : s.series) {
    if (p.best_so_far < last) {
      out << "  " << p.iter << ' ' << canonical_double(p.wall_clock_s) << ' '
          << canonical_double(p.best_so_far) << '\n';
      last = p.best_so_far;
    }
  }
  return out.str();
}

std::string summary_csv(const TraceSummary& s) {
  std::string out = "iter,wall_clock_s,metric,best_so_far\n";
  for (const auto& p : s.series) {
    out += std::to_string(p.iter) + ',' + canonical_double(p.wall_clock_s) + ',' +
           canonical_double(p.metric) + ',' + canonical_double(p.best_so_far) + '\n';
  }
  return out;
}

}  // namespace flash
