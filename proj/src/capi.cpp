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

#include "flash/flash.h"

#include <charconv>
#include <cstring>
#include <exception>
#include <fstream>
#include <memory>
#include <new>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>

#include "flash/error.hpp"
#include "flash/executor.hpp"
#include "flash/orchestrator.hpp"
#include "flash/spec_io.hpp"

struct flash_spec {
  flash::PipelineSpec spec;
};

struct flash_config {
  flash::BudgetConfig budget;
  std::string executor = "synthetic";
  double noise_sd = 0.02;
  std::optional<std::uint64_t> synthetic_seed;
};

struct flash_outcome {
  flash::TuningOutcome outcome;
  std::string best_path;
  std::string best_hyperparams;
  std::vector<std::string> top_paths;
};

namespace {

thread_local std::string g_last_error;

flash_status status_of(flash::ErrorCode code) {
  using flash::ErrorCode;
  switch (code) {
    case ErrorCode::kInvalidSpec:
    case ErrorCode::kUnknownAlgorithm:
    case ErrorCode::kEdgeViolation:
    case ErrorCode::kPathCountExceedsLimit:
    case ErrorCode::kEmptyPathSet:
      return FLASH_ERR_INVALID_SPEC;
    case ErrorCode::kConfigParse:
      return FLASH_ERR_CONFIG_PARSE;
    case ErrorCode::kTraceParse:
      return FLASH_ERR_TRACE_PARSE;
    case ErrorCode::kIo:
      return FLASH_ERR_IO;
    case ErrorCode::kStepTimeout:
    case ErrorCode::kExecutorFailure:
      return FLASH_ERR_EXECUTOR;
    case ErrorCode::kHandshakeFailure:
      return FLASH_ERR_HANDSHAKE;
    case ErrorCode::kProtocolViolation:
      return FLASH_ERR_PROTOCOL;
    case ErrorCode::kWorkerExited:
      return FLASH_ERR_WORKER_EXITED;
    case ErrorCode::kBudgetTooSmall:
      return FLASH_ERR_BUDGET_TOO_SMALL;
    case ErrorCode::kInterrupted:
      return FLASH_ERR_INTERRUPTED;
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kNonSymmetricInput:
    case ErrorCode::kEmptyHistory:
      return FLASH_ERR_INVALID_ARGUMENT;
  }
  return FLASH_ERR_INTERNAL;
}

flash_status fail(flash_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <typename F>
flash_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return FLASH_OK;
  } catch (const flash::Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(FLASH_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(FLASH_ERR_INTERNAL, e.what());
  }
}

template <typename T>
T parse_value(std::string_view key, std::string_view text) {
  T value{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty()) {
    throw flash::Error(flash::ErrorCode::kConfigParse,
                       "bad value for " + std::string(key) + ": '" + std::string(text) + "'");
  }
  return value;
}

std::unique_ptr<flash::Executor> make_executor(const flash_config& config,
                                               const flash::PipelineSpec& spec) {
  if (config.executor == "synthetic") {
    const std::uint64_t seed = config.synthetic_seed.value_or(config.budget.seed);
    return std::make_unique<flash::SyntheticExecutor>(
        flash::make_synthetic(spec, seed, config.noise_sd));
  }
  constexpr std::string_view prefix = "subprocess:";
  return flash::spawn_external(config.executor.substr(prefix.size()), spec);
}

flash_outcome* wrap(const flash::PipelineSpec& spec, flash::TuningOutcome outcome) {
  std::string best_path = flash::path_label(spec, outcome.best_path);
  std::string best_hp = flash::canonical_json(flash::assignment_to_json(outcome.best_hyperparams));
  std::vector<std::string> top;
  for (const auto& p : outcome.top_paths) top.push_back(flash::path_label(spec, p));
  return new flash_outcome{std::move(outcome), std::move(best_path), std::move(best_hp),
                           std::move(top)};
}

template <typename Search>
flash_status run_search(const flash_spec* spec, const flash_config* config, const char* trace_path,
                        flash_outcome** out, Search&& search) {
  if (!spec || !config || !out) return fail(FLASH_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    config->budget.validate();
    std::unique_ptr<flash::TraceWriter> writer;
    flash::TraceSink sink;
    if (trace_path) {
      writer = std::make_unique<flash::TraceWriter>(trace_path);
      sink = [w = writer.get()](const flash::TraceRow& row) { w->append(row); };
    }
    auto executor = make_executor(*config, spec->spec);
    *out = wrap(spec->spec, search(*executor, std::move(sink)));
  });
}

}  // namespace

extern "C" {

const char* flash_last_error(void) { return g_last_error.c_str(); }

const char* flash_status_name(flash_status status) {
  switch (status) {
    case FLASH_OK: return "ok";
    case FLASH_ERR_INVALID_ARGUMENT: return "invalid argument";
    case FLASH_ERR_INVALID_SPEC: return "invalid spec";
    case FLASH_ERR_CONFIG_PARSE: return "config parse error";
    case FLASH_ERR_TRACE_PARSE: return "trace parse error";
    case FLASH_ERR_IO: return "i/o error";
    case FLASH_ERR_EXECUTOR: return "executor failure";
    case FLASH_ERR_HANDSHAKE: return "handshake failure";
    case FLASH_ERR_PROTOCOL: return "protocol violation";
    case FLASH_ERR_WORKER_EXITED: return "worker exited";
    case FLASH_ERR_BUDGET_TOO_SMALL: return "budget too small";
    case FLASH_ERR_INTERRUPTED: return "interrupted";
    case FLASH_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

flash_status flash_spec_load_file(const char* path, flash_spec** out) {
  if (!path || !out) return fail(FLASH_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] { *out = new flash_spec{flash::load_spec_file(path)}; });
}

flash_status flash_spec_load_json(const char* json_text, flash_spec** out) {
  if (!json_text || !out) return fail(FLASH_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] { *out = new flash_spec{flash::parse_spec(std::string_view(json_text))}; });
}

void flash_spec_free(flash_spec* spec) { delete spec; }

size_t flash_spec_num_steps(const flash_spec* spec) { return spec ? spec->spec.num_steps() : 0; }

size_t flash_spec_num_algorithms(const flash_spec* spec) {
  return spec ? spec->spec.num_algorithms() : 0;
}

double flash_spec_path_count(const flash_spec* spec) {
  return spec ? spec->spec.path_count() : 0.0;
}

flash_status flash_config_create(flash_config** out) {
  if (!out) return fail(FLASH_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] { *out = new flash_config(); });
}

void flash_config_free(flash_config* config) { delete config; }

flash_status flash_config_set(flash_config* config, const char* key, const char* value) {
  if (!config || !key || !value) return fail(FLASH_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const std::string_view k(key);
    const std::string_view v(value);
    auto& b = config->budget;
    if (k == "t_init") {
      b.t_init = flash::PhaseBudget::parse(v);
    } else if (k == "t_prune") {
      b.t_prune = flash::PhaseBudget::parse(v);
    } else if (k == "t_total") {
      b.t_total = parse_value<double>(k, v);
    } else if (k == "per_run_timeout") {
      b.per_run_timeout = parse_value<double>(k, v);
    } else if (k == "top_r") {
      b.top_r = parse_value<std::size_t>(k, v);
    } else if (k == "xi") {
      b.xi = parse_value<double>(k, v);
    } else if (k == "ridge_lambda") {
      b.ridge_lambda = parse_value<double>(k, v);
    } else if (k == "cache_bytes") {
      b.cache_budget_bytes = parse_value<std::uint64_t>(k, v);
    } else if (k == "candidate_budget") {
      b.candidate_budget = parse_value<std::size_t>(k, v);
    } else if (k == "seed") {
      b.seed = parse_value<std::uint64_t>(k, v);
    } else if (k == "dataset_id") {
      b.dataset_id = std::string(v);
    } else if (k == "synthetic_noise_sd") {
      const double sd = parse_value<double>(k, v);
      if (!(sd >= 0.0)) {
        throw flash::Error(flash::ErrorCode::kConfigParse, "synthetic_noise_sd must be >= 0");
      }
      config->noise_sd = sd;
    } else if (k == "synthetic_seed") {
      config->synthetic_seed = parse_value<std::uint64_t>(k, v);
    } else {
      throw flash::Error(flash::ErrorCode::kConfigParse, "unknown config key '" + std::string(k) + "'");
    }
  });
}

flash_status flash_config_set_executor(flash_config* config, const char* executor) {
  if (!config || !executor) return fail(FLASH_ERR_INVALID_ARGUMENT, "null argument");
  const std::string_view e(executor);
  if (e == "synthetic") {
    config->executor = "synthetic";
    return FLASH_OK;
  }
  constexpr std::string_view prefix = "subprocess:";
  if (e.starts_with(prefix) && e.size() > prefix.size()) {
    config->executor = std::string(e);
    return FLASH_OK;
  }
  return fail(FLASH_ERR_CONFIG_PARSE,
              "executor must be 'synthetic' or 'subprocess:<command>', got '" + std::string(e) + "'");
}

flash_status flash_run(const flash_spec* spec, const flash_config* config, const char* trace_path,
                       flash_outcome** out) {
  return run_search(spec, config, trace_path, out,
                    [&](flash::Executor& executor, flash::TraceSink sink) {
                      flash::TuningSession session(spec->spec, executor, config->budget,
                                                   std::move(sink));
                      return session.run();
                    });
}

flash_status flash_random_search(const flash_spec* spec, const flash_config* config,
                                 const char* trace_path, flash_outcome** out) {
  return run_search(spec, config, trace_path, out,
                    [&](flash::Executor& executor, flash::TraceSink sink) {
                      return flash::random_search(spec->spec, executor, config->budget,
                                                  std::move(sink));
                    });
}

void flash_outcome_free(flash_outcome* outcome) { delete outcome; }

double flash_outcome_best_metric(const flash_outcome* outcome) {
  return outcome ? outcome->outcome.best_metric : 0.0;
}

const char* flash_outcome_best_path(const flash_outcome* outcome) {
  return outcome ? outcome->best_path.c_str() : "";
}

const char* flash_outcome_best_hyperparams_json(const flash_outcome* outcome) {
  return outcome ? outcome->best_hyperparams.c_str() : "";
}

int flash_outcome_within_pruned(const flash_outcome* outcome) {
  return outcome && outcome->outcome.within_pruned ? 1 : 0;
}

size_t flash_outcome_trace_rows(const flash_outcome* outcome) {
  return outcome ? outcome->outcome.trace.size() : 0;
}

size_t flash_outcome_top_path_count(const flash_outcome* outcome) {
  return outcome ? outcome->top_paths.size() : 0;
}

const char* flash_outcome_top_path(const flash_outcome* outcome, size_t index) {
  if (!outcome || index >= outcome->top_paths.size()) return nullptr;
  return outcome->top_paths[index].c_str();
}

flash_status flash_report(const char* trace_path, const char* csv_path, char** summary) {
  if (!trace_path || !summary) return fail(FLASH_ERR_INVALID_ARGUMENT, "null argument");
  *summary = nullptr;
  return guarded([&] {
    const auto s = flash::summarize_trace(flash::read_trace(trace_path));
    if (csv_path) {
      std::ofstream csv(csv_path, std::ios::binary | std::ios::trunc);
      csv << flash::summary_csv(s);
      if (!csv.flush()) {
        throw flash::Error(flash::ErrorCode::kIo, std::string("cannot write ") + csv_path);
      }
    }
    const std::string text = flash::format_summary(s);
    auto* buffer = new char[text.size() + 1];
    std::memcpy(buffer, text.c_str(), text.size() + 1);
    *summary = buffer;
  });
}

void flash_string_free(char* text) { delete[] text; }

void flash_request_interrupt(void) { flash::request_interrupt(); }

void flash_clear_interrupt(void) { flash::clear_interrupt(); }

}  // extern "C"
