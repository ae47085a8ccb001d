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

#ifndef FLASH_FLASH_H
#define FLASH_FLASH_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define FLASH_API __declspec(dllexport)
#else
#define FLASH_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum flash_status {
  FLASH_OK = 0,
  FLASH_ERR_INVALID_ARGUMENT = 1,
  FLASH_ERR_INVALID_SPEC = 2,
  FLASH_ERR_CONFIG_PARSE = 3,
  FLASH_ERR_TRACE_PARSE = 4,
  FLASH_ERR_IO = 5,
  FLASH_ERR_EXECUTOR = 6,
  FLASH_ERR_HANDSHAKE = 7,
  FLASH_ERR_PROTOCOL = 8,
  FLASH_ERR_WORKER_EXITED = 9,
  FLASH_ERR_BUDGET_TOO_SMALL = 10,
  FLASH_ERR_INTERRUPTED = 11,
  FLASH_ERR_INTERNAL = 12
} flash_status;

typedef struct flash_spec flash_spec;
typedef struct flash_config flash_config;
typedef struct flash_outcome flash_outcome;

/* Message of the last failure on the calling thread; never NULL. */
FLASH_API const char* flash_last_error(void);
FLASH_API const char* flash_status_name(flash_status status);

FLASH_API flash_status flash_spec_load_file(const char* path, flash_spec** out);
FLASH_API flash_status flash_spec_load_json(const char* json_text, flash_spec** out);
FLASH_API void flash_spec_free(flash_spec* spec);
FLASH_API size_t flash_spec_num_steps(const flash_spec* spec);
FLASH_API size_t flash_spec_num_algorithms(const flash_spec* spec);
FLASH_API double flash_spec_path_count(const flash_spec* spec);

FLASH_API flash_status flash_config_create(flash_config** out);
FLASH_API void flash_config_free(flash_config* config);

/*
 * Keys: t_init, t_prune ("30" runs or "30s" seconds), t_total, per_run_timeout,
 * top_r, xi, ridge_lambda, cache_bytes, candidate_budget, seed, dataset_id,
 * synthetic_noise_sd, synthetic_seed.
 */
FLASH_API flash_status flash_config_set(flash_config* config, const char* key, const char* value);

/* "synthetic" or "subprocess:<command line>". */
FLASH_API flash_status flash_config_set_executor(flash_config* config, const char* executor);

/*
 * Runs all three phases. The trace is appended to `trace_path` row by row
 * (NULL for none). On FLASH_ERR_INTERRUPTED the rows written so far remain.
 */
FLASH_API flash_status flash_run(const flash_spec* spec, const flash_config* config,
                                 const char* trace_path, flash_outcome** out);

/* Same clock, cache and penalty rules; picks fresh configurations uniformly. */
FLASH_API flash_status flash_random_search(const flash_spec* spec, const flash_config* config,
                                           const char* trace_path, flash_outcome** out);

FLASH_API void flash_outcome_free(flash_outcome* outcome);
FLASH_API double flash_outcome_best_metric(const flash_outcome* outcome);
/* Dash-joined algorithm ids. Valid until the outcome is freed. */
FLASH_API const char* flash_outcome_best_path(const flash_outcome* outcome);
FLASH_API const char* flash_outcome_best_hyperparams_json(const flash_outcome* outcome);
FLASH_API int flash_outcome_within_pruned(const flash_outcome* outcome);
FLASH_API size_t flash_outcome_trace_rows(const flash_outcome* outcome);
FLASH_API size_t flash_outcome_top_path_count(const flash_outcome* outcome);
FLASH_API const char* flash_outcome_top_path(const flash_outcome* outcome, size_t index);

/*
 * Reads a trace file and returns a text summary in *summary (release with
 * flash_string_free). Writes the best-so-far series to `csv_path` unless NULL.
 */
FLASH_API flash_status flash_report(const char* trace_path, const char* csv_path, char** summary);
FLASH_API void flash_string_free(char* text);

/* Async-signal-safe. The running loop stops after its current evaluation. */
FLASH_API void flash_request_interrupt(void);
FLASH_API void flash_clear_interrupt(void);

#ifdef __cplusplus
}
#endif

#endif
