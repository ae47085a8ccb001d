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

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flash/error.hpp"
#include "flash/pipeline_graph.hpp"

namespace flash {

enum class TimeMode { kWall, kSimulated };
enum class HandleOrigin { kInput, kStepOutput };

// Opaque reference to a dataset living inside an executor.
struct DatasetHandle {
  std::string id;
  HandleOrigin origin = HandleOrigin::kInput;
  std::uint64_t size_bytes = 0;

  friend bool operator==(const DatasetHandle&, const DatasetHandle&) = default;
};

struct StepRequest {
  std::size_t step = 1;  // 1-based
  std::string algorithm;
  HyperparamAssignment::ParamMap hyperparams;
  DatasetHandle input;
  bool is_last = false;
  double timeout_seconds = 0.0;
};

struct StepOutput {
  DatasetHandle output;
  double seconds = 0.0;
  std::optional<double> metric;  // set iff the step was the last one
};

struct StepRecord {
  bool cached = false;
  double seconds = 0.0;
};

struct RunResult {
  double metric = 0.0;
  double cost_seconds = 0.0;  // sum over executed steps; cache hits cost nothing
  std::vector<StepRecord> per_step;

  std::size_t cache_hits() const;
  std::size_t cache_misses() const;
};

// A step exceeded its share of the per-run time limit.
class StepTimeout : public Error {
 public:
  StepTimeout(const std::string& message, double elapsed_seconds)
      : Error(ErrorCode::kStepTimeout, message), elapsed_(elapsed_seconds) {}
  double elapsed_seconds() const noexcept { return elapsed_; }

 private:
  double elapsed_;
};

// The executor ran the step but reported that it failed (e.g. a worker
// `step_err`). The configuration is bad; the executor itself is still usable.
class StepFailed : public Error {
 public:
  explicit StepFailed(const std::string& message) : Error(ErrorCode::kExecutorFailure, message) {}
};

class Executor {
 public:
  virtual ~Executor() = default;

  virtual TimeMode time_mode() const = 0;

  // Handle naming the raw input dataset.
  virtual DatasetHandle input_handle(std::string_view dataset_id) const {
    return {std::string(dataset_id), HandleOrigin::kInput, 0};
  }

  virtual StepOutput run_step(const StepRequest& request) = 0;

  // True once after the executor lost every handle it previously issued
  // (e.g. a worker restart); callers must drop cached handles.
  virtual bool consume_handle_invalidation() { return false; }
};

// Ground-truth benchmark following m = beta*'p + sum of hyperparameter bowls
// + Gaussian noise. Costs are additive per algorithm and simulated.
struct SyntheticBenchmark {
  struct Bowl {
    std::string hyperparam;
    double optimum = 0.0;  // v*, in the hyperparameter's own units
  };

  PipelineSpec spec;
  std::vector<double> true_beta;    // by one-hot position
  std::vector<double> true_cost;    // seconds, by one-hot position
  std::vector<double> bowl_weight;  // by one-hot position
  std::vector<std::vector<Bowl>> bowls;  // by one-hot position; continuous dims only
  double noise_sd = 0.0;
  std::uint64_t seed = 0;

  // weight * sum over bowl dims of (u - u*)^2, u being the value mapped onto
  // [0, 1] in model space (log10 for log-scaled dims).
  double bowl_value(std::size_t bit, const HyperparamAssignment::ParamMap* params) const;

  double noiseless_metric(const PipelinePath& path, const HyperparamAssignment& hp) const;
  double path_cost(const PipelinePath& path) const;
  double linear_part(const PipelinePath& path) const;  // beta*'p

  // argmin beta*'p (ties to the smaller path), with every bowl at its optimum.
  PipelinePath optimal_path() const;
  HyperparamAssignment optimal_hyperparams(const PipelinePath& path) const;
  double optimal_metric() const;
};

// beta* ~ U[0, 1], cost ~ logU[0.01, 2] s, bowl weight ~ U[0.1, 0.3] / dims,
// v* uniform in model space.
SyntheticBenchmark make_synthetic(const PipelineSpec& spec, std::uint64_t seed, double noise_sd);

// Deterministic, pure executor over a SyntheticBenchmark. Output tokens carry
// the accumulated metric and a digest of the prefix, so no state is kept.
class SyntheticExecutor : public Executor {
 public:
  explicit SyntheticExecutor(SyntheticBenchmark benchmark,
                             std::uint64_t output_bytes = 1u << 20);

  TimeMode time_mode() const override { return TimeMode::kSimulated; }
  StepOutput run_step(const StepRequest& request) override;

  const SyntheticBenchmark& benchmark() const { return benchmark_; }

 private:
  SyntheticBenchmark benchmark_;
  std::uint64_t output_bytes_;
};

// Client side of the newline-delimited JSON worker protocol.
std::unique_ptr<Executor> spawn_external(const std::string& command_line,
                                         const PipelineSpec& spec,
                                         double handshake_timeout_seconds = 30.0);

}  // namespace flash
