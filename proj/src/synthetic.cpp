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

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>

#include "flash/digest.hpp"
#include "flash/executor.hpp"

namespace flash {

namespace {

double unit_coordinate(const HyperparamSpec& hp, double value) {
  return (hp.to_model(value) - hp.model_lo()) / (hp.model_hi() - hp.model_lo());
}

std::string step_fingerprint(const std::string& algorithm,
                             const HyperparamAssignment::ParamMap& params) {
  std::string out = algorithm;
  for (const auto& [name, value] : params) {
    out += '|';
    out += name;
    out += '=';
    if (auto v = numeric_value(value)) {
      out += canonical_double(*v);
    } else if (const auto* b = std::get_if<bool>(&value)) {
      out += *b ? "true" : "false";
    } else {
      out += std::get<std::string>(value);
    }
  }
  return out;
}

struct TokenState {
  double partial = 0.0;
  std::string prefix_hex;
};

std::string encode_token(double partial, const Digest128& prefix) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(partial)));
  return "syn:" + std::string(buf) + ":" + prefix.hex();
}

TokenState decode_token(const DatasetHandle& handle) {
  if (handle.origin == HandleOrigin::kStepOutput && handle.id.size() == 4 + 16 + 1 + 32 &&
      handle.id.starts_with("syn:")) {
    const std::uint64_t bits = std::stoull(handle.id.substr(4, 16), nullptr, 16);
    return {std::bit_cast<double>(bits), handle.id.substr(21)};
  }
  return {0.0, digest_bytes("input|" + handle.id).hex()};
}

}  // namespace

double SyntheticBenchmark::bowl_value(std::size_t bit,
                                      const HyperparamAssignment::ParamMap* params) const {
  if (bowls[bit].empty()) return 0.0;
  // Locate the algorithm spec for this bit.
  std::size_t step = 0;
  while (step + 1 < spec.num_steps() && spec.block_offset(step + 1) <= bit) ++step;
  const AlgorithmSpec& algo = spec.algorithm(step, bit - spec.block_offset(step));
  double total = 0.0;
  for (const auto& bowl : bowls[bit]) {
    const HyperparamSpec* hp = algo.find_hyperparam(bowl.hyperparam);
    std::optional<double> v;
    if (params != nullptr) {
      if (auto it = params->find(bowl.hyperparam); it != params->end()) v = numeric_value(it->second);
    }
    if (!v) throw StepFailed("missing hyperparameter " + algo.id + "." + bowl.hyperparam);
    const double d = unit_coordinate(*hp, *v) - unit_coordinate(*hp, bowl.optimum);
    total += d * d;
  }
  return bowl_weight[bit] * total;
}

double SyntheticBenchmark::linear_part(const PipelinePath& path) const {
  double total = 0.0;
  for (std::size_t k = 0; k < path.num_steps(); ++k) total += true_beta[path.bit(k)];
  return total;
}

double SyntheticBenchmark::noiseless_metric(const PipelinePath& path,
                                            const HyperparamAssignment& hp) const {
  double total = 0.0;
  for (std::size_t k = 0; k < path.num_steps(); ++k) {
    const std::size_t bit = path.bit(k);
    const auto& id = spec.algorithm(k, path.choices()[k]).id;
    total += true_beta[bit] + bowl_value(bit, hp.params_for(id));
  }
  return total;
}

double SyntheticBenchmark::path_cost(const PipelinePath& path) const {
  double total = 0.0;
  for (std::size_t k = 0; k < path.num_steps(); ++k) total += true_cost[path.bit(k)];
  return total;
}

PipelinePath SyntheticBenchmark::optimal_path() const {
  const std::size_t num_steps = spec.num_steps();
  std::vector<std::vector<double>> to_go(num_steps);
  for (std::size_t k = num_steps; k-- > 0;) {
    to_go[k].assign(spec.step_size(k), 0.0);
    for (std::size_t i = 0; i < spec.step_size(k); ++i) {
      double rest = 0.0;
      if (k + 1 < num_steps) {
        rest = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < spec.step_size(k + 1); ++j) {
          if (spec.has_edge(k, i, j)) rest = std::min(rest, to_go[k + 1][j]);
        }
      }
      to_go[k][i] = true_beta[spec.block_offset(k) + i] + rest;
    }
  }
  std::vector<std::size_t> choices(num_steps);
  for (std::size_t k = 0; k < num_steps; ++k) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < spec.step_size(k); ++i) {
      if (k > 0 && !spec.has_edge(k - 1, choices[k - 1], i)) continue;
      if (to_go[k][i] < best) {
        best = to_go[k][i];
        choices[k] = i;
      }
    }
  }
  return PipelinePath(spec, std::move(choices));
}

HyperparamAssignment SyntheticBenchmark::optimal_hyperparams(const PipelinePath& path) const {
  HyperparamAssignment out;
  for (std::size_t k = 0; k < path.num_steps(); ++k) {
    const AlgorithmSpec& algo = spec.algorithm(k, path.choices()[k]);
    out.add_algorithm(algo.id);
    for (const auto& hp : algo.hyperparams) out.set(algo.id, hp.name, hp.default_value);
    for (const auto& bowl : bowls[path.bit(k)]) out.set(algo.id, bowl.hyperparam, bowl.optimum);
  }
  return out;
}

double SyntheticBenchmark::optimal_metric() const { return linear_part(optimal_path()); }

SyntheticBenchmark make_synthetic(const PipelineSpec& spec, std::uint64_t seed, double noise_sd) {
  SyntheticBenchmark bench{spec, {}, {}, {}, {}, noise_sd, seed};
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> log_cost(std::log10(0.01), std::log10(2.0));
  std::uniform_real_distribution<double> weight(0.1, 0.3);
  const std::size_t n = spec.num_algorithms();
  bench.true_beta.resize(n);
  bench.true_cost.resize(n);
  bench.bowl_weight.resize(n);
  bench.bowls.resize(n);
  for (std::size_t k = 0; k < spec.num_steps(); ++k) {
    for (std::size_t i = 0; i < spec.step_size(k); ++i) {
      const std::size_t bit = spec.block_offset(k) + i;
      bench.true_beta[bit] = unit(rng);
      bench.true_cost[bit] = std::pow(10.0, log_cost(rng));
      std::size_t dims = 0;
      for (const auto& hp : spec.algorithm(k, i).hyperparams) {
        if (hp.kind != ParamKind::kContinuous) continue;
        const double u = unit(rng);
        const double v = hp.from_model(hp.model_lo() + u * (hp.model_hi() - hp.model_lo()));
        bench.bowls[bit].push_back({hp.name, std::clamp(v, hp.lo, hp.hi)});
        ++dims;
      }
      bench.bowl_weight[bit] = weight(rng) / static_cast<double>(std::max<std::size_t>(1, dims));
    }
  }
  return bench;
}

SyntheticExecutor::SyntheticExecutor(SyntheticBenchmark benchmark, std::uint64_t output_bytes)
    : benchmark_(std::move(benchmark)), output_bytes_(output_bytes) {}

StepOutput SyntheticExecutor::run_step(const StepRequest& request) {
  const PipelineSpec& spec = benchmark_.spec;
  auto loc = spec.locate(request.algorithm);
  if (!loc || loc->first + 1 != request.step) {
    throw StepFailed("algorithm '" + request.algorithm + "' is not part of step " +
                     std::to_string(request.step));
  }
  if (request.is_last != (request.step == spec.num_steps())) {
    throw StepFailed("is_last flag does not match the step index");
  }
  const std::size_t bit = spec.block_offset(loc->first) + loc->second;
  const double seconds = benchmark_.true_cost[bit];
  if (seconds > request.timeout_seconds) {
    throw StepTimeout("synthetic step " + request.algorithm + " exceeded its time limit",
                      request.timeout_seconds);
  }

  const TokenState in = decode_token(request.input);
  const double partial =
      in.partial + benchmark_.true_beta[bit] + benchmark_.bowl_value(bit, &request.hyperparams);
  const Digest128 prefix =
      digest_bytes(in.prefix_hex + "/" + step_fingerprint(request.algorithm, request.hyperparams));

  StepOutput out;
  out.output = {encode_token(partial, prefix), HandleOrigin::kStepOutput, output_bytes_};
  out.seconds = seconds;
  if (request.is_last) {
    double noise = 0.0;
    if (benchmark_.noise_sd > 0.0) {
      Rng rng(benchmark_.seed ^ prefix.lo ^ std::rotl(prefix.hi, 17));
      std::normal_distribution<double> normal(0.0, benchmark_.noise_sd);
      noise = normal(rng);
    }
    out.metric = partial + noise;
  }
  return out;
}

}  // namespace flash
