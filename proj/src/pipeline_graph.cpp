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

#include "flash/pipeline_graph.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <set>

#include "flash/error.hpp"

namespace flash {

namespace {

[[noreturn]] void invalid(const std::string& message) {
  throw Error(ErrorCode::kInvalidSpec, message);
}

bool is_integral(double v) { return std::isfinite(v) && std::floor(v) == v; }

bool values_equal(const ParamValue& a, const ParamValue& b) {
  auto na = numeric_value(a);
  auto nb = numeric_value(b);
  if (na && nb) return *na == *nb;
  return a == b;
}

void validate_hyperparam(const std::string& algorithm, const HyperparamSpec& hp) {
  const std::string where = algorithm + "." + hp.name;
  if (hp.name.empty()) invalid("empty hyperparameter name in " + algorithm);
  if (hp.is_numeric()) {
    if (!std::isfinite(hp.lo) || !std::isfinite(hp.hi) || !(hp.lo < hp.hi)) {
      invalid(where + ": bounds must satisfy lo < hi");
    }
    if (hp.scale == ParamScale::kLog && !(hp.lo > 0.0)) {
      invalid(where + ": log scale requires lo > 0");
    }
    if (hp.kind == ParamKind::kInteger && (!is_integral(hp.lo) || !is_integral(hp.hi))) {
      invalid(where + ": integer bounds must be integral");
    }
  } else if (hp.choices.empty()) {
    invalid(where + ": categorical needs at least one choice");
  }
  if (!hp.contains(hp.default_value)) invalid(where + ": default outside the domain");
}

}  // namespace

std::optional<double> numeric_value(const ParamValue& value) {
  if (const auto* i = std::get_if<std::int64_t>(&value)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&value)) return *d;
  return std::nullopt;
}

bool HyperparamSpec::contains(const ParamValue& value) const {
  if (kind == ParamKind::kCategorical) return choice_index(value).has_value();
  auto v = numeric_value(value);
  if (!v || !std::isfinite(*v) || *v < lo || *v > hi) return false;
  return kind != ParamKind::kInteger || is_integral(*v);
}

double HyperparamSpec::to_model(double value) const {
  return scale == ParamScale::kLog ? std::log10(value) : value;
}

double HyperparamSpec::from_model(double x) const {
  return scale == ParamScale::kLog ? std::pow(10.0, x) : x;
}

std::optional<std::size_t> HyperparamSpec::choice_index(const ParamValue& value) const {
  for (std::size_t i = 0; i < choices.size(); ++i) {
    if (values_equal(choices[i], value)) return i;
  }
  return std::nullopt;
}

const HyperparamSpec* AlgorithmSpec::find_hyperparam(std::string_view name) const {
  for (const auto& hp : hyperparams) {
    if (hp.name == name) return &hp;
  }
  return nullptr;
}

PipelineSpec::PipelineSpec(std::string name, std::vector<Step> steps,
                           std::optional<EdgeList> edges)
    : name_(std::move(name)), steps_(std::move(steps)) {
  validate_and_index(edges);
}

void PipelineSpec::validate_and_index(const std::optional<EdgeList>& edges) {
  if (steps_.empty()) invalid("a pipeline needs at least one step");
  const std::size_t num_steps = steps_.size();

  offsets_.assign(num_steps, 0);
  for (std::size_t k = 0; k < num_steps; ++k) {
    Step& step = steps_[k];
    if (step.index != k + 1) {
      invalid("step indices must be 1..K in order (got " + std::to_string(step.index) +
              " at position " + std::to_string(k + 1) + ")");
    }
    if (step.algorithms.empty()) {
      invalid("step " + std::to_string(k + 1) + " has no algorithms");
    }
    offsets_[k] = num_algorithms_;
    for (std::size_t i = 0; i < step.algorithms.size(); ++i) {
      AlgorithmSpec& algo = step.algorithms[i];
      if (algo.id.empty()) invalid("empty algorithm id in step " + std::to_string(k + 1));
      algo.step = k + 1;
      if (!index_.emplace(algo.id, std::make_pair(k, i)).second) {
        invalid("duplicate algorithm id '" + algo.id + "'");
      }
      std::set<std::string> names;
      for (const auto& hp : algo.hyperparams) {
        if (!names.insert(hp.name).second) {
          invalid("duplicate hyperparameter '" + hp.name + "' in " + algo.id);
        }
        validate_hyperparam(algo.id, hp);
      }
    }
    num_algorithms_ += step.algorithms.size();
  }

  adjacency_.resize(num_steps - 1);
  for (std::size_t k = 0; k + 1 < num_steps; ++k) {
    adjacency_[k].assign(step_size(k) * step_size(k + 1), edges ? 0 : 1);
  }
  if (edges) {
    for (const auto& [from, to] : *edges) {
      auto a = locate(from);
      auto b = locate(to);
      if (!a || !b) invalid("edge references unknown algorithm: " + from + " -> " + to);
      if (a->first == b->first) invalid("edge within a single step: " + from + " -> " + to);
      if (b->first != a->first + 1) invalid("edge must join adjacent steps: " + from + " -> " + to);
      adjacency_[a->first][a->second * step_size(b->first) + b->second] = 1;
    }
  }

  // Paths from each algorithm to the output, and from the input to each.
  completions_.assign(num_steps, {});
  completions_[num_steps - 1].assign(step_size(num_steps - 1), 1.0);
  for (std::size_t k = num_steps - 1; k-- > 0;) {
    completions_[k].assign(step_size(k), 0.0);
    for (std::size_t i = 0; i < step_size(k); ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < step_size(k + 1); ++j) {
        if (has_edge(k, i, j)) total += completions_[k + 1][j];
      }
      completions_[k][i] = std::min(total, DBL_MAX);
    }
  }
  std::vector<double> reach(step_size(0), 1.0);
  for (std::size_t k = 0; k < num_steps; ++k) {
    for (std::size_t i = 0; i < step_size(k); ++i) {
      if (reach[i] == 0.0 || completions_[k][i] == 0.0) {
        invalid("algorithm '" + steps_[k].algorithms[i].id +
                "' does not lie on any input-to-output path");
      }
    }
    if (k + 1 == num_steps) break;
    std::vector<double> next(step_size(k + 1), 0.0);
    for (std::size_t i = 0; i < step_size(k); ++i) {
      for (std::size_t j = 0; j < step_size(k + 1); ++j) {
        if (has_edge(k, i, j)) next[j] = std::min(next[j] + reach[i], DBL_MAX);
      }
    }
    reach = std::move(next);
  }

  double total = 0.0;
  for (double c : completions_[0]) total += c;
  path_count_ = std::min(total, DBL_MAX);
}

std::optional<std::pair<std::size_t, std::size_t>> PipelineSpec::locate(
    std::string_view id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EdgeList PipelineSpec::edges() const {
  EdgeList out;
  for (std::size_t k = 0; k + 1 < num_steps(); ++k) {
    for (std::size_t i = 0; i < step_size(k); ++i) {
      for (std::size_t j = 0; j < step_size(k + 1); ++j) {
        if (has_edge(k, i, j)) out.emplace_back(algorithm(k, i).id, algorithm(k + 1, j).id);
      }
    }
  }
  return out;
}

bool PipelineSpec::fully_connected() const {
  return std::all_of(adjacency_.begin(), adjacency_.end(), [](const auto& m) {
    return std::all_of(m.begin(), m.end(), [](std::uint8_t v) { return v != 0; });
  });
}

bool operator==(const PipelineSpec& a, const PipelineSpec& b) {
  return a.name_ == b.name_ && a.steps_ == b.steps_ && a.adjacency_ == b.adjacency_;
}

PipelinePath::PipelinePath(const PipelineSpec& spec, std::vector<std::size_t> choices)
    : choices_(std::move(choices)) {
  if (choices_.size() != spec.num_steps()) {
    throw Error(ErrorCode::kUnknownAlgorithm,
                "path has " + std::to_string(choices_.size()) + " selections for " +
                    std::to_string(spec.num_steps()) + " steps");
  }
  onehot_.assign(spec.num_algorithms(), 0);
  bits_.resize(choices_.size());
  for (std::size_t k = 0; k < choices_.size(); ++k) {
    if (choices_[k] >= spec.step_size(k)) {
      throw Error(ErrorCode::kUnknownAlgorithm,
                  "selection out of range in step " + std::to_string(k + 1));
    }
    if (k > 0 && !spec.has_edge(k - 1, choices_[k - 1], choices_[k])) {
      throw Error(ErrorCode::kEdgeViolation,
                  "no edge " + spec.algorithm(k - 1, choices_[k - 1]).id + " -> " +
                      spec.algorithm(k, choices_[k]).id);
    }
    bits_[k] = spec.block_offset(k) + choices_[k];
    onehot_[bits_[k]] = 1;
  }
}

void HyperparamAssignment::set(const std::string& algorithm, const std::string& name,
                               ParamValue value) {
  values_[algorithm][name] = std::move(value);
}

void HyperparamAssignment::add_algorithm(const std::string& algorithm) {
  values_.try_emplace(algorithm);
}

const HyperparamAssignment::ParamMap* HyperparamAssignment::params_for(
    std::string_view algorithm) const {
  auto it = values_.find(algorithm);
  return it == values_.end() ? nullptr : &it->second;
}

bool HyperparamAssignment::empty() const { return size() == 0; }

std::size_t HyperparamAssignment::size() const {
  std::size_t n = 0;
  for (const auto& [_, params] : values_) n += params.size();
  return n;
}

std::vector<PipelinePath> enumerate_paths(const PipelineSpec& spec, std::size_t limit) {
  if (spec.path_count() > static_cast<double>(limit)) {
    throw PathCountExceedsLimit(spec.path_count(), limit);
  }
  std::vector<PipelinePath> out;
  out.reserve(static_cast<std::size_t>(spec.path_count()));
  const std::size_t num_steps = spec.num_steps();
  std::vector<std::size_t> choice(num_steps, 0);

  // Depth-first walk in lexicographic order; `depth` is the step being chosen.
  std::size_t depth = 0;
  while (true) {
    bool advanced = false;
    while (choice[depth] < spec.step_size(depth)) {
      if (depth == 0 || spec.has_edge(depth - 1, choice[depth - 1], choice[depth])) {
        advanced = true;
        break;
      }
      ++choice[depth];
    }
    if (advanced) {
      if (depth + 1 == num_steps) {
        out.emplace_back(spec, choice);
        ++choice[depth];
      } else {
        ++depth;
        choice[depth] = 0;
      }
      continue;
    }
    if (depth == 0) break;
    --depth;
    ++choice[depth];
  }
  return out;
}

PipelinePath encode_path(const PipelineSpec& spec, std::span<const std::string> ids) {
  if (ids.size() != spec.num_steps()) {
    throw Error(ErrorCode::kUnknownAlgorithm, "expected one algorithm id per step");
  }
  std::vector<std::size_t> choices(ids.size());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    auto loc = spec.locate(ids[k]);
    if (!loc) throw Error(ErrorCode::kUnknownAlgorithm, "unknown algorithm '" + ids[k] + "'");
    if (loc->first != k) {
      throw Error(ErrorCode::kUnknownAlgorithm,
                  "algorithm '" + ids[k] + "' does not belong to step " + std::to_string(k + 1));
    }
    choices[k] = loc->second;
  }
  return PipelinePath(spec, std::move(choices));
}

std::vector<std::string> decode_path(const PipelineSpec& spec, const PipelinePath& path) {
  std::vector<std::string> ids;
  ids.reserve(path.num_steps());
  for (std::size_t k = 0; k < path.num_steps(); ++k) {
    ids.push_back(spec.algorithm(k, path.choices()[k]).id);
  }
  return ids;
}

std::string path_label(const PipelineSpec& spec, const PipelinePath& path) {
  std::string out;
  for (std::size_t k = 0; k < path.num_steps(); ++k) {
    if (k > 0) out += '-';
    out += spec.algorithm(k, path.choices()[k]).id;
  }
  return out;
}

std::optional<PipelinePath> path_from_onehot(const PipelineSpec& spec,
                                             std::span<const std::uint8_t> bits) {
  if (bits.size() != spec.num_algorithms()) return std::nullopt;
  std::vector<std::size_t> choices(spec.num_steps());
  for (std::size_t k = 0; k < spec.num_steps(); ++k) {
    std::size_t ones = 0;
    for (std::size_t i = 0; i < spec.step_size(k); ++i) {
      const auto b = bits[spec.block_offset(k) + i];
      if (b > 1) return std::nullopt;
      if (b == 1) {
        ++ones;
        choices[k] = i;
      }
    }
    if (ones != 1) return std::nullopt;
  }
  for (std::size_t k = 1; k < choices.size(); ++k) {
    if (!spec.has_edge(k - 1, choices[k - 1], choices[k])) return std::nullopt;
  }
  return PipelinePath(spec, std::move(choices));
}

std::optional<PipelinePath> translate_path(const PipelineSpec& from, const PipelinePath& path,
                                           const PipelineSpec& to) {
  if (from.num_steps() != to.num_steps()) return std::nullopt;
  std::vector<std::size_t> choices(path.num_steps());
  for (std::size_t k = 0; k < path.num_steps(); ++k) {
    auto loc = to.locate(from.algorithm(k, path.choices()[k]).id);
    if (!loc || loc->first != k) return std::nullopt;
    choices[k] = loc->second;
  }
  for (std::size_t k = 1; k < choices.size(); ++k) {
    if (!to.has_edge(k - 1, choices[k - 1], choices[k])) return std::nullopt;
  }
  return PipelinePath(to, std::move(choices));
}

namespace {

std::size_t pick_weighted(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  std::uniform_real_distribution<double> unit(0.0, total);
  const double target = unit(rng);
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = i;
    acc += weights[i];
    if (target < acc) return i;
  }
  return last_positive;
}

}  // namespace

PipelinePath sample_random_path(const PipelineSpec& spec, Rng& rng) {
  // Weighting each choice by its number of completions makes every full path
  // equally likely; with full connectivity this is a uniform pick per step.
  std::vector<std::size_t> choices(spec.num_steps());
  std::vector<double> weights;
  for (std::size_t k = 0; k < spec.num_steps(); ++k) {
    weights.assign(spec.step_size(k), 0.0);
    for (std::size_t i = 0; i < spec.step_size(k); ++i) {
      if (k == 0 || spec.has_edge(k - 1, choices[k - 1], i)) weights[i] = spec.completions(k, i);
    }
    choices[k] = pick_weighted(weights, rng);
  }
  return PipelinePath(spec, std::move(choices));
}

PipelinePath sample_random_path(const PipelineSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  return sample_random_path(spec, rng);
}

std::vector<PipelinePath> sample_distinct_paths(const PipelineSpec& spec, std::size_t count,
                                                Rng& rng) {
  if (spec.path_count() <= static_cast<double>(count)) return enumerate_paths(spec, count);
  std::set<PipelinePath> picked;
  const std::size_t max_attempts = 50 * count + 1000;
  for (std::size_t attempt = 0; attempt < max_attempts && picked.size() < count; ++attempt) {
    picked.insert(sample_random_path(spec, rng));
  }
  return {picked.begin(), picked.end()};
}

ParamValue sample_hyperparam(const HyperparamSpec& hp, Rng& rng) {
  switch (hp.kind) {
    case ParamKind::kCategorical: {
      std::uniform_int_distribution<std::size_t> pick(0, hp.choices.size() - 1);
      return hp.choices[pick(rng)];
    }
    case ParamKind::kInteger: {
      if (hp.scale == ParamScale::kLinear) {
        std::uniform_int_distribution<std::int64_t> pick(static_cast<std::int64_t>(hp.lo),
                                                         static_cast<std::int64_t>(hp.hi));
        return pick(rng);
      }
      std::uniform_real_distribution<double> unit(hp.model_lo(), hp.model_hi());
      const double v = std::clamp(std::round(hp.from_model(unit(rng))), hp.lo, hp.hi);
      return static_cast<std::int64_t>(v);
    }
    case ParamKind::kContinuous: {
      std::uniform_real_distribution<double> unit(hp.model_lo(), hp.model_hi());
      return std::clamp(hp.from_model(unit(rng)), hp.lo, hp.hi);
    }
  }
  return hp.default_value;
}

HyperparamAssignment sample_random_hyperparams(const PipelineSpec& spec, const PipelinePath& path,
                                               Rng& rng) {
  HyperparamAssignment out;
  for (std::size_t k = 0; k < path.num_steps(); ++k) {
    const AlgorithmSpec& algo = spec.algorithm(k, path.choices()[k]);
    out.add_algorithm(algo.id);
    for (const auto& hp : algo.hyperparams) out.set(algo.id, hp.name, sample_hyperparam(hp, rng));
  }
  return out;
}

HyperparamAssignment sample_random_hyperparams(const PipelineSpec& spec, const PipelinePath& path,
                                               std::uint64_t seed) {
  Rng rng(seed);
  return sample_random_hyperparams(spec, path, rng);
}

bool validate_assignment(const PipelineSpec& spec, const PipelinePath& path,
                         const HyperparamAssignment& assignment) {
  std::size_t matched = 0;
  for (std::size_t k = 0; k < path.num_steps(); ++k) {
    const AlgorithmSpec& algo = spec.algorithm(k, path.choices()[k]);
    const auto* params = assignment.params_for(algo.id);
    if (params == nullptr) {
      if (!algo.hyperparams.empty()) return false;
      continue;
    }
    ++matched;
    if (params->size() != algo.hyperparams.size()) return false;
    for (const auto& hp : algo.hyperparams) {
      auto it = params->find(hp.name);
      if (it == params->end() || !hp.contains(it->second)) return false;
    }
  }
  return matched == assignment.values().size();
}

PipelineSpec prune_to_subgraph(const PipelineSpec& spec, std::span<const PipelinePath> paths) {
  if (paths.empty()) throw Error(ErrorCode::kEmptyPathSet, "no paths to build a subgraph from");
  std::vector<std::vector<bool>> used(spec.num_steps());
  for (std::size_t k = 0; k < spec.num_steps(); ++k) used[k].assign(spec.step_size(k), false);
  std::set<std::pair<std::size_t, std::size_t>> edge_bits;
  for (const auto& path : paths) {
    for (std::size_t k = 0; k < path.num_steps(); ++k) {
      used[k][path.choices()[k]] = true;
      if (k > 0) edge_bits.emplace(path.bit(k - 1), path.bit(k));
    }
  }
  std::vector<Step> steps;
  for (std::size_t k = 0; k < spec.num_steps(); ++k) {
    Step step;
    step.index = k + 1;
    for (std::size_t i = 0; i < spec.step_size(k); ++i) {
      if (used[k][i]) step.algorithms.push_back(spec.algorithm(k, i));
    }
    steps.push_back(std::move(step));
  }
  // Global bit -> algorithm id in the source spec.
  std::vector<const std::string*> id_of(spec.num_algorithms());
  for (std::size_t k = 0; k < spec.num_steps(); ++k) {
    for (std::size_t i = 0; i < spec.step_size(k); ++i) {
      id_of[spec.block_offset(k) + i] = &spec.algorithm(k, i).id;
    }
  }
  EdgeList edges;
  for (const auto& [from, to] : edge_bits) edges.emplace_back(*id_of[from], *id_of[to]);
  return PipelineSpec(spec.name(), std::move(steps), std::move(edges));
}

}  // namespace flash
