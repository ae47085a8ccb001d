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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace flash {

using Rng = std::mt19937_64;

inline constexpr std::size_t kDefaultPathLimit = 100'000;

enum class ParamKind { kContinuous, kInteger, kCategorical };
enum class ParamScale { kLinear, kLog };

// Hyperparameter values as they appear in spec files and on the wire.
using ParamValue = std::variant<bool, std::int64_t, double, std::string>;

// Numeric view of a value; nullopt for strings and booleans.
std::optional<double> numeric_value(const ParamValue& value);

struct HyperparamSpec {
  std::string name;
  ParamKind kind = ParamKind::kContinuous;
  double lo = 0.0;
  double hi = 1.0;
  std::vector<ParamValue> choices;
  ParamScale scale = ParamScale::kLinear;
  ParamValue default_value = 0.0;

  bool is_numeric() const { return kind != ParamKind::kCategorical; }
  bool contains(const ParamValue& value) const;

  // Model space is log10 for log-scaled dimensions, identity otherwise.
  double to_model(double value) const;
  double from_model(double x) const;
  double model_lo() const { return to_model(lo); }
  double model_hi() const { return to_model(hi); }

  // Index of `value` in `choices`, if present.
  std::optional<std::size_t> choice_index(const ParamValue& value) const;

  friend bool operator==(const HyperparamSpec&, const HyperparamSpec&) = default;
};

struct AlgorithmSpec {
  std::string id;
  std::size_t step = 1;  // 1-based
  std::vector<HyperparamSpec> hyperparams;

  const HyperparamSpec* find_hyperparam(std::string_view name) const;

  friend bool operator==(const AlgorithmSpec&, const AlgorithmSpec&) = default;
};

struct Step {
  std::size_t index = 1;  // 1-based
  std::vector<AlgorithmSpec> algorithms;

  friend bool operator==(const Step&, const Step&) = default;
};

using EdgeList = std::vector<std::pair<std::string, std::string>>;

class PipelinePath;

// The pipeline DAG. Steps are kept in order; algorithms are addressed either by
// (step, local index) or by their global position in the one-hot layout.
// Immutable once constructed; construction validates every structural
// invariant and throws Error(kInvalidSpec) on violation.
class PipelineSpec {
 public:
  // `edges` omitted means adjacent steps are fully connected.
  PipelineSpec(std::string name, std::vector<Step> steps,
               std::optional<EdgeList> edges = std::nullopt);

  const std::string& name() const { return name_; }
  const std::vector<Step>& steps() const { return steps_; }
  std::size_t num_steps() const { return steps_.size(); }
  std::size_t num_algorithms() const { return num_algorithms_; }
  std::size_t step_size(std::size_t step) const { return steps_[step].algorithms.size(); }

  // First bit of step `step` (0-based) in the one-hot layout.
  std::size_t block_offset(std::size_t step) const { return offsets_[step]; }

  const AlgorithmSpec& algorithm(std::size_t step, std::size_t local) const {
    return steps_[step].algorithms[local];
  }

  // (step, local index) of an algorithm id.
  std::optional<std::pair<std::size_t, std::size_t>> locate(std::string_view id) const;

  // Whether local algorithm `from` of `step` connects to `to` of `step + 1`.
  bool has_edge(std::size_t step, std::size_t from, std::size_t to) const {
    return adjacency_[step][from * steps_[step + 1].algorithms.size() + to] != 0;
  }

  // All edges as id pairs, ordered by (step, from, to).
  EdgeList edges() const;
  bool fully_connected() const;

  // Number of input-to-output paths; saturates at DBL_MAX.
  double path_count() const { return path_count_; }

  // Paths that complete the pipeline starting from algorithm `local` of `step`.
  double completions(std::size_t step, std::size_t local) const {
    return completions_[step][local];
  }

  friend bool operator==(const PipelineSpec& a, const PipelineSpec& b);

 private:
  void validate_and_index(const std::optional<EdgeList>& edges);

  std::string name_;
  std::vector<Step> steps_;
  std::vector<std::size_t> offsets_;
  std::size_t num_algorithms_ = 0;
  std::map<std::string, std::pair<std::size_t, std::size_t>, std::less<>> index_;
  // adjacency_[k] is a |step k| x |step k+1| row-major 0/1 matrix.
  std::vector<std::vector<std::uint8_t>> adjacency_;
  std::vector<std::vector<double>> completions_;
  double path_count_ = 0.0;
};

// One algorithm per step, connected by edges. Ordering is lexicographic over
// the per-step local indices, which is also the enumeration order.
class PipelinePath {
 public:
  // Throws Error(kEdgeViolation) if consecutive choices are not connected and
  // Error(kUnknownAlgorithm) if a choice is out of range.
  PipelinePath(const PipelineSpec& spec, std::vector<std::size_t> choices);

  const std::vector<std::size_t>& choices() const { return choices_; }
  const std::vector<std::uint8_t>& onehot() const { return onehot_; }
  std::size_t num_steps() const { return choices_.size(); }

  // Global one-hot position of the selected algorithm at `step`.
  std::size_t bit(std::size_t step) const { return bits_[step]; }

  friend bool operator==(const PipelinePath& a, const PipelinePath& b) {
    return a.choices_ == b.choices_ && a.onehot_.size() == b.onehot_.size();
  }
  friend std::strong_ordering operator<=>(const PipelinePath& a, const PipelinePath& b) {
    return a.choices_ <=> b.choices_;
  }

 private:
  std::vector<std::size_t> choices_;
  std::vector<std::size_t> bits_;
  std::vector<std::uint8_t> onehot_;
};

// (algorithm id -> (hyperparameter name -> value)) for the algorithms of one
// path. Ordered maps give the canonical key order used for hashing and traces.
class HyperparamAssignment {
 public:
  using ParamMap = std::map<std::string, ParamValue>;

  void set(const std::string& algorithm, const std::string& name, ParamValue value);
  // Ensures `algorithm` has an entry even when it has no hyperparameters.
  void add_algorithm(const std::string& algorithm);

  const ParamMap* params_for(std::string_view algorithm) const;
  const std::map<std::string, ParamMap, std::less<>>& values() const { return values_; }
  bool empty() const;
  std::size_t size() const;  // total number of (algorithm, name) entries

  friend bool operator==(const HyperparamAssignment&, const HyperparamAssignment&) = default;

 private:
  std::map<std::string, ParamMap, std::less<>> values_;
};

std::vector<PipelinePath> enumerate_paths(const PipelineSpec& spec,
                                          std::size_t limit = kDefaultPathLimit);

PipelinePath encode_path(const PipelineSpec& spec, std::span<const std::string> ids);
std::vector<std::string> decode_path(const PipelineSpec& spec, const PipelinePath& path);

// Dash-joined algorithm ids, as written in trace files.
std::string path_label(const PipelineSpec& spec, const PipelinePath& path);

// Inverse of PipelinePath::onehot(); nullopt if `bits` is not a valid path.
std::optional<PipelinePath> path_from_onehot(const PipelineSpec& spec,
                                             std::span<const std::uint8_t> bits);

// Re-encodes `path` of `from` inside `to` by algorithm id; nullopt when some
// algorithm or edge is absent from `to`.
std::optional<PipelinePath> translate_path(const PipelineSpec& from, const PipelinePath& path,
                                           const PipelineSpec& to);

// Uniform over all valid paths (per-step uniform when fully connected).
PipelinePath sample_random_path(const PipelineSpec& spec, Rng& rng);
PipelinePath sample_random_path(const PipelineSpec& spec, std::uint64_t seed);

// `count` distinct random paths sorted in path order; returns every path when
// the graph has no more than `count` of them.
std::vector<PipelinePath> sample_distinct_paths(const PipelineSpec& spec, std::size_t count,
                                                Rng& rng);

ParamValue sample_hyperparam(const HyperparamSpec& hp, Rng& rng);
HyperparamAssignment sample_random_hyperparams(const PipelineSpec& spec, const PipelinePath& path,
                                               Rng& rng);
HyperparamAssignment sample_random_hyperparams(const PipelineSpec& spec, const PipelinePath& path,
                                               std::uint64_t seed);

// Every value in-domain, every on-path hyperparameter present, nothing off-path.
bool validate_assignment(const PipelineSpec& spec, const PipelinePath& path,
                         const HyperparamAssignment& assignment);

// Union of the algorithms and edges used by `paths`. Throws Error(kEmptyPathSet).
PipelineSpec prune_to_subgraph(const PipelineSpec& spec, std::span<const PipelinePath> paths);

}  // namespace flash
