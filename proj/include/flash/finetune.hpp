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
#include <utility>
#include <variant>
#include <vector>

#include "flash/pipeline_graph.hpp"

namespace flash {

inline constexpr double kDefaultGamma = 0.25;
inline constexpr std::size_t kDefaultProposalCandidates = 24;
// Each partition's densities are built from at most this many records, taken
// at evenly spaced ranks, so a model costs O(1) to build and score however
// long the history grows.
inline constexpr std::size_t kMaxKernelRecords = 512;

struct HistoryRecord {
  PipelinePath path;
  HyperparamAssignment hyperparams;
  double metric = 0.0;
};

using HistorySet = std::vector<HistoryRecord>;

// Add-one smoothed categorical distribution.
class CategoricalDensity {
 public:
  CategoricalDensity() = default;
  explicit CategoricalDensity(const std::vector<std::size_t>& counts);

  const std::vector<double>& probabilities() const { return probs_; }
  double log_prob(std::size_t i) const;

 private:
  std::vector<double> probs_;
};

// Density over one numeric dimension in model space: a 3:1 mixture of a
// Gaussian kernel estimate (each kernel truncated to the bounds) and the
// uniform density. With no observations it is just the uniform density.
class ParzenDensity {
 public:
  ParzenDensity(double lo, double hi, std::vector<double> centers);

  double pdf(double x) const;
  double log_pdf(double x) const;
  double sample(Rng& rng) const;

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double bandwidth() const { return bandwidth_; }
  const std::vector<double>& centers() const { return centers_; }

 private:
  double lo_;
  double hi_;
  std::vector<double> centers_;
  double bandwidth_ = 0.0;
  std::vector<double> scaled_centers_;  // centers / bandwidth
  std::vector<double> inv_mass_;        // 1 / (share of each kernel inside [lo, hi])
};

using ParamDensity = std::variant<ParzenDensity, CategoricalDensity>;

// Good/bad density pair over a pruned pipeline, rebuilt from the full history
// on every update.
class DensityModel {
 public:
  struct Partition {
    std::vector<CategoricalDensity> steps;  // per step
    // [step][local] -> one density per hyperparameter of that algorithm.
    // Shared with neighbouring models when update() leaves them untouched.
    std::vector<std::vector<std::shared_ptr<const std::vector<ParamDensity>>>> params;

    const ParamDensity& param(std::size_t step, std::size_t local, std::size_t hp) const {
      return (*params[step][local])[hp];
    }
  };

  const PipelineSpec& spec() const { return *spec_; }
  std::size_t history_size() const { return history_.size(); }
  const HistoryRecord& record(std::size_t i) const { return *history_[i]; }
  double gamma() const { return gamma_; }

  // History indices sorted by metric (stable); the first good_size() are good.
  const std::vector<std::size_t>& ranking() const { return ranking_; }
  std::size_t good_size() const { return good_size_; }

  // Records the good and bad densities are built from (history indices in
  // rank order); the whole partition unless it exceeds kMaxKernelRecords.
  std::vector<std::size_t> good_members() const;
  std::vector<std::size_t> bad_members() const;

  const Partition& good() const { return good_; }
  const Partition& bad() const { return bad_; }

  // Sum over active dimensions (path steps and on-path hyperparameters) of
  // log good-density minus log bad-density.
  double score(const PipelinePath& path, const HyperparamAssignment& hyperparams) const;

 private:
  using SharedRecords = std::vector<std::shared_ptr<const HistoryRecord>>;

  friend DensityModel build_model(const PipelineSpec&, HistorySet, double);
  friend DensityModel update(const DensityModel&, HistoryRecord);
  static DensityModel build(std::shared_ptr<const PipelineSpec> spec, SharedRecords history,
                            double gamma);

  DensityModel(std::shared_ptr<const PipelineSpec> spec, SharedRecords history, double gamma)
      : spec_(std::move(spec)), history_(std::move(history)), gamma_(gamma) {}

  // Records are immutable and shared between successive models.
  std::shared_ptr<const PipelineSpec> spec_;
  SharedRecords history_;
  double gamma_;
  std::vector<std::size_t> ranking_;
  std::size_t good_size_ = 0;
  Partition good_;
  Partition bad_;
};

// Good set: the max(1, ceil(gamma n)) best records. Throws Error(kEmptyHistory).
DensityModel build_model(const PipelineSpec& spec, HistorySet history,
                         double gamma = kDefaultGamma);

// Rebuild with `record` appended.
DensityModel update(const DensityModel& model, HistoryRecord record);

// Draws `n_candidates` configurations from the good densities (paths sampled
// step by step along valid edges) and returns the best-scoring one.
std::pair<PipelinePath, HyperparamAssignment> propose(const DensityModel& model,
                                                      std::size_t n_candidates, Rng& rng);
std::pair<PipelinePath, HyperparamAssignment> propose(const DensityModel& model,
                                                      std::size_t n_candidates,
                                                      std::uint64_t seed);

}  // namespace flash
