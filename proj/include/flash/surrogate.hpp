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
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "flash/pipeline_graph.hpp"

namespace flash {

inline constexpr double kNoiseVarianceFloor = 1e-6;
inline constexpr double kLogCostFloor = 1e-3;
inline constexpr double kDefaultRidgeLambda = 1.0;

// Stacked path encodings with their observed metric (lower is better) and
// charged cost in seconds. Costs may be zero when every step was a cache hit.
class ObservationSet {
 public:
  explicit ObservationSet(std::size_t num_features) : design_(0, num_features) {}

  void append(std::span<const std::uint8_t> onehot, double metric, double cost_seconds);

  std::size_t size() const { return static_cast<std::size_t>(metrics_.size()); }
  std::size_t num_features() const { return static_cast<std::size_t>(design_.cols()); }
  const Eigen::MatrixXd& design() const { return design_; }
  const Eigen::VectorXd& metrics() const { return metrics_; }
  const Eigen::VectorXd& costs() const { return costs_; }

  // Smallest observed metric; +inf when empty.
  double best_metric() const;

 private:
  Eigen::MatrixXd design_;
  Eigen::VectorXd metrics_;
  Eigen::VectorXd costs_;
};

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

// Ridge model t ~ P beta with a Gaussian predictive distribution. The
// regularized Gram matrix (P'P + lambda I) is kept as a Cholesky factor, so
// predictive variances never need an explicit inverse.
class LinearSurrogate {
 public:
  const Eigen::VectorXd& beta() const { return beta_; }
  double ridge_lambda() const { return ridge_lambda_; }
  double noise_var() const { return noise_var_; }
  std::size_t num_features() const { return static_cast<std::size_t>(beta_.size()); }

  // Dense (P'P + lambda I)^-1; for inspection and tests.
  Eigen::MatrixXd gram_inverse() const;

  // mean = beta'p, variance = noise_var * (1 + p'(P'P + lambda I)^-1 p).
  Prediction predict(std::span<const std::uint8_t> onehot) const;
  Prediction predict(const PipelinePath& path) const { return predict(path.onehot()); }
  Prediction predict(const Eigen::VectorXd& x) const;

 private:
  friend LinearSurrogate fit_ridge(const Eigen::MatrixXd&, const Eigen::VectorXd&, double);

  Eigen::VectorXd beta_;
  double ridge_lambda_ = 0.0;
  double noise_var_ = kNoiseVarianceFloor;
  Eigen::LLT<Eigen::MatrixXd> factor_;
};

// Solves (P'P + lambda I) beta = P't. noise_var is the population variance of
// the residuals, floored at kNoiseVarianceFloor.
LinearSurrogate fit_ridge(const Eigen::MatrixXd& design, const Eigen::VectorXd& targets,
                          double ridge_lambda);
LinearSurrogate fit_ridge(const ObservationSet& obs, const Eigen::VectorXd& targets,
                          double ridge_lambda);

LinearSurrogate fit_metric_model(const ObservationSet& obs, double ridge_lambda);

// Ridge fit on log(1 + cost); its predictions are the expected log-cost.
LinearSurrogate fit_cost_model(const ObservationSet& obs, double ridge_lambda);

double expected_improvement(const Prediction& pred, double best_metric, double xi);

// log EI, accurate deep into the lower tail where EI itself underflows.
// Returns -inf only when the improvement is exactly zero (sigma = 0).
double log_expected_improvement(const Prediction& pred, double best_metric, double xi);

double eips(const PipelinePath& path, const LinearSurrogate& metric_model,
            const LinearSurrogate& cost_model, double best_metric, double xi);
double log_eips(const PipelinePath& path, const LinearSurrogate& metric_model,
                const LinearSurrogate& cost_model, double best_metric, double xi);

struct ScoredPath {
  PipelinePath path;
  double log_score;
};

// Candidates ordered by decreasing EIPS; equal scores keep path order.
std::vector<ScoredPath> rank_by_eips(std::vector<PipelinePath> candidates,
                                     const LinearSurrogate& metric_model,
                                     const LinearSurrogate& cost_model, double best_metric,
                                     double xi);

// Exact argmax of EIPS over all paths when there are at most
// `candidate_budget` of them, otherwise over that many distinct random paths.
PipelinePath select_next_path(const PipelineSpec& spec, const LinearSurrogate& metric_model,
                              const LinearSurrogate& cost_model, double best_metric, double xi,
                              std::size_t candidate_budget, Rng& rng);
PipelinePath select_next_path(const PipelineSpec& spec, const LinearSurrogate& metric_model,
                              const LinearSurrogate& cost_model, double best_metric, double xi,
                              std::size_t candidate_budget, std::uint64_t seed);

}  // namespace flash
