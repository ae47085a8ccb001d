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

#include "flash/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "flash/error.hpp"

namespace flash {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double normal_cdf(double u) { return 0.5 * std::erfc(-u * kInvSqrt2); }
double normal_pdf(double u) { return std::exp(-0.5 * u * u - kLogSqrt2Pi); }

// log(u * Phi(u) + phi(u)). Below u = -10 the direct form loses everything to
// cancellation, so the asymptotic expansion
//   u Phi(u) + phi(u) = phi(u) * sum_k (-1)^(k+1) (2k-1)!! / x^(2k),  x = -u
// is summed until its terms stop shrinking.
double log_ei_kernel(double u) {
  if (u > -10.0) return std::log(u * normal_cdf(u) + normal_pdf(u));
  const double x = -u;
  const double inv_x2 = 1.0 / (x * x);
  double term = inv_x2;
  double sum = term;
  for (int k = 1; k < 200; ++k) {
    const double next = -term * (2.0 * k + 1.0) * inv_x2;
    if (std::abs(next) >= std::abs(term) || std::abs(next) < 1e-17 * std::abs(sum)) break;
    term = next;
    sum += term;
  }
  return -0.5 * u * u - kLogSqrt2Pi + std::log(sum);
}

Eigen::VectorXd to_vector(std::span<const std::uint8_t> onehot) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(onehot.size()));
  for (std::size_t i = 0; i < onehot.size(); ++i) x[static_cast<Eigen::Index>(i)] = onehot[i];
  return x;
}

}  // namespace

void ObservationSet::append(std::span<const std::uint8_t> onehot, double metric,
                            double cost_seconds) {
  if (onehot.size() != num_features()) {
    throw Error(ErrorCode::kDimensionMismatch, "observation has " +
                                                   std::to_string(onehot.size()) +
                                                   " features, expected " +
                                                   std::to_string(num_features()));
  }
  if (!(cost_seconds >= 0.0) || !std::isfinite(metric)) {
    throw Error(ErrorCode::kInvalidArgument, "observation needs a finite metric and cost >= 0");
  }
  const Eigen::Index n = design_.rows();
  design_.conservativeResize(n + 1, Eigen::NoChange);
  for (std::size_t j = 0; j < onehot.size(); ++j) {
    if (onehot[j] > 1) throw Error(ErrorCode::kInvalidArgument, "design rows must be 0/1");
    design_(n, static_cast<Eigen::Index>(j)) = onehot[j];
  }
  metrics_.conservativeResize(n + 1);
  metrics_[n] = metric;
  costs_.conservativeResize(n + 1);
  costs_[n] = cost_seconds;
}

double ObservationSet::best_metric() const {
  return metrics_.size() == 0 ? std::numeric_limits<double>::infinity() : metrics_.minCoeff();
}

Eigen::MatrixXd LinearSurrogate::gram_inverse() const {
  const auto n = beta_.size();
  return factor_.solve(Eigen::MatrixXd::Identity(n, n));
}

Prediction LinearSurrogate::predict(const Eigen::VectorXd& x) const {
  if (x.size() != beta_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "path length does not match the model");
  }
  const Eigen::VectorXd half = factor_.matrixL().solve(x);
  return {beta_.dot(x), noise_var_ * (1.0 + half.squaredNorm())};
}

Prediction LinearSurrogate::predict(std::span<const std::uint8_t> onehot) const {
  return predict(to_vector(onehot));
}

LinearSurrogate fit_ridge(const Eigen::MatrixXd& design, const Eigen::VectorXd& targets,
                          double ridge_lambda) {
  if (design.rows() != targets.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "design rows and targets differ in length");
  }
  if (design.rows() < 1 || design.cols() < 1) {
    throw Error(ErrorCode::kDimensionMismatch, "ridge fit needs at least one observation");
  }
  if (!(ridge_lambda > 0.0) || !std::isfinite(ridge_lambda)) {
    throw Error(ErrorCode::kInvalidArgument, "ridge lambda must be positive");
  }
  const Eigen::Index n_features = design.cols();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Identity(n_features, n_features) * ridge_lambda;
  gram.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose());
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();

  LinearSurrogate model;
  model.ridge_lambda_ = ridge_lambda;
  model.factor_.compute(gram);
  if (model.factor_.info() != Eigen::Success) {
    throw Error(ErrorCode::kInvalidArgument, "regularized Gram matrix is not positive definite");
  }
  model.beta_ = model.factor_.solve(design.transpose() * targets);

  const Eigen::VectorXd residual = targets - design * model.beta_;
  const double mean = residual.mean();
  const double var = (residual.array() - mean).square().mean();
  model.noise_var_ = std::max(kNoiseVarianceFloor, var);
  return model;
}

LinearSurrogate fit_ridge(const ObservationSet& obs, const Eigen::VectorXd& targets,
                          double ridge_lambda) {
  return fit_ridge(obs.design(), targets, ridge_lambda);
}

LinearSurrogate fit_metric_model(const ObservationSet& obs, double ridge_lambda) {
  return fit_ridge(obs.design(), obs.metrics(), ridge_lambda);
}

LinearSurrogate fit_cost_model(const ObservationSet& obs, double ridge_lambda) {
  const Eigen::VectorXd log_costs = obs.costs().array().log1p();
  return fit_ridge(obs.design(), log_costs, ridge_lambda);
}

double expected_improvement(const Prediction& pred, double best_metric, double xi) {
  const double log_ei = log_expected_improvement(pred, best_metric, xi);
  return std::isinf(log_ei) ? 0.0 : std::exp(log_ei);
}

double log_expected_improvement(const Prediction& pred, double best_metric, double xi) {
  const double gap = best_metric - xi - pred.mean;
  const double sigma = pred.variance > 0.0 ? std::sqrt(pred.variance) : 0.0;
  if (sigma == 0.0 || !std::isfinite(gap / sigma)) {
    return gap > 0.0 ? std::log(gap) : -std::numeric_limits<double>::infinity();
  }
  return std::log(sigma) + log_ei_kernel(gap / sigma);
}

namespace {

double log_cost_denominator(const PipelinePath& path, const LinearSurrogate& cost_model) {
  return std::log(std::max(kLogCostFloor, cost_model.predict(path).mean));
}

}  // namespace

double eips(const PipelinePath& path, const LinearSurrogate& metric_model,
            const LinearSurrogate& cost_model, double best_metric, double xi) {
  const double ei = expected_improvement(metric_model.predict(path), best_metric, xi);
  return ei / std::max(kLogCostFloor, cost_model.predict(path).mean);
}

double log_eips(const PipelinePath& path, const LinearSurrogate& metric_model,
                const LinearSurrogate& cost_model, double best_metric, double xi) {
  return log_expected_improvement(metric_model.predict(path), best_metric, xi) -
         log_cost_denominator(path, cost_model);
}

std::vector<ScoredPath> rank_by_eips(std::vector<PipelinePath> candidates,
                                     const LinearSurrogate& metric_model,
                                     const LinearSurrogate& cost_model, double best_metric,
                                     double xi) {
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  std::vector<ScoredPath> scored;
  scored.reserve(candidates.size());
  for (auto& path : candidates) {
    const double s = log_eips(path, metric_model, cost_model, best_metric, xi);
    scored.push_back({std::move(path), s});
  }
  std::stable_sort(scored.begin(), scored.end(), [](const ScoredPath& a, const ScoredPath& b) {
    return a.log_score > b.log_score;
  });
  return scored;
}

PipelinePath select_next_path(const PipelineSpec& spec, const LinearSurrogate& metric_model,
                              const LinearSurrogate& cost_model, double best_metric, double xi,
                              std::size_t candidate_budget, Rng& rng) {
  auto candidates = sample_distinct_paths(spec, std::max<std::size_t>(1, candidate_budget), rng);
  // Candidates arrive in path order, so keeping the first strict maximum
  // implements the lexicographic tie-break.
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double s = log_eips(candidates[i], metric_model, cost_model, best_metric, xi);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return candidates[best];
}

PipelinePath select_next_path(const PipelineSpec& spec, const LinearSurrogate& metric_model,
                              const LinearSurrogate& cost_model, double best_metric, double xi,
                              std::size_t candidate_budget, std::uint64_t seed) {
  Rng rng(seed);
  return select_next_path(spec, metric_model, cost_model, best_metric, xi, candidate_budget, rng);
}

}  // namespace flash
