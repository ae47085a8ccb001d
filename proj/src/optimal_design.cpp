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

#include "flash/optimal_design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "flash/error.hpp"

namespace flash {

namespace {

constexpr double kTieTolerance = 1e-9;
constexpr double kRelativeZero = 1e-10;

// True when `score` beats the incumbent, with near-equal scores resolved in
// favor of the smaller path.
bool improves(double score, const PipelinePath& path, double best_score,
              const PipelinePath* best_path) {
  if (best_path == nullptr || score > best_score + kTieTolerance) return true;
  if (score < best_score - kTieTolerance) return false;
  return path < *best_path;
}

}  // namespace

double d_criterion(const Eigen::MatrixXd& gram, std::size_t ell) {
  if (gram.rows() != gram.cols()) {
    throw Error(ErrorCode::kNonSymmetricInput, "Gram matrix must be square");
  }
  const Eigen::Index n = gram.rows();
  if (n == 0) return 0.0;
  const double scale = std::max(1.0, gram.cwiseAbs().maxCoeff());
  if ((gram - gram.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorCode::kNonSymmetricInput, "Gram matrix must be symmetric");
  }
  if (ell == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& eig = solver.eigenvalues();  // ascending
  const double largest = std::max(0.0, eig[n - 1]);
  const Eigen::Index top = std::min<Eigen::Index>(static_cast<Eigen::Index>(ell), n);
  double total = 0.0;
  for (Eigen::Index i = n - 1; i >= n - top; --i) {
    double lambda = eig[i];
    if (lambda <= kRelativeZero * largest) lambda = 0.0;
    total += std::log(lambda + kEigenvalueFloor);
  }
  return total;
}

void add_outer_product(Eigen::MatrixXd& gram, const PipelinePath& path) {
  for (std::size_t a = 0; a < path.num_steps(); ++a) {
    for (std::size_t b = 0; b < path.num_steps(); ++b) {
      gram(static_cast<Eigen::Index>(path.bit(a)), static_cast<Eigen::Index>(path.bit(b))) += 1.0;
    }
  }
}

Eigen::MatrixXd gram_matrix(std::span<const PipelinePath> paths, std::size_t num_features) {
  const auto n = static_cast<Eigen::Index>(num_features);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
  for (const auto& p : paths) add_outer_product(gram, p);
  return gram;
}

void DesignState::add(const PipelinePath& path) {
  add_outer_product(gram_, path);
  selected_.push_back(path);
}

std::vector<PipelinePath> generate_candidates(const PipelineSpec& spec, std::size_t count,
                                              Rng& rng) {
  return sample_distinct_paths(spec, std::max<std::size_t>(1, count), rng);
}

std::size_t default_candidate_count(const PipelineSpec& spec, std::size_t cap) {
  return std::max(2 * spec.num_algorithms(), cap);
}

const PipelinePath& greedy_online_next(std::span<const PipelinePath> candidates,
                                       const Eigen::MatrixXd& gram) {
  if (candidates.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "greedy design needs at least one candidate");
  }
  const double steps = static_cast<double>(candidates.front().num_steps());
  const auto selections = static_cast<std::size_t>(std::llround(gram.trace() / steps));
  const std::size_t ell = selections + 1;

  Eigen::MatrixXd trial = gram;
  const PipelinePath* best = nullptr;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const auto& candidate : candidates) {
    add_outer_product(trial, candidate);
    const double score = d_criterion(trial, ell);
    if (improves(score, candidate, best_score, best)) {
      best = &candidate;
      best_score = score;
    }
    trial = gram;
  }
  return *best;
}

std::vector<PipelinePath> greedy_batch_design(std::span<const PipelinePath> candidates,
                                              std::size_t n_init, Rng& rng) {
  if (candidates.empty() || n_init == 0) {
    throw Error(ErrorCode::kInvalidArgument, "batch design needs candidates and n_init >= 1");
  }
  std::uniform_int_distribution<std::size_t> first(0, candidates.size() - 1);
  DesignState state(candidates.front().onehot().size());
  state.add(candidates[first(rng)]);
  while (state.step_count() < n_init) {
    state.add(greedy_online_next(candidates, state.gram()));
  }
  return state.selected();
}

std::vector<PipelinePath> greedy_batch_design(std::span<const PipelinePath> candidates,
                                              std::size_t n_init, std::uint64_t seed) {
  Rng rng(seed);
  return greedy_batch_design(candidates, n_init, rng);
}

}  // namespace flash
