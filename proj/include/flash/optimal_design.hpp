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
#include <vector>

#include <Eigen/Core>

#include "flash/pipeline_graph.hpp"

namespace flash {

inline constexpr double kEigenvalueFloor = 1e-12;

// Log of the D-criterion: sum of log(lambda_i + 1e-12) over the top
// min(ell, N) eigenvalues of `gram`. Eigenvalues below 1e-10 of the largest
// are treated as exact zeros so rank-deficient candidates compare stably.
// Throws Error(kNonSymmetricInput) for non-symmetric input.
double d_criterion(const Eigen::MatrixXd& gram, std::size_t ell);

// Gram matrix H = sum p p' of the given paths.
Eigen::MatrixXd gram_matrix(std::span<const PipelinePath> paths, std::size_t num_features);
void add_outer_product(Eigen::MatrixXd& gram, const PipelinePath& path);

// Selected paths and their running Gram matrix. trace(gram) == K * size().
class DesignState {
 public:
  explicit DesignState(std::size_t num_features)
      : gram_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(num_features),
                                    static_cast<Eigen::Index>(num_features))) {}

  void add(const PipelinePath& path);

  const Eigen::MatrixXd& gram() const { return gram_; }
  const std::vector<PipelinePath>& selected() const { return selected_; }
  std::size_t step_count() const { return selected_.size(); }

 private:
  Eigen::MatrixXd gram_;
  std::vector<PipelinePath> selected_;
};

// All paths if the graph has at most `count`, otherwise `count` distinct
// seeded-random paths; either way sorted in path order.
std::vector<PipelinePath> generate_candidates(const PipelineSpec& spec, std::size_t count,
                                              Rng& rng);

// Default candidate count: max(2N, cap).
std::size_t default_candidate_count(const PipelineSpec& spec, std::size_t cap);

// One greedy step: the candidate maximizing d_criterion(gram + p p', ell) with
// ell = (selections so far) + 1, recovered from trace(gram) / K. Ties go to
// the smaller path.
const PipelinePath& greedy_online_next(std::span<const PipelinePath> candidates,
                                       const Eigen::MatrixXd& gram);

// Batch greedy design: a seeded-random first pick followed by n_init - 1
// greedy additions. Repeated picks are allowed.
std::vector<PipelinePath> greedy_batch_design(std::span<const PipelinePath> candidates,
                                              std::size_t n_init, Rng& rng);
std::vector<PipelinePath> greedy_batch_design(std::span<const PipelinePath> candidates,
                                              std::size_t n_init, std::uint64_t seed);

}  // namespace flash
