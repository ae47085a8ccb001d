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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flash/executor.hpp"
#include "flash/pipeline_graph.hpp"
#include "flash/spec_io.hpp"

namespace testing {

using Matrix = std::vector<std::vector<double>>;

inline flash::HyperparamSpec continuous(std::string name, double lo, double hi,
                                        flash::ParamScale scale = flash::ParamScale::kLinear) {
  flash::HyperparamSpec hp;
  hp.name = std::move(name);
  hp.kind = flash::ParamKind::kContinuous;
  hp.lo = lo;
  hp.hi = hi;
  hp.scale = scale;
  hp.default_value = scale == flash::ParamScale::kLog ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
  return hp;
}

inline flash::HyperparamSpec integer(std::string name, std::int64_t lo, std::int64_t hi) {
  flash::HyperparamSpec hp;
  hp.name = std::move(name);
  hp.kind = flash::ParamKind::kInteger;
  hp.lo = static_cast<double>(lo);
  hp.hi = static_cast<double>(hi);
  hp.default_value = lo;
  return hp;
}

inline flash::HyperparamSpec categorical(std::string name, std::vector<flash::ParamValue> choices) {
  flash::HyperparamSpec hp;
  hp.name = std::move(name);
  hp.kind = flash::ParamKind::kCategorical;
  if (!choices.empty()) hp.default_value = choices.front();
  hp.choices = std::move(choices);
  return hp;
}

struct AlgDef {
  std::string id;
  std::vector<flash::HyperparamSpec> hyperparams = {};
};

inline flash::PipelineSpec make_spec(const std::vector<std::vector<AlgDef>>& steps,
                                     std::optional<flash::EdgeList> edges = std::nullopt,
                                     std::string name = "test") {
  std::vector<flash::Step> out;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    flash::Step step;
    step.index = k + 1;
    for (const auto& a : steps[k]) step.algorithms.push_back({a.id, k + 1, a.hyperparams});
    out.push_back(std::move(step));
  }
  return flash::PipelineSpec(std::move(name), std::move(out), std::move(edges));
}

// Fully connected, step sizes given, no hyperparameters; ids "s<k>a<i>".
inline flash::PipelineSpec grid_spec(const std::vector<std::size_t>& sizes) {
  std::vector<std::vector<AlgDef>> steps;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    std::vector<AlgDef> algs;
    for (std::size_t i = 0; i < sizes[k]; ++i) {
      algs.push_back({"s" + std::to_string(k + 1) + "a" + std::to_string(i + 1)});
    }
    steps.push_back(std::move(algs));
  }
  return make_spec(steps);
}

// Two steps with two and three algorithms, mixed hyperparameter kinds.
inline flash::PipelineSpec toy_spec() {
  return make_spec({
      {{"scale", {continuous("factor", 0.5, 2.0)}}, {"none"}},
      {{"svm", {continuous("c", 1e-3, 1e1, flash::ParamScale::kLog), categorical("kernel", {std::string("rbf"), std::string("linear")})}},
       {"knn", {integer("k", 1, 10)}},
       {"tree", {continuous("depth", 1.0, 8.0), categorical("bootstrap", {true, false})}}},
  });
}

// Two steps of two and three algorithms with the first step-1 algorithm not
// connected to the third step-2 algorithm.
inline flash::PipelineSpec fig2_spec() {
  const flash::EdgeList edges = {{"v1_1", "v2_1"}, {"v1_1", "v2_2"}, {"v1_2", "v2_1"},
                                 {"v1_2", "v2_2"}, {"v1_2", "v2_3"}};
  return make_spec({{{"v1_1"}, {"v1_2"}}, {{"v2_1"}, {"v2_2"}, {"v2_3"}}}, edges);
}

inline flash::PipelineSpec four_step_spec() {
  return flash::load_spec_file(std::string(FLASH_DATA_DIR) + "/four_step_classification.json");
}

// Gaussian elimination with partial pivoting.
inline std::vector<double> solve_dense(Matrix a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t pivot = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[pivot][c])) pivot = r;
    }
    std::swap(a[c], a[pivot]);
    std::swap(b[c], b[pivot]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t j = c; j < n; ++j) a[r][j] -= f * a[c][j];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
  }
  return x;
}

inline Matrix inverse_dense(const Matrix& a) {
  const std::size_t n = a.size();
  Matrix inv(n, std::vector<double>(n));
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> e(n, 0.0);
    e[j] = 1.0;
    const auto col = solve_dense(a, e);
    for (std::size_t i = 0; i < n; ++i) inv[i][j] = col[i];
  }
  return inv;
}

// Normal equations (P'P + lambda I) beta = P't.
inline std::vector<double> ridge_oracle(const Matrix& p, const std::vector<double>& t,
                                        double lambda) {
  const std::size_t n = p.size();
  const std::size_t d = p.front().size();
  Matrix a(d, std::vector<double>(d, 0.0));
  std::vector<double> b(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < d; ++i) {
      b[i] += p[r][i] * t[r];
      for (std::size_t j = 0; j < d; ++j) a[i][j] += p[r][i] * p[r][j];
    }
  }
  for (std::size_t i = 0; i < d; ++i) a[i][i] += lambda;
  return solve_dense(a, b);
}

// Cyclic Jacobi rotations; eigenvalues in decreasing order.
inline std::vector<double> jacobi_eigenvalues(Matrix a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
    }
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1.0 / std::sqrt(t * t + 1);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p];
          const double akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k];
          const double aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a[i][i];
  std::sort(eig.begin(), eig.end(), std::greater<>());
  return eig;
}

inline Matrix gram_of(const std::vector<std::vector<std::uint8_t>>& rows, std::size_t n) {
  Matrix g(n, std::vector<double>(n, 0.0));
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) g[i][j] += double(r[i] * r[j]);
    }
  }
  return g;
}

// Product of the top min(ell, n) eigenvalues.
inline double top_eigen_product(const Matrix& g, std::size_t ell) {
  const auto eig = jacobi_eigenvalues(g);
  double prod = 1.0;
  for (std::size_t i = 0; i < std::min(ell, eig.size()); ++i) prod *= std::max(eig[i], 0.0);
  return prod;
}

inline double phi(double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi); }
inline double Phi(double u) { return 0.5 * std::erfc(-u / std::numbers::sqrt2); }

// Counts every run_step call and forwards to a synthetic executor.
class CountingExecutor : public flash::Executor {
 public:
  explicit CountingExecutor(flash::SyntheticBenchmark b) : inner_(std::move(b)) {}

  flash::TimeMode time_mode() const override { return flash::TimeMode::kSimulated; }
  flash::StepOutput run_step(const flash::StepRequest& request) override {
    ++calls;
    per_step.resize(std::max(per_step.size(), request.step));
    ++per_step[request.step - 1];
    log.push_back(request);
    return inner_.run_step(request);
  }

  std::size_t calls = 0;
  std::vector<std::size_t> per_step;
  std::vector<flash::StepRequest> log;

 private:
  flash::SyntheticExecutor inner_;
};

}  // namespace testing
