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

#include "flash/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/Core>

#include "flash/error.hpp"

namespace flash {

namespace {

constexpr double kKernelWeight = 0.75;
constexpr double kBandwidthFloorFraction = 0.01;
constexpr int kMaxRejections = 64;

using SharedRecords = std::vector<std::shared_ptr<const HistoryRecord>>;
using AlgorithmDensities = std::shared_ptr<const std::vector<ParamDensity>>;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

std::size_t good_set_size(std::size_t n, double gamma) {
  const double raw = std::ceil(gamma * static_cast<double>(n) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)), 1, n);
}

// Evenly spaced picks from ranks [begin, end), always including the first.
std::vector<std::size_t> thin(const std::vector<std::size_t>& ranking, std::size_t begin,
                              std::size_t end) {
  const std::size_t count = end - begin;
  if (count <= kMaxKernelRecords) {
    return {ranking.begin() + static_cast<std::ptrdiff_t>(begin),
            ranking.begin() + static_cast<std::ptrdiff_t>(end)};
  }
  std::vector<std::size_t> out;
  out.reserve(kMaxKernelRecords);
  for (std::size_t j = 0; j < kMaxKernelRecords; ++j) {
    out.push_back(ranking[begin + j * count / kMaxKernelRecords]);
  }
  return out;
}

bool thinned(std::size_t good_size, std::size_t n) {
  return good_size > kMaxKernelRecords || n - good_size > kMaxKernelRecords;
}

std::size_t sample_index(const std::vector<double>& weights, Rng& rng) {
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  return pick(rng);
}

// Densities for the hyperparameters of algorithm (k, local), from the members
// that chose it, visited in ranking order.
AlgorithmDensities build_algorithm(const PipelineSpec& spec, const SharedRecords& history,
                                   const std::vector<std::size_t>& members, std::size_t k,
                                   std::size_t local) {
  const AlgorithmSpec& algo = spec.algorithm(k, local);
  const std::size_t H = algo.hyperparams.size();
  std::vector<std::vector<double>> centers(H);
  std::vector<std::vector<std::size_t>> counts(H);
  for (std::size_t h = 0; h < H; ++h) counts[h].assign(algo.hyperparams[h].choices.size(), 0);

  if (H > 0) {
    for (std::size_t m : members) {
      const HistoryRecord& rec = *history[m];
      if (rec.path.choices()[k] != local) continue;
      const auto* params = rec.hyperparams.params_for(algo.id);
      if (!params) continue;
      for (std::size_t h = 0; h < H; ++h) {
        const HyperparamSpec& hp = algo.hyperparams[h];
        auto it = params->find(hp.name);
        if (it == params->end()) continue;
        if (hp.is_numeric()) {
          if (auto v = numeric_value(it->second)) centers[h].push_back(hp.to_model(*v));
        } else if (auto idx = hp.choice_index(it->second)) {
          ++counts[h][*idx];
        }
      }
    }
  }

  auto out = std::make_shared<std::vector<ParamDensity>>();
  out->reserve(H);
  for (std::size_t h = 0; h < H; ++h) {
    const HyperparamSpec& hp = algo.hyperparams[h];
    if (hp.is_numeric()) {
      out->emplace_back(ParzenDensity(hp.model_lo(), hp.model_hi(), std::move(centers[h])));
    } else {
      out->emplace_back(CategoricalDensity(counts[h]));
    }
  }
  return out;
}

std::vector<CategoricalDensity> build_steps(const PipelineSpec& spec,
                                            const SharedRecords& history,
                                            const std::vector<std::size_t>& members) {
  std::vector<CategoricalDensity> steps;
  steps.reserve(spec.num_steps());
  for (std::size_t k = 0; k < spec.num_steps(); ++k) {
    std::vector<std::size_t> counts(spec.step_size(k), 0);
    for (std::size_t m : members) ++counts[history[m]->path.choices()[k]];
    steps.emplace_back(counts);
  }
  return steps;
}

// Builds the partition for `members`, reusing `previous` entries not flagged
// in `dirty` ([step][local]); with no previous partition everything is built.
DensityModel::Partition build_partition(const PipelineSpec& spec, const SharedRecords& history,
                                        const std::vector<std::size_t>& members,
                                        const DensityModel::Partition* previous,
                                        const std::vector<std::vector<bool>>* dirty) {
  DensityModel::Partition part;
  part.steps = build_steps(spec, history, members);
  part.params.resize(spec.num_steps());
  for (std::size_t k = 0; k < spec.num_steps(); ++k) {
    part.params[k].resize(spec.step_size(k));
    for (std::size_t local = 0; local < spec.step_size(k); ++local) {
      if (previous && !(*dirty)[k][local]) {
        part.params[k][local] = previous->params[k][local];
      } else {
        part.params[k][local] = build_algorithm(spec, history, members, k, local);
      }
    }
  }
  return part;
}

double model_point(const HyperparamSpec& hp, const ParamValue& value) {
  auto v = numeric_value(value);
  if (!v) throw Error(ErrorCode::kInvalidArgument, "non-numeric value for '" + hp.name + "'");
  return hp.to_model(*v);
}

double log_density(const ParamDensity& density, const HyperparamSpec& hp,
                   const ParamValue& value) {
  if (const auto* parzen = std::get_if<ParzenDensity>(&density)) {
    return parzen->log_pdf(model_point(hp, value));
  }
  auto idx = hp.choice_index(value);
  if (!idx) throw Error(ErrorCode::kInvalidArgument, "value outside choices of '" + hp.name + "'");
  return std::get<CategoricalDensity>(density).log_prob(*idx);
}

ParamValue sample_value(const ParamDensity& density, const HyperparamSpec& hp, Rng& rng) {
  if (const auto* parzen = std::get_if<ParzenDensity>(&density)) {
    const double raw = std::clamp(hp.from_model(parzen->sample(rng)), hp.lo, hp.hi);
    if (hp.kind == ParamKind::kInteger) {
      const auto lo = static_cast<std::int64_t>(std::ceil(hp.lo));
      const auto hi = static_cast<std::int64_t>(std::floor(hp.hi));
      return std::clamp(static_cast<std::int64_t>(std::llround(raw)), lo, hi);
    }
    return raw;
  }
  const auto& probs = std::get<CategoricalDensity>(density).probabilities();
  return hp.choices[sample_index(probs, rng)];
}

}  // namespace

CategoricalDensity::CategoricalDensity(const std::vector<std::size_t>& counts) {
  const double total = static_cast<double>(
      std::accumulate(counts.begin(), counts.end(), std::size_t{0}) + counts.size());
  probs_.reserve(counts.size());
  for (std::size_t c : counts) probs_.push_back((static_cast<double>(c) + 1.0) / total);
}

double CategoricalDensity::log_prob(std::size_t i) const { return std::log(probs_.at(i)); }

ParzenDensity::ParzenDensity(double lo, double hi, std::vector<double> centers)
    : lo_(lo), hi_(hi), centers_(std::move(centers)) {
  const double range = hi_ - lo_;
  const double floor = kBandwidthFloorFraction * range;
  const auto n = static_cast<double>(centers_.size());
  double sd = 0.0;
  if (centers_.size() > 1) {
    const double mean = std::accumulate(centers_.begin(), centers_.end(), 0.0) / n;
    double ss = 0.0;
    for (double c : centers_) ss += (c - mean) * (c - mean);
    sd = std::sqrt(ss / n);
  }
  bandwidth_ = centers_.empty() ? floor : std::max(1.06 * sd * std::pow(n, -0.2), floor);
  if (bandwidth_ <= 0.0) bandwidth_ = 1.0;  // zero-width range
  inv_mass_.reserve(centers_.size());
  scaled_centers_.reserve(centers_.size());
  for (double c : centers_) {
    scaled_centers_.push_back(c / bandwidth_);
    const double mass = normal_cdf((hi_ - c) / bandwidth_) - normal_cdf((lo_ - c) / bandwidth_);
    inv_mass_.push_back(1.0 / std::max(mass, std::numeric_limits<double>::min()));
  }
}

double ParzenDensity::pdf(double x) const {
  const double range = hi_ - lo_;
  if (x < lo_ || x > hi_) return 0.0;
  const double uniform = range > 0.0 ? 1.0 / range : 1.0;
  if (centers_.empty()) return uniform;
  const auto n = static_cast<Eigen::Index>(centers_.size());
  const Eigen::Map<const Eigen::ArrayXd> c(scaled_centers_.data(), n);
  const Eigen::Map<const Eigen::ArrayXd> w(inv_mass_.data(), n);
  const double kernel_sum = ((-0.5 * (x / bandwidth_ - c).square()).exp() * w).sum();
  const double kde = kernel_sum / (bandwidth_ * std::sqrt(2.0 * std::numbers::pi) *
                                   static_cast<double>(n));
  return kKernelWeight * kde + (1.0 - kKernelWeight) * uniform;
}

double ParzenDensity::log_pdf(double x) const {
  const double p = pdf(x);
  return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
}

double ParzenDensity::sample(Rng& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool from_uniform = centers_.empty() || unit(rng) >= kKernelWeight;
  if (from_uniform) return lo_ + (hi_ - lo_) * unit(rng);
  std::uniform_int_distribution<std::size_t> pick(0, centers_.size() - 1);
  const double c = centers_[pick(rng)];
  std::normal_distribution<double> kernel(c, bandwidth_);
  for (int i = 0; i < kMaxRejections; ++i) {
    const double x = kernel(rng);
    if (x >= lo_ && x <= hi_) return x;
  }
  return std::clamp(c, lo_, hi_);
}

std::vector<std::size_t> DensityModel::good_members() const {
  return thin(ranking_, 0, good_size_);
}

std::vector<std::size_t> DensityModel::bad_members() const {
  return thin(ranking_, good_size_, ranking_.size());
}

double DensityModel::score(const PipelinePath& path,
                           const HyperparamAssignment& hyperparams) const {
  double total = 0.0;
  for (std::size_t k = 0; k < spec_->num_steps(); ++k) {
    const std::size_t local = path.choices()[k];
    total += good_.steps[k].log_prob(local) - bad_.steps[k].log_prob(local);
    const AlgorithmSpec& algo = spec_->algorithm(k, local);
    const auto* params = hyperparams.params_for(algo.id);
    if (!params) continue;
    for (std::size_t h = 0; h < algo.hyperparams.size(); ++h) {
      const HyperparamSpec& hp = algo.hyperparams[h];
      auto it = params->find(hp.name);
      if (it == params->end()) continue;
      total += log_density(good_.param(k, local, h), hp, it->second) -
               log_density(bad_.param(k, local, h), hp, it->second);
    }
  }
  return total;
}

DensityModel DensityModel::build(std::shared_ptr<const PipelineSpec> spec, SharedRecords history,
                                 double gamma) {
  if (history.empty()) throw Error(ErrorCode::kEmptyHistory, "cannot build a model from no history");
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "gamma must lie in (0, 1)");
  }
  DensityModel model(std::move(spec), std::move(history), gamma);
  const SharedRecords& h = model.history_;
  model.ranking_.resize(h.size());
  std::iota(model.ranking_.begin(), model.ranking_.end(), std::size_t{0});
  std::stable_sort(model.ranking_.begin(), model.ranking_.end(),
                   [&](std::size_t a, std::size_t b) { return h[a]->metric < h[b]->metric; });
  model.good_size_ = good_set_size(h.size(), gamma);
  model.good_ = build_partition(*model.spec_, h, model.good_members(), nullptr, nullptr);
  model.bad_ = build_partition(*model.spec_, h, model.bad_members(), nullptr, nullptr);
  return model;
}

DensityModel build_model(const PipelineSpec& spec, HistorySet history, double gamma) {
  SharedRecords shared;
  shared.reserve(history.size());
  for (HistoryRecord& rec : history) {
    if (rec.path.num_steps() != spec.num_steps()) {
      throw Error(ErrorCode::kDimensionMismatch, "history path does not belong to the spec");
    }
    shared.push_back(std::make_shared<const HistoryRecord>(std::move(rec)));
  }
  return DensityModel::build(std::make_shared<const PipelineSpec>(spec), std::move(shared),
                             gamma);
}

// Without thinning, only algorithms used by records that entered or left a
// partition get new densities; every other algorithm sees the same members in
// the same order, so sharing its previous densities gives exactly the rebuilt
// model. Once thinning applies, the kept records shift and all are rebuilt.
DensityModel update(const DensityModel& model, HistoryRecord record) {
  const PipelineSpec& spec = model.spec();
  if (record.path.num_steps() != spec.num_steps()) {
    throw Error(ErrorCode::kDimensionMismatch, "record path does not belong to the spec");
  }
  SharedRecords history = model.history_;
  const std::size_t fresh = history.size();
  const double metric = record.metric;
  history.push_back(std::make_shared<const HistoryRecord>(std::move(record)));

  DensityModel next(model.spec_, std::move(history), model.gamma_);
  const SharedRecords& h = next.history_;
  next.ranking_ = model.ranking_;
  const auto pos = std::upper_bound(
      next.ranking_.begin(), next.ranking_.end(), metric,
      [&](double value, std::size_t idx) { return value < h[idx]->metric; });
  next.ranking_.insert(pos, fresh);
  next.good_size_ = good_set_size(h.size(), model.gamma_);

  std::vector<bool> was_good(h.size(), false);
  for (std::size_t i = 0; i < model.good_size_; ++i) was_good[model.ranking_[i]] = true;
  std::vector<bool> is_good(h.size(), false);
  for (std::size_t i = 0; i < next.good_size_; ++i) is_good[next.ranking_[i]] = true;

  std::vector<std::vector<bool>> dirty(spec.num_steps());
  for (std::size_t k = 0; k < spec.num_steps(); ++k) dirty[k].assign(spec.step_size(k), false);
  auto mark = [&](std::size_t idx) {
    for (std::size_t k = 0; k < spec.num_steps(); ++k) dirty[k][h[idx]->path.choices()[k]] = true;
  };
  mark(fresh);
  for (std::size_t idx = 0; idx < fresh; ++idx) {
    if (was_good[idx] != is_good[idx]) mark(idx);
  }

  const bool reuse = !thinned(model.good_size_, fresh) && !thinned(next.good_size_, h.size());
  next.good_ = build_partition(spec, h, next.good_members(), reuse ? &model.good_ : nullptr, &dirty);
  next.bad_ = build_partition(spec, h, next.bad_members(), reuse ? &model.bad_ : nullptr, &dirty);
  return next;
}

std::pair<PipelinePath, HyperparamAssignment> propose(const DensityModel& model,
                                                      std::size_t n_candidates, Rng& rng) {
  const PipelineSpec& spec = model.spec();
  const DensityModel::Partition& good = model.good();
  const std::size_t K = spec.num_steps();
  std::optional<std::pair<PipelinePath, HyperparamAssignment>> best;
  double best_score = -std::numeric_limits<double>::infinity();

  for (std::size_t c = 0; c < std::max<std::size_t>(1, n_candidates); ++c) {
    std::vector<std::size_t> choices;
    choices.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
      std::vector<double> weights = good.steps[k].probabilities();
      for (std::size_t j = 0; j < weights.size(); ++j) {
        const bool reachable = k == 0 || spec.has_edge(k - 1, choices.back(), j);
        if (!reachable || spec.completions(k, j) == 0.0) weights[j] = 0.0;
      }
      choices.push_back(sample_index(weights, rng));
    }
    PipelinePath path(spec, std::move(choices));

    HyperparamAssignment hyperparams;
    for (std::size_t k = 0; k < K; ++k) {
      const std::size_t local = path.choices()[k];
      const AlgorithmSpec& algo = spec.algorithm(k, local);
      hyperparams.add_algorithm(algo.id);
      for (std::size_t h = 0; h < algo.hyperparams.size(); ++h) {
        hyperparams.set(algo.id, algo.hyperparams[h].name,
                        sample_value(good.param(k, local, h), algo.hyperparams[h], rng));
      }
    }

    const double s = model.score(path, hyperparams);
    if (!best || s > best_score) {
      best_score = s;
      best.emplace(std::move(path), std::move(hyperparams));
    }
  }
  return std::move(*best);
}

std::pair<PipelinePath, HyperparamAssignment> propose(const DensityModel& model,
                                                      std::size_t n_candidates,
                                                      std::uint64_t seed) {
  Rng rng(seed);
  return propose(model, n_candidates, rng);
}

}  // namespace flash
