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

#include "flash/cache.hpp"

#include <algorithm>

namespace flash {

namespace {

// Length-prefixed so no two distinct token sequences share a serialization.
void append_token(std::string& out, std::string_view token) {
  out += std::to_string(token.size());
  out += ':';
  out += token;
}

std::string value_token(const ParamValue& value) {
  if (auto v = numeric_value(value)) return "n" + canonical_double(*v);
  if (const auto* b = std::get_if<bool>(&value)) return *b ? "b1" : "b0";
  return "s" + std::get<std::string>(value);
}

}  // namespace

std::string canonical_prefix(const PipelineSpec& spec, const PipelinePath& path,
                             const HyperparamAssignment& hyperparams, std::size_t prefix_steps,
                             std::string_view dataset_id) {
  std::string out = "flash-prefix-v1;";
  append_token(out, dataset_id);
  for (std::size_t k = 0; k < prefix_steps && k < path.num_steps(); ++k) {
    const std::string& id = spec.algorithm(k, path.choices()[k]).id;
    out += ";";
    append_token(out, id);
    if (const auto* params = hyperparams.params_for(id)) {
      for (const auto& [name, value] : *params) {
        out += ',';
        append_token(out, name);
        append_token(out, value_token(value));
      }
    }
  }
  return out;
}

CacheKey make_prefix_key(const PipelineSpec& spec, const PipelinePath& path,
                         const HyperparamAssignment& hyperparams, std::size_t prefix_steps,
                         std::string_view dataset_id) {
  return {digest_bytes(canonical_prefix(spec, path, hyperparams, prefix_steps, dataset_id))};
}

std::optional<CachedOutput> CachePool::lookup(const CacheKey& key) {
  auto it = index_.find(key.digest);
  if (it == index_.end()) {
    ++misses_;
    return std::nullopt;
  }
  ++hits_;
  lru_.splice(lru_.begin(), lru_, it->second);
  it->second->last_used = ++tick_;
  return it->second->payload;
}

void CachePool::insert(const CacheKey& key, CachedOutput payload, std::uint64_t size_bytes) {
  if (size_bytes == 0 || size_bytes > budget_) return;
  if (auto it = index_.find(key.digest); it != index_.end()) {
    used_ -= it->second->size_bytes;
    lru_.erase(it->second);
    index_.erase(it);
  }
  lru_.push_front({key, std::move(payload), size_bytes, ++tick_});
  index_.emplace(key.digest, lru_.begin());
  used_ += size_bytes;
  // The fresh entry is at the front and fits on its own, so it survives.
  while (used_ > budget_) evict_one();
}

void CachePool::evict_one() {
  const CacheEntry& victim = lru_.back();
  used_ -= victim.size_bytes;
  index_.erase(victim.key.digest);
  lru_.pop_back();
  ++evictions_;
}

void CachePool::clear() {
  lru_.clear();
  index_.clear();
  used_ = 0;
}

std::vector<CacheEntry> CachePool::entries() const { return {lru_.rbegin(), lru_.rend()}; }

std::size_t RunResult::cache_hits() const {
  return static_cast<std::size_t>(
      std::count_if(per_step.begin(), per_step.end(), [](const StepRecord& s) { return s.cached; }));
}

std::size_t RunResult::cache_misses() const { return per_step.size() - cache_hits(); }

RunResult run_pipeline_with_cache(const PipelineSpec& spec, std::string_view dataset_id,
                                  const PipelinePath& path,
                                  const HyperparamAssignment& hyperparams, CachePool& pool,
                                  Executor& executor, double run_timeout_seconds) {
  if (executor.consume_handle_invalidation()) pool.clear();

  RunResult result;
  DatasetHandle current = executor.input_handle(dataset_id);
  std::optional<double> metric;
  const std::size_t num_steps = path.num_steps();
  for (std::size_t k = 0; k < num_steps; ++k) {
    const CacheKey key = make_prefix_key(spec, path, hyperparams, k + 1, dataset_id);
    if (auto hit = pool.lookup(key)) {
      current = std::move(hit->handle);
      metric = hit->metric;
      result.per_step.push_back({true, 0.0});
      continue;
    }
    const AlgorithmSpec& algo = spec.algorithm(k, path.choices()[k]);
    StepRequest request;
    request.step = k + 1;
    request.algorithm = algo.id;
    if (const auto* params = hyperparams.params_for(algo.id)) request.hyperparams = *params;
    request.input = current;
    request.is_last = k + 1 == num_steps;
    request.timeout_seconds = std::max(0.0, run_timeout_seconds - result.cost_seconds);

    StepOutput out = executor.run_step(request);
    if (request.is_last && !out.metric) {
      throw Error(ErrorCode::kExecutorFailure, "last step returned no metric");
    }
    result.cost_seconds += out.seconds;
    result.per_step.push_back({false, out.seconds});
    metric = out.metric;
    pool.insert(key, {out.output, out.metric}, std::max<std::uint64_t>(1, out.output.size_bytes));
    current = std::move(out.output);
  }
  if (!metric) throw Error(ErrorCode::kExecutorFailure, "cached final step carried no metric");
  result.metric = *metric;
  return result;
}

}  // namespace flash
