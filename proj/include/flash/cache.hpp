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

#include <cstdint>
#include <list>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "flash/digest.hpp"
#include "flash/executor.hpp"
#include "flash/pipeline_graph.hpp"

namespace flash {

inline constexpr std::uint64_t kDefaultCacheBytes = 1ull << 30;

struct CacheKey {
  Digest128 digest;
  friend bool operator==(const CacheKey&, const CacheKey&) = default;
};

// Canonical byte string for the first `prefix_steps` steps of a configuration:
// dataset id, then per step the algorithm id and its hyperparameters in name
// order. Numbers are written in shortest round-trip form, so numerically equal
// values (3 and 3.0 included) serialize identically.
std::string canonical_prefix(const PipelineSpec& spec, const PipelinePath& path,
                             const HyperparamAssignment& hyperparams, std::size_t prefix_steps,
                             std::string_view dataset_id);

CacheKey make_prefix_key(const PipelineSpec& spec, const PipelinePath& path,
                         const HyperparamAssignment& hyperparams, std::size_t prefix_steps,
                         std::string_view dataset_id);

struct CachedOutput {
  DatasetHandle handle;
  std::optional<double> metric;  // present for last-step outputs

  friend bool operator==(const CachedOutput&, const CachedOutput&) = default;
};

struct CacheEntry {
  CacheKey key;
  CachedOutput payload;
  std::uint64_t size_bytes = 0;
  std::uint64_t last_used = 0;
};

// LRU memo of step outputs under a byte budget. used_bytes() <= budget_bytes()
// holds after every public call. Single-owner; not thread-safe.
class CachePool {
 public:
  explicit CachePool(std::uint64_t budget_bytes = kDefaultCacheBytes) : budget_(budget_bytes) {}

  // Hit: bumps recency and counts a hit. Miss: counts a miss. Never evicts.
  std::optional<CachedOutput> lookup(const CacheKey& key);

  // Payloads larger than the whole budget are silently not cached.
  void insert(const CacheKey& key, CachedOutput payload, std::uint64_t size_bytes);

  void clear();

  bool contains(const CacheKey& key) const { return index_.contains(key.digest); }
  std::size_t size() const { return index_.size(); }
  std::uint64_t budget_bytes() const { return budget_; }
  std::uint64_t used_bytes() const { return used_; }
  std::uint64_t hits() const { return hits_; }
  std::uint64_t misses() const { return misses_; }
  std::uint64_t evictions() const { return evictions_; }

  // Resident entries from least to most recently used.
  std::vector<CacheEntry> entries() const;

 private:
  void evict_one();

  std::uint64_t budget_;
  std::uint64_t used_ = 0;
  std::uint64_t hits_ = 0;
  std::uint64_t misses_ = 0;
  std::uint64_t evictions_ = 0;
  std::uint64_t tick_ = 0;
  std::list<CacheEntry> lru_;  // front = most recent
  std::unordered_map<Digest128, std::list<CacheEntry>::iterator, Digest128Hash> index_;
};

// Runs steps 1..K, reusing any cached prefix output and caching fresh ones.
// `run_timeout_seconds` bounds the executed time of the whole run; each step
// receives what is left of it. StepTimeout and executor errors propagate.
RunResult run_pipeline_with_cache(const PipelineSpec& spec, std::string_view dataset_id,
                                  const PipelinePath& path,
                                  const HyperparamAssignment& hyperparams, CachePool& pool,
                                  Executor& executor, double run_timeout_seconds);

}  // namespace flash
