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

#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "flash/error.hpp"
#include "flash/pipeline_graph.hpp"
#include "support.hpp"

using namespace flash;
using testing::AlgDef;
using testing::make_spec;

namespace {

// Independent path walk over the edge list by id.
std::size_t count_paths_by_walk(const PipelineSpec& spec) {
  const auto edges = spec.edges();
  std::set<std::pair<std::string, std::string>> edge_set(edges.begin(), edges.end());
  std::vector<std::vector<std::string>> frontier;
  for (const auto& a : spec.steps()[0].algorithms) frontier.push_back({a.id});
  for (std::size_t k = 1; k < spec.num_steps(); ++k) {
    std::vector<std::vector<std::string>> next;
    for (const auto& prefix : frontier) {
      for (const auto& a : spec.steps()[k].algorithms) {
        if (edge_set.contains({prefix.back(), a.id})) {
          auto extended = prefix;
          extended.push_back(a.id);
          next.push_back(std::move(extended));
        }
      }
    }
    frontier = std::move(next);
  }
  return frontier.size();
}

}  // namespace

TEST_SUITE("pipeline_graph") {
  TEST_CASE("fully connected 2x3 spec has 6 paths") {
    const auto spec = testing::grid_spec({2, 3});
    CHECK(enumerate_paths(spec).size() == 6);
    CHECK(spec.path_count() == 6.0);
  }

  TEST_CASE("four-step spec has 1,456 paths and the expected shape") {
    const auto spec = testing::four_step_spec();
    CHECK(spec.num_steps() == 4);
    CHECK(spec.step_size(0) == 4);
    CHECK(spec.step_size(1) == 2);
    CHECK(spec.step_size(2) == 13);
    CHECK(spec.step_size(3) == 14);
    CHECK(spec.num_algorithms() == 33);
    CHECK(enumerate_paths(spec, 2000).size() == 1456);

    std::size_t categorical = 0;
    std::size_t continuous = 0;
    for (const auto& step : spec.steps()) {
      for (const auto& a : step.algorithms) {
        for (const auto& hp : a.hyperparams) {
          (hp.kind == ParamKind::kCategorical ? categorical : continuous) += 1;
        }
      }
    }
    CHECK(categorical == 30);
    CHECK(continuous == 72);
  }

  TEST_CASE("missing edge leaves 5 paths, matching an exhaustive walk") {
    const auto spec = testing::fig2_spec();
    CHECK(enumerate_paths(spec).size() == 5);
    CHECK(count_paths_by_walk(spec) == 5);
    CHECK(spec.path_count() == 5.0);
  }

  TEST_CASE("enumeration is lexicographic by step-block index") {
    const auto paths = enumerate_paths(testing::grid_spec({2, 3}));
    for (std::size_t i = 1; i < paths.size(); ++i) CHECK(paths[i - 1] < paths[i]);
    CHECK(paths.front().choices() == std::vector<std::size_t>{0, 0});
    CHECK(paths.back().choices() == std::vector<std::size_t>{1, 2});
  }

  TEST_CASE("enumeration past the limit reports the total") {
    const auto spec = testing::four_step_spec();
    try {
      enumerate_paths(spec, 1000);
      FAIL("expected PathCountExceedsLimit");
    } catch (const PathCountExceedsLimit& e) {
      CHECK(e.total() == 1456.0);
      CHECK(e.code() == ErrorCode::kPathCountExceedsLimit);
    }
  }

  TEST_CASE("fully connected path counts equal the product of step sizes") {
    for (const auto& sizes : std::vector<std::vector<std::size_t>>{{1}, {3}, {2, 2}, {3, 1, 4}, {2, 3, 2, 2}}) {
      std::size_t product = 1;
      for (auto s : sizes) product *= s;
      CHECK(enumerate_paths(testing::grid_spec(sizes)).size() == product);
    }
  }

  TEST_CASE("encode of the second then third algorithm gives 0,1,0,0,1") {
    const auto spec = testing::fig2_spec();
    const std::vector<std::string> ids = {"v1_2", "v2_3"};
    const auto path = encode_path(spec, ids);
    CHECK(path.onehot() == std::vector<std::uint8_t>{0, 1, 0, 0, 1});
    CHECK(decode_path(spec, path) == ids);
    CHECK(path_label(spec, path) == "v1_2-v2_3");
  }

  TEST_CASE("single-algorithm spec encodes to [1]") {
    const auto spec = testing::grid_spec({1});
    const std::vector<std::string> ids = {"s1a1"};
    CHECK(encode_path(spec, ids).onehot() == std::vector<std::uint8_t>{1});
    CHECK(enumerate_paths(spec).size() == 1);
  }

  TEST_CASE("encode rejects unknown ids and missing edges") {
    const auto spec = testing::fig2_spec();
    const std::vector<std::string> bad_edge = {"v1_1", "v2_3"};
    const std::vector<std::string> unknown = {"v1_1", "nope"};
    const std::vector<std::string> wrong_step = {"v2_1", "v2_2"};
    const std::vector<std::string> short_path = {"v1_1"};
    auto code_of = [&](const std::vector<std::string>& ids) {
      try {
        encode_path(spec, ids);
      } catch (const Error& e) {
        return e.code();
      }
      return ErrorCode::kIo;
    };
    CHECK(code_of(bad_edge) == ErrorCode::kEdgeViolation);
    CHECK(code_of(unknown) == ErrorCode::kUnknownAlgorithm);
    CHECK(code_of(wrong_step) == ErrorCode::kUnknownAlgorithm);
    CHECK(code_of(short_path) == ErrorCode::kUnknownAlgorithm);
    CHECK_THROWS_AS(PipelinePath(spec, {0, 2}), Error);
  }

  TEST_CASE("decode after encode is the identity on 50 random paths") {
    const auto spec = testing::four_step_spec();
    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
      const auto path = sample_random_path(spec, rng);
      const auto ids = decode_path(spec, path);
      CHECK(encode_path(spec, ids) == path);
    }
  }

  TEST_CASE("one-hot block layout and bit sums") {
    const auto spec = testing::four_step_spec();
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
      const auto path = sample_random_path(spec, rng);
      const auto& bits = path.onehot();
      std::size_t total = 0;
      for (auto b : bits) total += b;
      CHECK(total == 4);
      std::size_t offset = 0;
      for (std::size_t k = 0; k < 4; ++k) {
        CHECK(spec.block_offset(k) == offset);
        std::size_t in_block = 0;
        for (std::size_t j = offset; j < offset + spec.step_size(k); ++j) in_block += bits[j];
        CHECK(in_block == 1);
        CHECK(bits[path.bit(k)] == 1);
        offset += spec.step_size(k);
      }
      CHECK(path_from_onehot(spec, bits) == path);
    }
  }

  TEST_CASE("path_from_onehot rejects invalid encodings") {
    const auto spec = testing::fig2_spec();
    const std::vector<std::uint8_t> two_in_block = {1, 1, 0, 0, 1};
    const std::vector<std::uint8_t> missing_edge = {1, 0, 0, 0, 1};
    const std::vector<std::uint8_t> wrong_length = {1, 0, 1, 0};
    CHECK_FALSE(path_from_onehot(spec, two_in_block).has_value());
    CHECK_FALSE(path_from_onehot(spec, missing_edge).has_value());
    CHECK_FALSE(path_from_onehot(spec, wrong_length).has_value());
  }

  TEST_CASE("spec validation") {
    using E = EdgeList;
    CHECK_THROWS_AS(make_spec({}), Error);
    CHECK_THROWS_AS(make_spec({{}}), Error);
    CHECK_THROWS_AS(make_spec({{{"a"}, {"a"}}}), Error);
    // edge inside one step
    CHECK_THROWS_AS(make_spec({{{"a"}, {"b"}}, {{"c"}}}, E{{"a", "b"}, {"a", "c"}, {"b", "c"}}), Error);
    // edge skipping a step
    CHECK_THROWS_AS(make_spec({{{"a"}}, {{"b"}}, {{"c"}}}, E{{"a", "b"}, {"b", "c"}, {"a", "c"}}), Error);
    // algorithm "b" on no complete path
    CHECK_THROWS_AS(make_spec({{{"a"}, {"b"}}, {{"c"}}}, E{{"a", "c"}}), Error);
    // bad hyperparameters
    CHECK_THROWS_AS(make_spec({{{"a", {testing::continuous("x", 1.0, 1.0)}}}}), Error);
    CHECK_THROWS_AS(make_spec({{{"a", {testing::continuous("x", 0.0, 1.0, ParamScale::kLog)}}}}), Error);
    CHECK_THROWS_AS(make_spec({{{"a", {testing::continuous("x", 0.0, 1.0), testing::continuous("x", 0.0, 2.0)}}}}), Error);
    CHECK_THROWS_AS(make_spec({{{"a", {testing::categorical("x", {})}}}}), Error);
    auto off_default = testing::continuous("x", 0.0, 1.0);
    off_default.default_value = 2.0;
    CHECK_THROWS_AS(make_spec({{{"a", {off_default}}}}), Error);
    try {
      make_spec({{{"a"}, {"a"}}});
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kInvalidSpec);
    }
  }

  TEST_CASE("sampling is deterministic and returns the only path of a 1-path spec") {
    const auto spec = testing::grid_spec({1, 1, 1});
    CHECK(sample_random_path(spec, 99).choices() == std::vector<std::size_t>{0, 0, 0});
    const auto big = testing::four_step_spec();
    for (std::uint64_t s = 0; s < 20; ++s) {
      CHECK(sample_random_path(big, s) == sample_random_path(big, s));
      const auto p = sample_random_path(big, s);
      CHECK(sample_random_hyperparams(big, p, s) == sample_random_hyperparams(big, p, s));
    }
  }

  TEST_CASE("random paths are uniform over the 6-path toy spec (chi-square)") {
    const auto spec = testing::grid_spec({2, 3});
    Rng rng(2024);
    std::map<std::vector<std::size_t>, int> counts;
    const int n = 10000;
    for (int i = 0; i < n; ++i) ++counts[sample_random_path(spec, rng).choices()];
    REQUIRE(counts.size() == 6);
    double chi2 = 0.0;
    const double expected = n / 6.0;
    const double sigma = std::sqrt(n * (1.0 / 6.0) * (5.0 / 6.0));
    for (const auto& [path, c] : counts) {
      chi2 += (c - expected) * (c - expected) / expected;
      CHECK(std::abs(c - expected) <= 3 * sigma);
    }
    CHECK(chi2 < 20.52);  // 0.999 quantile at 5 degrees of freedom
  }

  TEST_CASE("random paths are uniform over a spec with missing edges") {
    const auto spec = testing::fig2_spec();
    Rng rng(7);
    std::map<std::vector<std::size_t>, int> counts;
    const int n = 10000;
    for (int i = 0; i < n; ++i) ++counts[sample_random_path(spec, rng).choices()];
    REQUIRE(counts.size() == 5);
    double chi2 = 0.0;
    for (const auto& [path, c] : counts) chi2 += (c - n / 5.0) * (c - n / 5.0) / (n / 5.0);
    CHECK(chi2 < 18.47);  // 0.999 quantile at 4 degrees of freedom
  }

  TEST_CASE("distinct path sampling") {
    const auto spec = testing::four_step_spec();
    Rng rng(3);
    const auto paths = sample_distinct_paths(spec, 200, rng);
    CHECK(paths.size() == 200);
    CHECK(std::set<PipelinePath>(paths.begin(), paths.end()).size() == 200);
    CHECK(std::is_sorted(paths.begin(), paths.end()));
    Rng rng2(3);
    CHECK(sample_distinct_paths(testing::grid_spec({2, 3}), 100, rng2).size() == 6);
  }

  TEST_CASE("zero-hyperparameter path gives an assignment with no values") {
    const auto spec = testing::grid_spec({2, 2});
    const auto hp = sample_random_hyperparams(spec, PipelinePath(spec, {0, 1}), 1);
    CHECK(hp.size() == 0);
    CHECK(validate_assignment(spec, PipelinePath(spec, {0, 1}), hp));
  }

  TEST_CASE("log-scaled sampling stays in bounds and is uniform in log10") {
    const auto hp = testing::continuous("alpha", 1e-4, 1.0, ParamScale::kLog);
    Rng rng(8);
    double sum = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      const double v = std::get<double>(sample_hyperparam(hp, rng));
      CHECK(v >= 1e-4);
      CHECK(v <= 1.0);
      sum += std::log10(v);
    }
    CHECK(std::abs(sum / n + 2.0) < 0.05);
  }

  TEST_CASE("integer and categorical sampling cover their domains uniformly") {
    Rng rng(4);
    const auto ih = testing::integer("k", 1, 10);
    const auto ch = testing::categorical("c", {std::string("a"), std::string("b"), true});
    std::map<std::int64_t, int> ints;
    std::map<std::size_t, int> cats;
    for (int i = 0; i < 10000; ++i) {
      const auto v = sample_hyperparam(ih, rng);
      REQUIRE(std::holds_alternative<std::int64_t>(v));
      ++ints[std::get<std::int64_t>(v)];
      ++cats[*ch.choice_index(sample_hyperparam(ch, rng))];
    }
    CHECK(ints.size() == 10);
    CHECK(ints.begin()->first == 1);
    CHECK(ints.rbegin()->first == 10);
    for (const auto& [v, c] : ints) CHECK(std::abs(c - 1000) < 150);
    for (const auto& [v, c] : cats) CHECK(std::abs(c - 3333) < 220);
  }

  TEST_CASE("random assignments validate and cover exactly the path") {
    const auto spec = testing::four_step_spec();
    Rng rng(21);
    for (int i = 0; i < 100; ++i) {
      const auto path = sample_random_path(spec, rng);
      const auto hp = sample_random_hyperparams(spec, path, rng);
      CHECK(validate_assignment(spec, path, hp));
      CHECK(hp.values().size() == 4);
      for (const auto& id : decode_path(spec, path)) CHECK(hp.params_for(id) != nullptr);
    }
  }

  TEST_CASE("validate_assignment rejects off-path, missing and out-of-domain values") {
    const auto spec = testing::toy_spec();
    const PipelinePath path(spec, {0, 1});  // scale, knn
    auto good = sample_random_hyperparams(spec, path, 3);
    REQUIRE(validate_assignment(spec, path, good));

    auto off_path = good;
    off_path.set("tree", "depth", 2.0);
    CHECK_FALSE(validate_assignment(spec, path, off_path));

    auto out_of_range = good;
    out_of_range.set("scale", "factor", 5.0);
    CHECK_FALSE(validate_assignment(spec, path, out_of_range));

    auto fractional = good;
    fractional.set("knn", "k", 2.5);
    CHECK_FALSE(validate_assignment(spec, path, fractional));

    HyperparamAssignment missing;
    missing.set("scale", "factor", 1.0);
    missing.add_algorithm("knn");
    CHECK_FALSE(validate_assignment(spec, path, missing));

    auto unknown_name = good;
    unknown_name.set("knn", "weights", std::string("uniform"));
    CHECK_FALSE(validate_assignment(spec, path, unknown_name));
  }

  TEST_CASE("pruning to all paths returns the original spec") {
    for (const auto& spec : {testing::fig2_spec(), testing::grid_spec({2, 3}), testing::toy_spec()}) {
      const auto all = enumerate_paths(spec);
      CHECK(prune_to_subgraph(spec, all) == spec);
    }
  }

  TEST_CASE("pruning to one path gives a chain") {
    const auto spec = testing::four_step_spec();
    const auto path = sample_random_path(spec, 17);
    const std::vector<PipelinePath> one = {path};
    const auto chain = prune_to_subgraph(spec, one);
    CHECK(chain.num_algorithms() == 4);
    CHECK(chain.path_count() == 1.0);
    CHECK(chain.edges().size() == 3);
    const auto translated = translate_path(spec, path, chain);
    REQUIRE(translated.has_value());
    CHECK(decode_path(chain, *translated) == decode_path(spec, path));
    // hyperparameter specs carry over
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(chain.algorithm(k, 0) == spec.algorithm(k, path.choices()[k]));
    }
  }

  TEST_CASE("pruning two paths with a shared first algorithm matches the set union") {
    const auto spec = testing::fig2_spec();
    const std::vector<std::string> a = {"v1_2", "v2_1"};
    const std::vector<std::string> b = {"v1_2", "v2_3"};
    const std::vector<PipelinePath> paths = {encode_path(spec, a), encode_path(spec, b)};
    const auto sub = prune_to_subgraph(spec, paths);

    std::set<std::string> nodes;
    std::set<std::pair<std::string, std::string>> edges;
    for (const auto* ids : {&a, &b}) {
      nodes.insert(ids->begin(), ids->end());
      edges.insert({(*ids)[0], (*ids)[1]});
    }
    CHECK(sub.step_size(0) == 1);
    CHECK(sub.step_size(1) == 2);
    const auto sub_edges = sub.edges();
    CHECK(std::set<std::pair<std::string, std::string>>(sub_edges.begin(), sub_edges.end()) == edges);
    std::set<std::string> sub_nodes;
    for (const auto& step : sub.steps()) {
      for (const auto& alg : step.algorithms) sub_nodes.insert(alg.id);
    }
    CHECK(sub_nodes == nodes);
    for (const auto& p : paths) CHECK(translate_path(spec, p, sub).has_value());
  }

  TEST_CASE("pruning keeps given paths valid, is idempotent, and may admit cross paths") {
    const auto spec = testing::four_step_spec();
    Rng rng(9);
    const auto picks = sample_distinct_paths(spec, 10, rng);
    const auto sub = prune_to_subgraph(spec, picks);
    for (const auto& p : picks) CHECK(translate_path(spec, p, sub).has_value());
    CHECK(sub.path_count() >= 10.0);
    const auto sub_paths = enumerate_paths(sub);
    CHECK(prune_to_subgraph(sub, sub_paths) == sub);
  }

  TEST_CASE("pruning an empty set fails") {
    const auto spec = testing::fig2_spec();
    const std::vector<PipelinePath> none;
    try {
      prune_to_subgraph(spec, none);
      FAIL("expected EmptyPathSet");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kEmptyPathSet);
    }
  }

  TEST_CASE("model-space mapping for log-scaled dimensions") {
    const auto hp = testing::continuous("c", 1e-3, 10.0, ParamScale::kLog);
    CHECK(hp.model_lo() == doctest::Approx(-3.0));
    CHECK(hp.model_hi() == doctest::Approx(1.0));
    CHECK(hp.from_model(hp.to_model(0.25)) == doctest::Approx(0.25));
    CHECK(numeric_value(ParamValue(std::int64_t{3})) == 3.0);
    CHECK_FALSE(numeric_value(ParamValue(std::string("x"))).has_value());
  }
}
