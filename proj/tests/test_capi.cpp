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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "flash/flash.h"

namespace {

const char* kToySpec = R"({"name": "toy", "steps": [
  {"index": 1, "algorithms": [
    {"id": "scale", "hyperparams": [{"name": "f", "kind": "continuous", "bounds": [0.5, 2]}]},
    {"id": "none", "hyperparams": []}]},
  {"index": 2, "algorithms": [
    {"id": "svm", "hyperparams": [{"name": "c", "kind": "continuous", "bounds": [0.001, 10], "scale": "log"}]},
    {"id": "knn", "hyperparams": [{"name": "k", "kind": "integer", "bounds": [1, 10]}]},
    {"id": "tree", "hyperparams": []}]}]})";

struct Spec {
  flash_spec* p = nullptr;
  ~Spec() { flash_spec_free(p); }
};
struct Config {
  flash_config* p = nullptr;
  Config() { REQUIRE(flash_config_create(&p) == FLASH_OK); }
  ~Config() { flash_config_free(p); }
  void set(const char* k, const char* v) { REQUIRE(flash_config_set(p, k, v) == FLASH_OK); }
};
struct Outcome {
  flash_outcome* p = nullptr;
  ~Outcome() { flash_outcome_free(p); }
};

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() /
          ("flash_capi_" + name + "_" + std::to_string(::getpid())))
      .string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void small_budget(Config& c) {
  c.set("t_init", "5");
  c.set("t_prune", "5");
  c.set("t_total", "60");
  c.set("top_r", "2");
}

}  // namespace

TEST_CASE("status names and the last error") {
  CHECK(std::string(flash_status_name(FLASH_OK)) == "ok");
  CHECK(std::string(flash_status_name(FLASH_ERR_CONFIG_PARSE)).size() > 0);
  CHECK(std::string(flash_status_name(static_cast<flash_status>(99))).size() > 0);
  CHECK(flash_last_error() != nullptr);
}

TEST_CASE("specs load from text and file") {
  Spec s;
  REQUIRE(flash_spec_load_json(kToySpec, &s.p) == FLASH_OK);
  CHECK(flash_spec_num_steps(s.p) == 2);
  CHECK(flash_spec_num_algorithms(s.p) == 5);
  CHECK(flash_spec_path_count(s.p) == 6.0);

  Spec f;
  REQUIRE(flash_spec_load_file(FLASH_DATA_DIR "/four_step_classification.json", &f.p) == FLASH_OK);
  CHECK(flash_spec_path_count(f.p) == 1456.0);
}

TEST_CASE("spec failures map onto status codes") {
  flash_spec* s = nullptr;
  CHECK(flash_spec_load_json("{", &s) == FLASH_ERR_CONFIG_PARSE);
  CHECK(s == nullptr);
  CHECK(std::string(flash_last_error()).size() > 0);
  CHECK(flash_spec_load_json(R"({"name": "x", "steps": [{"index": 1, "algorithms": []}]})", &s) ==
        FLASH_ERR_INVALID_SPEC);
  CHECK(flash_spec_load_file("/nonexistent.json", &s) == FLASH_ERR_IO);
  CHECK(flash_spec_load_json(nullptr, &s) == FLASH_ERR_INVALID_ARGUMENT);
  CHECK(flash_spec_load_json(kToySpec, nullptr) == FLASH_ERR_INVALID_ARGUMENT);
}

TEST_CASE("configuration keys are validated") {
  Config c;
  CHECK(flash_config_set(c.p, "t_init", "30s") == FLASH_OK);
  CHECK(flash_config_set(c.p, "seed", "18446744073709551615") == FLASH_OK);
  CHECK(flash_config_set(c.p, "no_such_key", "1") == FLASH_ERR_CONFIG_PARSE);
  CHECK(flash_config_set(c.p, "top_r", "three") == FLASH_ERR_CONFIG_PARSE);
  CHECK(flash_config_set(c.p, "t_total", "12abc") == FLASH_ERR_CONFIG_PARSE);
  CHECK(flash_config_set(c.p, "t_prune", "0") == FLASH_ERR_CONFIG_PARSE);
  CHECK(flash_config_set(c.p, nullptr, "1") == FLASH_ERR_INVALID_ARGUMENT);
  CHECK(flash_config_set_executor(c.p, "synthetic") == FLASH_OK);
  CHECK(flash_config_set_executor(c.p, "ssh:host") == FLASH_ERR_CONFIG_PARSE);
  CHECK(flash_config_set_executor(c.p, "subprocess:") == FLASH_ERR_CONFIG_PARSE);
}

TEST_CASE("out-of-range values surface when the run starts") {
  Spec s;
  REQUIRE(flash_spec_load_json(kToySpec, &s.p) == FLASH_OK);
  Config c;
  c.set("top_r", "0");
  Outcome o;
  CHECK(flash_run(s.p, c.p, nullptr, &o.p) == FLASH_ERR_CONFIG_PARSE);
  CHECK(o.p == nullptr);
}

TEST_CASE("a synthetic run produces an outcome and a trace") {
  Spec s;
  REQUIRE(flash_spec_load_json(kToySpec, &s.p) == FLASH_OK);
  Config c;
  small_budget(c);
  c.set("seed", "3");
  const auto trace = temp_path("trace.csv");
  Outcome o;
  REQUIRE(flash_run(s.p, c.p, trace.c_str(), &o.p) == FLASH_OK);
  CHECK(std::isfinite(flash_outcome_best_metric(o.p)));
  const std::string path = flash_outcome_best_path(o.p);
  CHECK(path.find('-') != std::string::npos);
  CHECK(std::string(flash_outcome_best_hyperparams_json(o.p)).front() == '{');
  CHECK(flash_outcome_trace_rows(o.p) > 10);
  CHECK(flash_outcome_top_path_count(o.p) == 2);
  CHECK(flash_outcome_top_path(o.p, 0) != nullptr);
  CHECK(flash_outcome_top_path(o.p, 2) == nullptr);

  const auto text = slurp(trace);
  CHECK(text.starts_with("iter,phase,wall_clock_s,path,hyperparams_json,metric,cost_s,best_so_far,"
                         "cache_hits,cache_misses\n"));
  std::size_t lines = 0;
  for (char ch : text) lines += ch == '\n';
  CHECK(lines == flash_outcome_trace_rows(o.p) + 1);

  // same seed, same bytes
  const auto again = temp_path("again.csv");
  Outcome o2;
  REQUIRE(flash_run(s.p, c.p, again.c_str(), &o2.p) == FLASH_OK);
  CHECK(slurp(again) == text);

  char* summary = nullptr;
  const auto csv = temp_path("series.csv");
  REQUIRE(flash_report(trace.c_str(), csv.c_str(), &summary) == FLASH_OK);
  CHECK(std::string(summary).find("hit rate") != std::string::npos);
  flash_string_free(summary);
  CHECK(slurp(csv).starts_with("iter,wall_clock_s,metric,best_so_far\n"));
  for (const auto& p : {trace, again, csv}) std::filesystem::remove(p);
}

TEST_CASE("random search and report errors") {
  Spec s;
  REQUIRE(flash_spec_load_json(kToySpec, &s.p) == FLASH_OK);
  Config c;
  c.set("t_total", "30");
  Outcome o;
  REQUIRE(flash_random_search(s.p, c.p, nullptr, &o.p) == FLASH_OK);
  CHECK(flash_outcome_top_path_count(o.p) == 0);
  CHECK(flash_outcome_trace_rows(o.p) > 0);

  char* summary = nullptr;
  CHECK(flash_report("/nonexistent.csv", nullptr, &summary) == FLASH_ERR_IO);
  CHECK(summary == nullptr);
  const auto bad = temp_path("bad.csv");
  std::ofstream(bad) << "not,a,trace\n";
  CHECK(flash_report(bad.c_str(), nullptr, &summary) == FLASH_ERR_TRACE_PARSE);
  std::filesystem::remove(bad);
}

TEST_CASE("a requested interrupt stops the run") {
  Spec s;
  REQUIRE(flash_spec_load_json(kToySpec, &s.p) == FLASH_OK);
  Config c;
  small_budget(c);
  flash_request_interrupt();
  Outcome o;
  CHECK(flash_run(s.p, c.p, nullptr, &o.p) == FLASH_ERR_INTERRUPTED);
  flash_clear_interrupt();
  CHECK(flash_run(s.p, c.p, nullptr, &o.p) == FLASH_OK);
}

TEST_CASE("subprocess executors run through the worker protocol") {
  Spec s;
  REQUIRE(flash_spec_load_json(kToySpec, &s.p) == FLASH_OK);
  Config c;
  small_budget(c);
  const std::string good = std::string("subprocess:") + FLASH_MOCK_WORKER + " toy";
  REQUIRE(flash_config_set_executor(c.p, good.c_str()) == FLASH_OK);
  Outcome o;
  REQUIRE(flash_run(s.p, c.p, nullptr, &o.p) == FLASH_OK);
  CHECK(flash_outcome_trace_rows(o.p) > 10);

  const std::string bad = std::string("subprocess:") + FLASH_MOCK_WORKER + " bad_hello";
  REQUIRE(flash_config_set_executor(c.p, bad.c_str()) == FLASH_OK);
  Outcome o2;
  CHECK(flash_run(s.p, c.p, nullptr, &o2.p) == FLASH_ERR_HANDSHAKE);
  const std::string garbage = std::string("subprocess:") + FLASH_MOCK_WORKER + " garbage";
  REQUIRE(flash_config_set_executor(c.p, garbage.c_str()) == FLASH_OK);
  CHECK(flash_run(s.p, c.p, nullptr, &o2.p) == FLASH_ERR_PROTOCOL);
}
