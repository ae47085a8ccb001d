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

#include "flash/spec_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "flash/digest.hpp"
#include "flash/error.hpp"

namespace flash {

namespace {

using nlohmann::json;

[[noreturn]] void parse_error(const std::string& message) {
  throw Error(ErrorCode::kConfigParse, "spec: " + message);
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) parse_error(where + ": missing '" + key + "'");
  return *it;
}

ParamKind parse_kind(const std::string& text, const std::string& where) {
  if (text == "continuous") return ParamKind::kContinuous;
  if (text == "integer") return ParamKind::kInteger;
  if (text == "categorical") return ParamKind::kCategorical;
  parse_error(where + ": unknown kind '" + text + "'");
}

const char* kind_name(ParamKind kind) {
  switch (kind) {
    case ParamKind::kContinuous: return "continuous";
    case ParamKind::kInteger: return "integer";
    case ParamKind::kCategorical: return "categorical";
  }
  return "continuous";
}

HyperparamSpec parse_hyperparam(const json& doc, const std::string& algorithm) {
  if (!doc.is_object()) parse_error(algorithm + ": hyperparameter entries must be objects");
  HyperparamSpec hp;
  hp.name = require(doc, "name", algorithm).get<std::string>();
  const std::string where = algorithm + "." + hp.name;
  hp.kind = parse_kind(require(doc, "kind", where).get<std::string>(), where);
  if (auto it = doc.find("scale"); it != doc.end()) {
    const auto scale = it->get<std::string>();
    if (scale == "log") {
      hp.scale = ParamScale::kLog;
    } else if (scale != "linear") {
      parse_error(where + ": unknown scale '" + scale + "'");
    }
  }
  if (hp.is_numeric()) {
    const json& bounds = require(doc, "bounds", where);
    if (!bounds.is_array() || bounds.size() != 2 || !bounds[0].is_number() ||
        !bounds[1].is_number()) {
      parse_error(where + ": bounds must be [lo, hi]");
    }
    hp.lo = bounds[0].get<double>();
    hp.hi = bounds[1].get<double>();
  } else {
    const json& choices = require(doc, "choices", where);
    if (!choices.is_array()) parse_error(where + ": choices must be an array");
    for (const auto& c : choices) hp.choices.push_back(param_from_json(c));
  }

  if (auto it = doc.find("default"); it != doc.end()) {
    hp.default_value = param_from_json(*it);
  } else if (hp.kind == ParamKind::kCategorical) {
    if (!hp.choices.empty()) hp.default_value = hp.choices.front();
  } else {
    double mid = hp.scale == ParamScale::kLog && hp.lo > 0.0 ? std::sqrt(hp.lo * hp.hi)
                                                             : 0.5 * (hp.lo + hp.hi);
    hp.default_value = mid;
  }
  if (hp.kind == ParamKind::kInteger) {
    if (auto v = numeric_value(hp.default_value)) {
      hp.default_value = static_cast<std::int64_t>(std::llround(std::clamp(*v, hp.lo, hp.hi)));
      if (doc.contains("default") && std::round(*v) != *v) {
        parse_error(where + ": integer default must be integral");
      }
    }
  }
  return hp;
}

void write_canonical(const json& doc, std::string& out) {
  switch (doc.type()) {
    case json::value_t::object: {
      out += '{';
      bool first = true;
      for (const auto& [key, value] : doc.items()) {
        if (!first) out += ',';
        first = false;
        out += json(key).dump();
        out += ':';
        write_canonical(value, out);
      }
      out += '}';
      break;
    }
    case json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < doc.size(); ++i) {
        if (i > 0) out += ',';
        write_canonical(doc[i], out);
      }
      out += ']';
      break;
    }
    case json::value_t::number_float:
      out += canonical_double(doc.get<double>());
      break;
    default:
      out += doc.dump();
  }
}

}  // namespace

nlohmann::json param_to_json(const ParamValue& value) {
  return std::visit([](const auto& v) { return json(v); }, value);
}

ParamValue param_from_json(const nlohmann::json& value) {
  switch (value.type()) {
    case json::value_t::boolean: return value.get<bool>();
    case json::value_t::number_integer:
    case json::value_t::number_unsigned: return value.get<std::int64_t>();
    case json::value_t::number_float: return value.get<double>();
    case json::value_t::string: return value.get<std::string>();
    default: parse_error("hyperparameter values must be booleans, numbers or strings");
  }
}

PipelineSpec parse_spec(const nlohmann::json& doc) {
  try {
    if (!doc.is_object()) parse_error("document must be an object");
    std::string name = require(doc, "name", "spec").get<std::string>();
    const json& steps_doc = require(doc, "steps", "spec");
    if (!steps_doc.is_array()) parse_error("'steps' must be an array");

    std::vector<Step> steps;
    for (const auto& step_doc : steps_doc) {
      Step step;
      const auto index = require(step_doc, "index", "step").get<std::int64_t>();
      if (index < 1) parse_error("step index must be >= 1");
      step.index = static_cast<std::size_t>(index);
      const json& algos = require(step_doc, "algorithms", "step " + std::to_string(index));
      if (!algos.is_array()) parse_error("'algorithms' must be an array");
      for (const auto& algo_doc : algos) {
        AlgorithmSpec algo;
        algo.id = require(algo_doc, "id", "algorithm").get<std::string>();
        algo.step = step.index;
        if (auto it = algo_doc.find("hyperparams"); it != algo_doc.end()) {
          if (!it->is_array()) parse_error(algo.id + ": 'hyperparams' must be an array");
          for (const auto& hp_doc : *it) algo.hyperparams.push_back(parse_hyperparam(hp_doc, algo.id));
        }
        step.algorithms.push_back(std::move(algo));
      }
      steps.push_back(std::move(step));
    }
    std::stable_sort(steps.begin(), steps.end(),
                     [](const Step& a, const Step& b) { return a.index < b.index; });

    std::optional<EdgeList> edges;
    if (auto it = doc.find("edges"); it != doc.end()) {
      if (!it->is_array()) parse_error("'edges' must be an array");
      edges.emplace();
      for (const auto& e : *it) {
        if (!e.is_array() || e.size() != 2) parse_error("edges must be [from_id, to_id] pairs");
        edges->emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
      }
    }
    return PipelineSpec(std::move(name), std::move(steps), std::move(edges));
  } catch (const json::exception& e) {
    parse_error(e.what());
  }
}

PipelineSpec parse_spec(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    parse_error(e.what());
  }
  return parse_spec(doc);
}

PipelineSpec load_spec_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open spec file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_spec(std::string_view(buf.str()));
}

nlohmann::json spec_to_json(const PipelineSpec& spec) {
  json steps = json::array();
  for (const auto& step : spec.steps()) {
    json algos = json::array();
    for (const auto& algo : step.algorithms) {
      json hps = json::array();
      for (const auto& hp : algo.hyperparams) {
        json h = {{"name", hp.name},
                  {"kind", kind_name(hp.kind)},
                  {"scale", hp.scale == ParamScale::kLog ? "log" : "linear"},
                  {"default", param_to_json(hp.default_value)}};
        if (hp.is_numeric()) {
          h["bounds"] = {hp.lo, hp.hi};
        } else {
          json choices = json::array();
          for (const auto& c : hp.choices) choices.push_back(param_to_json(c));
          h["choices"] = std::move(choices);
        }
        hps.push_back(std::move(h));
      }
      algos.push_back({{"id", algo.id}, {"hyperparams", std::move(hps)}});
    }
    steps.push_back({{"index", step.index}, {"algorithms", std::move(algos)}});
  }
  json edges = json::array();
  for (const auto& [from, to] : spec.edges()) edges.push_back({from, to});
  return {{"name", spec.name()}, {"steps", std::move(steps)}, {"edges", std::move(edges)}};
}

std::string spec_digest(const PipelineSpec& spec) {
  return digest_bytes(canonical_json(spec_to_json(spec))).hex();
}

nlohmann::json assignment_to_json(const HyperparamAssignment& assignment) {
  json out = json::object();
  for (const auto& [algo, params] : assignment.values()) {
    json p = json::object();
    for (const auto& [name, value] : params) p[name] = param_to_json(value);
    out[algo] = std::move(p);
  }
  return out;
}

HyperparamAssignment assignment_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::kConfigParse, "assignment must be an object");
  HyperparamAssignment out;
  for (const auto& [algo, params] : doc.items()) {
    if (!params.is_object()) {
      throw Error(ErrorCode::kConfigParse, "assignment for '" + algo + "' must be an object");
    }
    out.add_algorithm(algo);
    for (const auto& [name, value] : params.items()) out.set(algo, name, param_from_json(value));
  }
  return out;
}

std::string canonical_json(const nlohmann::json& doc) {
  std::string out;
  write_canonical(doc, out);
  return out;
}

}  // namespace flash
