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

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "flash/pipeline_graph.hpp"

namespace flash {

// Pipeline spec documents:
//   {"name": ..., "steps": [{"index": 1, "algorithms": [{"id": ..., "hyperparams": [
//       {"name": ..., "kind": "continuous|integer|categorical",
//        "bounds": [lo, hi] | "choices": [...], "scale": "linear|log", "default": v}]}]}],
//    "edges": [[from_id, to_id], ...]}          // optional; omitted = fully connected
// Malformed documents raise Error(kConfigParse); structural violations
// raise Error(kInvalidSpec).
PipelineSpec parse_spec(const nlohmann::json& doc);
PipelineSpec parse_spec(std::string_view text);
PipelineSpec load_spec_file(const std::filesystem::path& path);

nlohmann::json spec_to_json(const PipelineSpec& spec);

// Hex digest of the canonical JSON dump of the spec.
std::string spec_digest(const PipelineSpec& spec);

nlohmann::json param_to_json(const ParamValue& value);
ParamValue param_from_json(const nlohmann::json& value);

// {"alg": {"param": value}} with keys in lexicographic order.
nlohmann::json assignment_to_json(const HyperparamAssignment& assignment);
HyperparamAssignment assignment_from_json(const nlohmann::json& doc);

// Compact canonical text form; floats use shortest round-trip notation.
std::string canonical_json(const nlohmann::json& doc);

}  // namespace flash
