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

#include <chrono>
#include <cmath>

#include <json.hpp>

#include "flash/executor.hpp"
#include "flash/spec_io.hpp"
#include "subprocess.hpp"

namespace flash {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

// Worker-side datasets are invisible to us; cache accounting uses this size.
constexpr std::uint64_t kNominalHandleBytes = 1u << 20;

class SubprocessExecutor final : public Executor {
 public:
  SubprocessExecutor(std::string command, std::string spec_digest, double handshake_timeout)
      : command_(std::move(command)),
        spec_digest_(std::move(spec_digest)),
        handshake_timeout_(handshake_timeout) {
    start();
  }

  ~SubprocessExecutor() override {
    if (!worker_ || !worker_->running()) return;
    try {
      worker_->write_line(R"({"type":"shutdown"})");
    } catch (const Error&) {
    }
    worker_->shutdown(std::chrono::seconds(2));
  }

  TimeMode time_mode() const override { return time_mode_; }

  bool consume_handle_invalidation() override {
    return std::exchange(handles_invalidated_, false);
  }

  StepOutput run_step(const StepRequest& request) override {
    if (!worker_ || !worker_->running()) start();
    const std::uint64_t req_id = ++next_req_id_;
    json params = json::object();
    for (const auto& [name, value] : request.hyperparams) params[name] = param_to_json(value);
    const json frame = {{"type", "run_step"},
                        {"req_id", req_id},
                        {"step", request.step},
                        {"algorithm", request.algorithm},
                        {"hyperparams", std::move(params)},
                        {"input_handle", request.input.id},
                        {"is_last", request.is_last}};

    const auto started = Clock::now();
    send(frame.dump());
    const double limit = std::max(0.0, request.timeout_seconds);
    std::optional<std::string> line;
    try {
      line = worker_->read_line(std::chrono::duration<double>(limit));
    } catch (const Error&) {
      drop_worker();
      throw;
    }
    const double elapsed = std::chrono::duration<double>(Clock::now() - started).count();
    if (!line) {
      drop_worker();
      throw StepTimeout("worker step exceeded " + std::to_string(limit) + " s", elapsed);
    }

    const json reply = parse_frame(*line);
    const std::string type = field<std::string>(reply, "type");
    if (!reply.contains("req_id") || field<std::uint64_t>(reply, "req_id") != req_id) {
      violation("response req_id does not match request " + std::to_string(req_id));
    }
    if (type == "step_err") {
      auto it = reply.find("message");
      throw StepFailed("worker reported: " +
                       (it != reply.end() && it->is_string() ? it->get<std::string>()
                                                             : std::string("(no message)")));
    }
    if (type != "step_ok") violation("unexpected frame type '" + type + "'");

    StepOutput out;
    out.output = {field<std::string>(reply, "output_handle"), HandleOrigin::kStepOutput,
                  kNominalHandleBytes};
    const double reported = field<double>(reply, "seconds");
    const auto metric = reply.find("metric");
    const bool has_metric = metric != reply.end() && !metric->is_null();
    if (has_metric != request.is_last) {
      violation("metric must be present exactly on the last step");
    }
    if (has_metric) {
      if (!metric->is_number()) violation("metric must be a number");
      out.metric = metric->get<double>();
      if (!std::isfinite(*out.metric)) throw StepFailed("worker returned a non-finite metric");
    }
    if (time_mode_ == TimeMode::kSimulated) {
      if (!(reported >= 0.0)) violation("seconds must be non-negative");
      if (reported > limit) throw StepTimeout("simulated step exceeded its time limit", limit);
      out.seconds = reported;
    } else {
      out.seconds = elapsed;
    }
    return out;
  }

 private:
  void start() {
    worker_ = std::make_unique<detail::Subprocess>(command_);
    try {
      send(json{{"type", "hello"}, {"version", 1}, {"spec_digest", spec_digest_}}.dump());
      auto line = worker_->read_line(std::chrono::duration<double>(handshake_timeout_));
      if (!line) throw Error(ErrorCode::kHandshakeFailure, "worker did not answer hello in time");
      json reply;
      try {
        reply = json::parse(*line);
      } catch (const json::exception&) {
        throw Error(ErrorCode::kHandshakeFailure, "malformed hello reply: " + *line);
      }
      if (!reply.is_object() || reply.value("type", "") != "hello_ok") {
        throw Error(ErrorCode::kHandshakeFailure, "expected hello_ok, got: " + *line);
      }
      const std::string mode = reply.value("time_mode", "");
      if (mode == "wall") {
        time_mode_ = TimeMode::kWall;
      } else if (mode == "simulated") {
        time_mode_ = TimeMode::kSimulated;
      } else {
        throw Error(ErrorCode::kHandshakeFailure, "unknown time_mode '" + mode + "'");
      }
    } catch (const Error& e) {
      drop_worker();
      if (e.code() == ErrorCode::kHandshakeFailure) throw;
      throw Error(ErrorCode::kHandshakeFailure, e.what());
    }
  }

  void send(const std::string& line) {
    try {
      worker_->write_line(line);
    } catch (const Error&) {
      drop_worker();
      throw;
    }
  }

  json parse_frame(const std::string& line) {
    try {
      json doc = json::parse(line);
      if (!doc.is_object()) violation("frame is not a JSON object");
      return doc;
    } catch (const json::exception&) {
      violation("malformed frame: " + line);
    }
  }

  template <typename T>
  T field(const json& doc, const char* key) {
    auto it = doc.find(key);
    if (it == doc.end()) violation(std::string("missing field '") + key + "'");
    try {
      return it->get<T>();
    } catch (const json::exception&) {
      violation(std::string("field '") + key + "' has the wrong type");
    }
  }

  // Killing the worker loses every handle it issued.
  void drop_worker() {
    worker_.reset();
    handles_invalidated_ = true;
  }

  [[noreturn]] void violation(const std::string& message) {
    drop_worker();
    throw Error(ErrorCode::kProtocolViolation, message);
  }

  std::string command_;
  std::string spec_digest_;
  double handshake_timeout_;
  std::unique_ptr<detail::Subprocess> worker_;
  TimeMode time_mode_ = TimeMode::kWall;
  std::uint64_t next_req_id_ = 0;
  bool handles_invalidated_ = false;
};

}  // namespace

std::unique_ptr<Executor> spawn_external(const std::string& command_line,
                                         const PipelineSpec& spec,
                                         double handshake_timeout_seconds) {
  return std::make_unique<SubprocessExecutor>(command_line, spec_digest(spec),
                                              handshake_timeout_seconds);
}

}  // namespace flash
