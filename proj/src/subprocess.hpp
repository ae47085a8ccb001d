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

#include <sys/types.h>

#include <chrono>
#include <optional>
#include <string>

namespace flash::detail {

// A child process running `/bin/sh -c command` with its stdin and stdout
// connected to pipes. stderr is inherited. Killed and reaped on destruction.
class Subprocess {
 public:
  explicit Subprocess(const std::string& command);
  ~Subprocess();

  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;

  // Throws Error(kWorkerExited) if the child closed its stdin.
  void write_line(const std::string& line);

  // Next '\n'-terminated line without the terminator. nullopt on timeout.
  // Throws Error(kWorkerExited) on end of stream.
  std::optional<std::string> read_line(std::chrono::duration<double> timeout);

  // Closes stdin and waits up to `grace` for a clean exit before SIGKILL.
  void shutdown(std::chrono::duration<double> grace);
  void kill();

  bool running() const { return pid_ > 0; }

 private:
  void reap(bool force);

  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

}  // namespace flash::detail
