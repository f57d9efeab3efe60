/*
 * Copyright 2026 The mjpgibbs Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace mjp {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user input: model files, policies, chain settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Structurally invalid trajectory, rate table or evidence.
class ModelError : public Error {
 public:
  using Error::Error;
};

// The augmentation intensity is below the exit rate of a visited state.
class PolicyViolation : public ModelError {
 public:
  using ModelError::ModelError;
};

// The operation needs a finite, tabulated state space.
class UnsupportedModel : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Failures that can only happen while sampling: weight collapse,
// runaway jump counts.
class SamplingError : public Error {
 public:
  using Error::Error;
};

template <class State>
std::string describe_state(const State& s) {
  std::ostringstream os;
  os << s;
  return os.str();
}

}  // namespace mjp
