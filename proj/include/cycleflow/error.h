// Copyright 2026 The CycleFlow Authors
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

#ifndef CYCLEFLOW_ERROR_H_
#define CYCLEFLOW_ERROR_H_

#include <stdexcept>
#include <string>

namespace cycleflow {

// Error categories map one-to-one onto CLI exit codes (see tools/).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad dimensions, inconsistent layouts, invalid config values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Out-of-domain argument to a pure function.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or version-mismatched files.
class IoError : public Error {
 public:
  using Error::Error;
};

// Dataset content violating a regime invariant, failed demo generation.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss/gradient during optimization.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Non-finite state while integrating a sampler.
class SamplingError : public Error {
 public:
  using Error::Error;
};

}  // namespace cycleflow

#endif  // CYCLEFLOW_ERROR_H_
