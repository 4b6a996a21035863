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

// Small helpers shared by the unit tests.

#ifndef CYCLEFLOW_TESTS_TEST_UTIL_H_
#define CYCLEFLOW_TESTS_TEST_UTIL_H_

#include <filesystem>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "cycleflow/flowmatch.h"
#include "cycleflow/traj.h"

namespace cycleflow::testing {

// Fresh directory removed on destruction.
class ScratchDir {
 public:
  ScratchDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = "cycleflow_test";
    if (info) name += std::string("_") + info->test_suite_name() + "_" + info->name();
    path_ = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

// v(o, x, tau) = c for every input.
class ConstantField : public VelocityField {
 public:
  explicit ConstantField(Matrix c) : c_(std::move(c)) {}
  Matrix velocity(const Observation&, const Matrix&, double) const override {
    ++calls;
    return c_;
  }
  int horizon() const override { return static_cast<int>(c_.rows()); }
  int action_dim() const override { return static_cast<int>(c_.cols()); }
  mutable int calls = 0;

 private:
  Matrix c_;
};

// Conditional/unconditional stub: returns `cond` unless the instruction is
// the null token.
class TwoBranchField : public VelocityField {
 public:
  TwoBranchField(Matrix cond, Matrix uncond)
      : cond_(std::move(cond)), uncond_(std::move(uncond)) {}
  Matrix velocity(const Observation& o, const Matrix&, double) const override {
    ++calls;
    return o.instruction.is_null() ? uncond_ : cond_;
  }
  int horizon() const override { return static_cast<int>(cond_.rows()); }
  int action_dim() const override { return static_cast<int>(cond_.cols()); }
  mutable int calls = 0;

 private:
  Matrix cond_, uncond_;
};

inline Matrix random_matrix(int r, int c, std::mt19937_64& rng,
                            double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = g(rng);
  return m;
}

inline Observation simple_obs(int state_dim, int task = 0) {
  Observation o;
  o.state.assign(state_dim, 0.25);
  o.instruction = InstructionTag::task(task);
  return o;
}

}  // namespace cycleflow::testing

#endif  // CYCLEFLOW_TESTS_TEST_UTIL_H_
