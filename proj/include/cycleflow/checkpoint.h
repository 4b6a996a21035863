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


// JSON checkpoint container for teacher and student flow models.
//
// Doubles are written in shortest round-trip form, so save/load is
// value-exact for every finite real64.

#ifndef CYCLEFLOW_CHECKPOINT_H_
#define CYCLEFLOW_CHECKPOINT_H_

#include <filesystem>
#include <optional>
#include <string>

#include "cycleflow/flowmatch.h"
#include "cycleflow/net.h"

namespace cycleflow {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  std::string kind = "teacher";  // "teacher" or "student"
  std::string stage;             // pretrain, posttrain, distill
  std::string regime;            // regime of the last training dataset
  FlowModel model;
  std::optional<OptimizerState> optimizer;
  // Product of all ESPADA factors applied to the training data; the chunk
  // horizon stored in model.flow() is already the rescaled H'.
  int espada_factor = 1;
  // Euler steps used at deployment.
  int sample_steps = 10;
  // Git blob hash of the teacher checkpoint file (students only).
  std::string teacher_hash;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// Throws IoError on malformed, truncated or version-mismatched input.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cycleflow

#endif  // CYCLEFLOW_CHECKPOINT_H_
