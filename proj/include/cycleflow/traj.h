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

#ifndef CYCLEFLOW_TRAJ_H_
#define CYCLEFLOW_TRAJ_H_

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cycleflow/net.h"

namespace cycleflow {

// Language conditioning: a registered task id or the null token used for
// play data and instruction masking.
struct InstructionTag {
  static constexpr int kNull = -1;
  int task_id = kNull;

  static InstructionTag null() { return {}; }
  static InstructionTag task(int id) { return {id}; }
  bool is_null() const { return task_id == kNull; }
  bool operator==(const InstructionTag&) const = default;
};

struct Observation {
  std::vector<double> state;
  InstructionTag instruction;
  double sim_time = 0.0;

  bool operator==(const Observation&) const = default;
};

// H x d matrix; rows are control ticks.
using ActionChunk = Matrix;

enum class Phase { kCasual, kPrecision };

struct Frame {
  Observation obs;
  std::vector<double> action;

  bool operator==(const Frame&) const = default;
};

struct Trajectory {
  std::vector<Frame> frames;
  // Empty, or one label per frame.
  std::vector<Phase> phase_labels;
  double control_hz = 20.0;
  // Frame indices whose action completed a task (simulator annotation).
  std::vector<int> success_frames;

  bool operator==(const Trajectory&) const = default;
};

enum class Regime { kPlay, kNoncyclic, kCyclic };

const char* regime_name(Regime r);
Regime regime_from_name(const std::string& name);

struct TaskInfo {
  int id = 0;
  std::string name;
  double time_limit = 0.0;

  bool operator==(const TaskInfo&) const = default;
};

struct DatasetMeta {
  std::vector<TaskInfo> tasks;
  int horizon = 1;
  int action_dim = 3;
  int state_dim = 0;
  double control_hz = 20.0;
  // Downsampling factor applied to the frames (1 = raw demonstrations).
  int espada_factor = 1;

  bool operator==(const DatasetMeta&) const = default;
};

struct Dataset {
  std::vector<Trajectory> trajectories;
  Regime regime = Regime::kPlay;
  DatasetMeta meta;

  // Structural and regime invariants. Throws DataError.
  void validate() const;
  std::size_t num_frames() const;
  bool operator==(const Dataset&) const = default;
};

struct ChunkPair {
  Observation obs;
  ActionChunk chunk;
};

// One (observation, chunk) pair per start index t with t + H - 1 in range.
std::vector<ChunkPair> window_chunks(const Trajectory& traj, int horizon);

// Start indices usable by window_chunks, for lazy sampling.
std::size_t num_windows(const Trajectory& traj, int horizon);
ActionChunk chunk_at(const Trajectory& traj, std::size_t start, int horizon);

inline constexpr int kDatasetFormatVersion = 1;

// JSON-lines: one header line, then one trajectory per line.
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace cycleflow

#endif  // CYCLEFLOW_TRAJ_H_
