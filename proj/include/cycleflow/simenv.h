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

// Deterministic 2D kinematic manipulation world.
//
// A single gripper moves in the unit square and can pick up one object.
// Two fixed target regions exist: a bin (pick-place) and a conveyor box
// that only accepts objects while its periodic window is open
// (conveyor-pack). Actions are per-tick displacements normalized by
// `max_step`, plus a gripper command in [-1, 1] (-1 close, +1 open).

#ifndef CYCLEFLOW_SIMENV_H_
#define CYCLEFLOW_SIMENV_H_

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cycleflow/traj.h"

namespace cycleflow::sim {

using Vec2 = Eigen::Vector2d;
using Rng = std::mt19937_64;

// Index layout of Observation::state.
namespace state_index {
inline constexpr int kGripperX = 0;
inline constexpr int kGripperY = 1;
inline constexpr int kAperture = 2;
inline constexpr int kHeld = 3;
inline constexpr int kObjectX = 4;
inline constexpr int kObjectY = 5;
inline constexpr int kObjectRelX = 6;
inline constexpr int kObjectRelY = 7;
inline constexpr int kBinRelX = 8;
inline constexpr int kBinRelY = 9;
inline constexpr int kBoxRelX = 10;
inline constexpr int kBoxRelY = 11;
inline constexpr int kWindowOpen = 12;
inline constexpr int kConveyorPhase = 13;
inline constexpr int kDim = 14;
}  // namespace state_index

inline constexpr int kActionDim = 3;

struct Box2 {
  Vec2 lo;
  Vec2 hi;
};

struct WorldConfig {
  double control_hz = 20.0;
  Box2 workspace{{0.0, 0.0}, {1.0, 1.0}};
  double object_radius = 0.03;
  double grasp_dist = 0.02;
  // Displacement per tick at |action| = 1.
  double max_step = 0.1;
  double action_clip = 1.0;
  // Aperture change per second.
  double aperture_rate = 5.0;
  Vec2 home{0.5, 0.5};
  // Curated resets draw the object uniformly from here.
  Box2 spawn_region{{0.1, 0.2}, {0.4, 0.8}};
  // Drift respawns random-walk inside this (larger) region.
  Box2 drift_region{{0.05, 0.05}, {0.6, 0.95}};
  Vec2 bin_center{0.82, 0.75};
  double bin_radius = 0.08;
  Vec2 box_center{0.82, 0.25};
  double box_radius = 0.08;
  double conveyor_period = 4.0;
  double conveyor_open_fraction = 0.5;

  double dt() const { return 1.0 / control_hz; }
};

struct Object {
  Vec2 position{0.0, 0.0};
  double radius = 0.03;
  bool held = false;
};

struct TargetRegion {
  Vec2 center{0.0, 0.0};
  double radius = 0.0;
};

struct Conveyor {
  double phase = 0.0;  // seconds into the current period
  double period = 4.0;
  double open_fraction = 0.5;

  bool window_open() const { return phase < open_fraction * period; }
};

struct WorldState {
  Vec2 gripper{0.5, 0.5};
  double aperture = 1.0;
  std::vector<Object> objects;
  std::vector<TargetRegion> targets;  // [0] bin, [1] conveyor box
  std::optional<Conveyor> conveyor;
  double sim_time = 0.0;
  // Spawn point of the current cycle; drift respawns perturb it.
  Vec2 spawn_anchor{0.25, 0.5};

  bool holding() const;
};

enum class TaskKind { kPickPlace, kConveyorPack };

struct TaskSpec {
  int id = 0;
  std::string name;
  TaskKind kind = TaskKind::kPickPlace;
  int target_index = 0;
  double time_limit = 15.0;
  double sigma_drift = 0.1;
};

// The two registered tasks: pick-place (15 s) and conveyor-pack (30 s).
const std::vector<TaskSpec>& task_table();
const TaskSpec& task_by_name(const std::string& name);
const TaskSpec& task_by_id(int id);
std::vector<TaskInfo> task_infos();

struct ScriptedExpert {
  double v_fast = 0.4;  // units / s
  double v_slow = 0.1;
  double approach_dist = 0.06;
  // Uniform noise half-width on each normalized displacement component.
  double noise_scale = 0.02;
  // Distance at which a waypoint counts as reached.
  double reach_tol = 0.01;
};

// Initial scene: gripper at home, open, object uniform in the spawn region.
WorldState make_world(const WorldConfig& cfg, Rng& rng);

// Deterministic kinematic update. Inputs are clamped, never rejected.
WorldState step(const WorldState& state, std::span<const double> action,
                const WorldConfig& cfg);
// Advances clocks only (inference pauses, reset time).
void advance_time(WorldState& state, double dt);

bool check_success(const WorldState& state, const TaskSpec& task);

enum class RespawnCause { kSuccess, kIntervention };

// kSuccess: object reappears at spawn_anchor + U(-sigma, sigma)^2, clamped to
// the drift region (cycle continuity). kIntervention: curated reset, scene
// re-randomized uniformly over the spawn region and gripper sent home.
WorldState respawn(const WorldState& state, const TaskSpec& task, Rng& rng,
                   RespawnCause cause, const WorldConfig& cfg);

Observation observe(const WorldState& state, InstructionTag instruction,
                    const WorldConfig& cfg);
// Inverse of observe() for the quantities a controller needs.
WorldState state_from_observation(const Observation& obs,
                                  const WorldConfig& cfg);

// Stateless scripted controller. `rng` may be null for noise-free actions.
std::vector<double> expert_policy(const WorldState& state,
                                  const TaskSpec& task,
                                  const ScriptedExpert& expert,
                                  const WorldConfig& cfg, Rng* rng);

struct GenerateOptions {
  Regime regime = Regime::kCyclic;
  // play / cyclic: duration of each stream. noncyclic: episodes are added
  // until their total duration reaches `seconds` (when episodes == 0).
  double seconds = 600.0;
  int episodes = 0;
  int streams = 1;
  // Rate of injected grasp slips and of placements landing just outside
  // the target; only used for cyclic streams.
  double p_fail = 0.1;
  std::uint64_t seed = 0;
  int horizon = 32;
};

Dataset generate_demos(const TaskSpec& task, const ScriptedExpert& expert,
                       const WorldConfig& cfg, const GenerateOptions& opts);

}  // namespace cycleflow::sim

#endif  // CYCLEFLOW_SIMENV_H_
