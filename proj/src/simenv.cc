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

#include "cycleflow/simenv.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "cycleflow/error.h"

namespace cycleflow::sim {
namespace {

constexpr double kGraspThreshold = 0.5;

Vec2 clamp_to(const Box2& box, const Vec2& p) {
  return p.cwiseMax(box.lo).cwiseMin(box.hi);
}

Vec2 uniform_in(const Box2& box, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  const double y = u(rng);
  return box.lo + Vec2(x, y).cwiseProduct(box.hi - box.lo);
}

// Per-tick displacement toward `to` under the expert speed profile.
Vec2 move_toward(const Vec2& from, const Vec2& to,
                 const ScriptedExpert& expert, double dt) {
  const Vec2 d = to - from;
  const double dist = d.norm();
  if (dist <= 0.0) return Vec2::Zero();
  const double speed = dist > expert.approach_dist ? expert.v_fast
                                                   : expert.v_slow;
  return d / dist * std::min(speed * dt, dist);
}

std::vector<double> to_action(const Vec2& disp, double gripper_cmd,
                              const ScriptedExpert& expert,
                              const WorldConfig& cfg, Rng* rng) {
  Vec2 a = disp / cfg.max_step;
  if (rng && expert.noise_scale > 0.0) {
    std::uniform_real_distribution<double> u(-expert.noise_scale,
                                             expert.noise_scale);
    a.x() += u(*rng);
    a.y() += u(*rng);
  }
  const double c = cfg.action_clip;
  return {std::clamp(a.x(), -c, c), std::clamp(a.y(), -c, c),
          std::clamp(gripper_cmd, -1.0, 1.0)};
}

// Pick the object, carry it to `goal`, release it there. `may_release`
// gates the final opening (conveyor window).
std::vector<double> pick_and_place(const WorldState& s, const Vec2& goal,
                                   bool may_release,
                                   const ScriptedExpert& expert,
                                   const WorldConfig& cfg, Rng* rng) {
  const double dt = cfg.dt();
  const Object& obj = s.objects.front();
  if (!obj.held) {
    const double dist = (obj.position - s.gripper).norm();
    if (dist > expert.reach_tol) {
      return to_action(move_toward(s.gripper, obj.position, expert, dt), 1.0,
                       expert, cfg, rng);
    }
    // At the object: a closed, empty gripper must re-open before it can
    // grasp again.
    const double cmd = s.aperture < kGraspThreshold ? 1.0 : -1.0;
    return to_action(Vec2::Zero(), cmd, expert, cfg, rng);
  }
  const double dist = (goal - s.gripper).norm();
  if (dist > expert.reach_tol) {
    return to_action(move_toward(s.gripper, goal, expert, dt), -1.0, expert,
                     cfg, rng);
  }
  return to_action(Vec2::Zero(), may_release ? 1.0 : -1.0, expert, cfg, rng);
}

}  // namespace

bool WorldState::holding() const {
  return std::any_of(objects.begin(), objects.end(),
                     [](const Object& o) { return o.held; });
}

const std::vector<TaskSpec>& task_table() {
  static const std::vector<TaskSpec> kTasks = {
      {0, "pick-place", TaskKind::kPickPlace, 0, 15.0, 0.1},
      {1, "conveyor-pack", TaskKind::kConveyorPack, 1, 30.0, 0.1},
  };
  return kTasks;
}

const TaskSpec& task_by_name(const std::string& name) {
  for (const auto& t : task_table()) {
    if (t.name == name) return t;
  }
  throw ArgumentError("unknown task '" + name + "'");
}

const TaskSpec& task_by_id(int id) {
  for (const auto& t : task_table()) {
    if (t.id == id) return t;
  }
  throw ArgumentError("unknown task id " + std::to_string(id));
}

std::vector<TaskInfo> task_infos() {
  std::vector<TaskInfo> out;
  for (const auto& t : task_table()) out.push_back({t.id, t.name, t.time_limit});
  return out;
}

WorldState make_world(const WorldConfig& cfg, Rng& rng) {
  WorldState s;
  s.gripper = cfg.home;
  s.aperture = 1.0;
  s.targets = {{cfg.bin_center, cfg.bin_radius},
               {cfg.box_center, cfg.box_radius}};
  s.conveyor = Conveyor{0.0, cfg.conveyor_period, cfg.conveyor_open_fraction};
  const Vec2 spawn = uniform_in(cfg.spawn_region, rng);
  s.objects = {{spawn, cfg.object_radius, false}};
  s.spawn_anchor = spawn;
  return s;
}

void advance_time(WorldState& state, double dt) {
  state.sim_time += dt;
  if (state.conveyor) {
    auto& c = *state.conveyor;
    c.phase = std::fmod(c.phase + dt, c.period);
  }
}

WorldState step(const WorldState& state, std::span<const double> action,
                const WorldConfig& cfg) {
  WorldState s = state;
  const double c = cfg.action_clip;
  auto comp = [&](std::size_t i) {
    const double v = i < action.size() ? action[i] : 0.0;
    return std::isfinite(v) ? std::clamp(v, -c, c) : 0.0;
  };
  const Vec2 disp(comp(0) * cfg.max_step, comp(1) * cfg.max_step);
  s.gripper = clamp_to(cfg.workspace, s.gripper + disp);

  const double cmd = std::clamp(comp(2), -1.0, 1.0);
  const double target_aperture = 0.5 * (cmd + 1.0);
  const double max_change = cfg.aperture_rate * cfg.dt();
  const double prev_aperture = s.aperture;
  s.aperture += std::clamp(target_aperture - s.aperture, -max_change,
                           max_change);

  const bool closed_now =
      prev_aperture >= kGraspThreshold && s.aperture < kGraspThreshold;
  const bool opened_now =
      prev_aperture < kGraspThreshold && s.aperture >= kGraspThreshold;

  for (auto& o : s.objects) {
    if (o.held && opened_now) o.held = false;
  }
  if (closed_now && !s.holding()) {
    Object* best = nullptr;
    double best_dist = INFINITY;
    for (auto& o : s.objects) {
      const double dist = (o.position - s.gripper).norm();
      if (dist <= o.radius + cfg.grasp_dist && dist < best_dist) {
        best = &o;
        best_dist = dist;
      }
    }
    if (best) best->held = true;
  }
  for (auto& o : s.objects) {
    if (o.held) o.position = s.gripper;
  }
  advance_time(s, cfg.dt());
  return s;
}

bool check_success(const WorldState& state, const TaskSpec& task) {
  if (state.objects.empty() ||
      task.target_index >= static_cast<int>(state.targets.size())) {
    return false;
  }
  const Object& o = state.objects.front();
  if (o.held) return false;
  const TargetRegion& t = state.targets[task.target_index];
  if ((o.position - t.center).norm() > t.radius) return false;
  if (task.kind == TaskKind::kConveyorPack) {
    return state.conveyor && state.conveyor->window_open();
  }
  return true;
}

WorldState respawn(const WorldState& state, const TaskSpec& task, Rng& rng,
                   RespawnCause cause, const WorldConfig& cfg) {
  WorldState s = state;
  if (cause == RespawnCause::kSuccess) {
    Vec2 next = s.spawn_anchor;
    if (task.sigma_drift > 0.0) {
      std::uniform_real_distribution<double> u(-task.sigma_drift,
                                               task.sigma_drift);
      const double dx = u(rng);
      const double dy = u(rng);
      next += Vec2(dx, dy);
    }
    next = clamp_to(cfg.drift_region, next);
    for (auto& o : s.objects) {
      o.held = false;
      o.position = next;
    }
    s.spawn_anchor = next;
    return s;
  }
  s.gripper = cfg.home;
  s.aperture = 1.0;
  const Vec2 spawn = uniform_in(cfg.spawn_region, rng);
  for (auto& o : s.objects) {
    o.held = false;
    o.position = spawn;
  }
  s.spawn_anchor = spawn;
  return s;
}

Observation observe(const WorldState& s, InstructionTag instruction,
                    const WorldConfig& cfg) {
  namespace si = state_index;
  (void)cfg;
  Observation obs;
  obs.state.assign(si::kDim, 0.0);
  auto& v = obs.state;
  v[si::kGripperX] = s.gripper.x();
  v[si::kGripperY] = s.gripper.y();
  v[si::kAperture] = s.aperture;
  if (!s.objects.empty()) {
    const Object& o = s.objects.front();
    v[si::kHeld] = o.held ? 1.0 : 0.0;
    v[si::kObjectX] = o.position.x();
    v[si::kObjectY] = o.position.y();
    v[si::kObjectRelX] = o.position.x() - s.gripper.x();
    v[si::kObjectRelY] = o.position.y() - s.gripper.y();
  }
  if (s.targets.size() >= 2) {
    v[si::kBinRelX] = s.targets[0].center.x() - s.gripper.x();
    v[si::kBinRelY] = s.targets[0].center.y() - s.gripper.y();
    v[si::kBoxRelX] = s.targets[1].center.x() - s.gripper.x();
    v[si::kBoxRelY] = s.targets[1].center.y() - s.gripper.y();
  }
  if (s.conveyor) {
    v[si::kWindowOpen] = s.conveyor->window_open() ? 1.0 : 0.0;
    v[si::kConveyorPhase] = s.conveyor->phase / s.conveyor->period;
  } else {
    v[si::kWindowOpen] = 1.0;
  }
  obs.instruction = instruction;
  obs.sim_time = s.sim_time;
  return obs;
}

WorldState state_from_observation(const Observation& obs,
                                  const WorldConfig& cfg) {
  namespace si = state_index;
  if (static_cast<int>(obs.state.size()) < si::kDim) {
    throw DataError("observation state lacks gripper/object fields");
  }
  const auto& v = obs.state;
  WorldState s;
  s.gripper = {v[si::kGripperX], v[si::kGripperY]};
  s.aperture = v[si::kAperture];
  s.objects = {{{v[si::kObjectX], v[si::kObjectY]},
                cfg.object_radius,
                v[si::kHeld] > 0.5}};
  s.targets = {{cfg.bin_center, cfg.bin_radius},
               {cfg.box_center, cfg.box_radius}};
  s.conveyor = Conveyor{v[si::kConveyorPhase] * cfg.conveyor_period,
                        cfg.conveyor_period, cfg.conveyor_open_fraction};
  s.sim_time = obs.sim_time;
  return s;
}

std::vector<double> expert_policy(const WorldState& state,
                                  const TaskSpec& task,
                                  const ScriptedExpert& expert,
                                  const WorldConfig& cfg, Rng* rng) {
  const Vec2 goal = state.targets.at(task.target_index).center;
  bool may_release = true;
  if (task.kind == TaskKind::kConveyorPack) {
    may_release = state.conveyor && state.conveyor->window_open();
  }
  return pick_and_place(state, goal, may_release, expert, cfg, rng);
}

namespace {

Rng stream_rng(std::uint64_t seed, int stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x5eedu};
  return Rng(seq);
}

[[noreturn]] void expert_timeout(std::uint64_t seed, int stream,
                                 double t) {
  std::ostringstream os;
  os << "scripted expert failed to complete a cycle (seed " << seed
     << ", stream " << stream << ", t=" << t << "s)";
  throw DataError(os.str());
}

// Slips the freshly grasped object out of the gripper.
void inject_slip(WorldState& s, const WorldConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> mag(0.04, 0.08);
  const double a = angle(rng);
  const double m = mag(rng);
  for (auto& o : s.objects) {
    if (!o.held) continue;
    o.held = false;
    o.position = clamp_to(cfg.drift_region,
                          o.position + m * Vec2(std::cos(a), std::sin(a)));
  }
}

// Drops the just-released object outside the rim of the task target.
void inject_miss(WorldState& s, const TaskSpec& task, const WorldConfig& cfg,
                 Rng& rng) {
  const TargetRegion& target = s.targets.at(task.target_index);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> gap(0.01, 0.05);
  const double a = angle(rng);
  const double r = target.radius + gap(rng);
  for (auto& o : s.objects) {
    o.position = clamp_to(cfg.workspace,
                          target.center + r * Vec2(std::cos(a), std::sin(a)));
  }
}

Trajectory play_stream(const ScriptedExpert& expert, const WorldConfig& cfg,
                       double seconds, Rng& rng) {
  Trajectory traj;
  traj.control_hz = cfg.control_hz;
  WorldState s = make_world(cfg, rng);
  const Box2 roam{{0.05, 0.05}, {0.95, 0.95}};
  enum class Stage { kWander, kCarry };
  Stage stage = Stage::kWander;
  Vec2 waypoint = uniform_in(roam, rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto ticks = static_cast<long>(std::llround(seconds * cfg.control_hz));
  long stage_ticks = 0;
  for (long t = 0; t < ticks; ++t) {
    std::vector<double> action;
    if (stage == Stage::kWander) {
      const bool reached = (waypoint - s.gripper).norm() <= expert.reach_tol;
      if (reached) {
        if (u(rng) < 0.5) {
          stage = Stage::kCarry;
          // Drop somewhere random, or into one of the target regions.
          const double r = u(rng);
          if (r < 0.15) {
            waypoint = s.targets[0].center;
          } else if (r < 0.3) {
            waypoint = s.targets[1].center;
          } else {
            waypoint = uniform_in(roam, rng);
          }
        } else {
          waypoint = uniform_in(roam, rng);
        }
        stage_ticks = 0;
      }
    }
    if (stage == Stage::kWander) {
      action = to_action(move_toward(s.gripper, waypoint, expert, cfg.dt()),
                         1.0, expert, cfg, &rng);
    } else {
      action = pick_and_place(s, waypoint, true, expert, cfg, &rng);
    }
    traj.frames.push_back({observe(s, InstructionTag::null(), cfg), action});
    const bool was_held = s.holding();
    s = step(s, action, cfg);
    ++stage_ticks;
    if (stage == Stage::kCarry) {
      const bool released = was_held && !s.holding();
      if (released || stage_ticks > 40 * static_cast<long>(cfg.control_hz)) {
        stage = Stage::kWander;
        waypoint = uniform_in(roam, rng);
        stage_ticks = 0;
      }
    }
  }
  return traj;
}

Trajectory task_stream(const TaskSpec& task, const ScriptedExpert& expert,
                       const WorldConfig& cfg, double seconds, double p_fail,
                       std::uint64_t seed, int stream, Rng& rng) {
  Trajectory traj;
  traj.control_hz = cfg.control_hz;
  WorldState s = make_world(cfg, rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto ticks = static_cast<long>(std::llround(seconds * cfg.control_hz));
  const auto stall_ticks =
      static_cast<long>(std::llround(4.0 * task.time_limit * cfg.control_hz));
  long cycle_start = 0;
  const InstructionTag instr = InstructionTag::task(task.id);
  for (long t = 0; t < ticks; ++t) {
    const auto action = expert_policy(s, task, expert, cfg, &rng);
    traj.frames.push_back({observe(s, instr, cfg), action});
    const bool was_held = s.holding();
    s = step(s, action, cfg);
    if (!was_held && s.holding() && p_fail > 0.0 && u(rng) < p_fail) {
      inject_slip(s, cfg, rng);
    } else if (was_held && !s.holding() && p_fail > 0.0 && u(rng) < p_fail) {
      inject_miss(s, task, cfg, rng);
    }
    if (check_success(s, task)) {
      traj.success_frames.push_back(static_cast<int>(t));
      s = respawn(s, task, rng, RespawnCause::kSuccess, cfg);
      cycle_start = t + 1;
    } else if (t - cycle_start > stall_ticks) {
      expert_timeout(seed, stream, s.sim_time);
    }
  }
  return traj;
}

Trajectory episode(const TaskSpec& task, const ScriptedExpert& expert,
                   const WorldConfig& cfg, std::uint64_t seed, int index,
                   Rng& rng) {
  Trajectory traj;
  traj.control_hz = cfg.control_hz;
  WorldState s = make_world(cfg, rng);
  const auto max_ticks =
      static_cast<long>(std::llround(4.0 * task.time_limit * cfg.control_hz));
  const InstructionTag instr = InstructionTag::task(task.id);
  for (long t = 0; t < max_ticks; ++t) {
    const auto action = expert_policy(s, task, expert, cfg, &rng);
    traj.frames.push_back({observe(s, instr, cfg), action});
    s = step(s, action, cfg);
    if (check_success(s, task)) {
      traj.success_frames.push_back(static_cast<int>(t));
      return traj;
    }
  }
  expert_timeout(seed, index, s.sim_time);
}

}  // namespace

Dataset generate_demos(const TaskSpec& task, const ScriptedExpert& expert,
                       const WorldConfig& cfg, const GenerateOptions& opts) {
  if (!(expert.v_fast > expert.v_slow && expert.v_slow > 0.0)) {
    throw ConfigError("scripted expert requires v_fast > v_slow > 0");
  }
  Dataset ds;
  ds.regime = opts.regime;
  ds.meta.tasks = task_infos();
  ds.meta.horizon = opts.horizon;
  ds.meta.action_dim = kActionDim;
  ds.meta.state_dim = state_index::kDim;
  ds.meta.control_hz = cfg.control_hz;
  switch (opts.regime) {
    case Regime::kPlay:
      for (int k = 0; k < opts.streams; ++k) {
        Rng rng = stream_rng(opts.seed, k);
        ds.trajectories.push_back(play_stream(expert, cfg, opts.seconds, rng));
      }
      break;
    case Regime::kCyclic:
      for (int k = 0; k < opts.streams; ++k) {
        Rng rng = stream_rng(opts.seed, k);
        ds.trajectories.push_back(task_stream(task, expert, cfg, opts.seconds,
                                              opts.p_fail, opts.seed, k, rng));
      }
      break;
    case Regime::kNoncyclic: {
      const double budget = opts.seconds * opts.streams;
      double total = 0.0;
      for (int k = 0;; ++k) {
        if (opts.episodes > 0 ? k >= opts.episodes : total >= budget) break;
        Rng rng = stream_rng(opts.seed, k);
        ds.trajectories.push_back(episode(task, expert, cfg, opts.seed, k, rng));
        total += ds.trajectories.back().frames.size() / cfg.control_hz;
      }
      break;
    }
  }
  ds.validate();
  return ds;
}

}  // namespace cycleflow::sim
