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
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "cycleflow/error.h"

namespace cycleflow::sim {
namespace {

WorldState scene(Vec2 gripper, Vec2 object) {
  WorldConfig cfg;
  Rng rng(1);
  WorldState s = make_world(cfg, rng);
  s.gripper = gripper;
  s.objects.front().position = object;
  s.spawn_anchor = object;
  return s;
}

std::vector<double> act(double x, double y, double g) { return {x, y, g}; }

TEST(Step, DisplacementIsActionTimesMaxStep) {
  WorldConfig cfg;
  WorldState s = scene({0.5, 0.5}, {0.2, 0.2});
  s = step(s, act(1.0, -0.5, 1.0), cfg);
  EXPECT_NEAR(s.gripper.x(), 0.6, 1e-15);
  EXPECT_NEAR(s.gripper.y(), 0.45, 1e-15);
  EXPECT_NEAR(s.sim_time, 0.05, 1e-15);
}

TEST(Step, ClampsActionsAndWorkspace) {
  WorldConfig cfg;
  WorldState s = scene({0.5, 0.5}, {0.2, 0.2});
  const WorldState a = step(s, act(5.0, -5.0, 1.0), cfg);
  EXPECT_NEAR(a.gripper.x(), 0.6, 1e-15);
  EXPECT_NEAR(a.gripper.y(), 0.4, 1e-15);
  s.gripper = {0.97, 0.02};
  const WorldState b = step(s, act(1.0, -1.0, 1.0), cfg);
  EXPECT_EQ(b.gripper, Vec2(1.0, 0.0));
  const double nan = std::numeric_limits<double>::quiet_NaN();
  s.gripper = {0.5, 0.5};
  const WorldState c = step(s, act(nan, 0.5, nan), cfg);
  EXPECT_NEAR(c.gripper.x(), 0.5, 1e-15);
  EXPECT_NEAR(c.gripper.y(), 0.55, 1e-15);
  // A short action vector pads missing components with zero.
  const WorldState d = step(s, std::vector<double>{1.0}, cfg);
  EXPECT_NEAR(d.gripper.x(), 0.6, 1e-15);
  EXPECT_NEAR(d.aperture, 0.75, 1e-15);
}

TEST(Step, ApertureRateLimitedAndGraspOnClose) {
  WorldConfig cfg;
  WorldState s = scene({0.3, 0.3}, {0.33, 0.3});
  const double expect[] = {0.75, 0.5, 0.25, 0.0, 0.0};
  for (int i = 0; i < 5; ++i) {
    s = step(s, act(0.0, 0.0, -1.0), cfg);
    EXPECT_NEAR(s.aperture, expect[i], 1e-12);
    // The grasp latches on the tick the aperture crosses below one half.
    EXPECT_EQ(s.holding(), i >= 2) << i;
  }
  // A held object tracks the gripper exactly.
  for (int i = 0; i < 4; ++i) {
    s = step(s, act(0.7, -0.3, -1.0), cfg);
    EXPECT_EQ(s.objects.front().position, s.gripper);
  }
  // Opening releases it where it is.
  for (int i = 0; i < 3; ++i) s = step(s, act(0.0, 0.0, 1.0), cfg);
  EXPECT_FALSE(s.holding());
  const Vec2 at = s.objects.front().position;
  s = step(s, act(1.0, 1.0, 1.0), cfg);
  EXPECT_EQ(s.objects.front().position, at);
}

TEST(Step, NoGraspOutOfReach) {
  WorldConfig cfg;
  WorldState s = scene({0.3, 0.3}, {0.36, 0.3});
  for (int i = 0; i < 4; ++i) s = step(s, act(0.0, 0.0, -1.0), cfg);
  EXPECT_FALSE(s.holding());
}

TEST(Success, PickPlacePredicate) {
  WorldConfig cfg;
  const TaskSpec& task = task_by_name("pick-place");
  WorldState s = scene({0.5, 0.5}, cfg.bin_center);
  EXPECT_TRUE(check_success(s, task));
  s.objects.front().position = cfg.bin_center + Vec2(0.079, 0.0);
  EXPECT_TRUE(check_success(s, task));
  s.objects.front().position = cfg.bin_center + Vec2(0.081, 0.0);
  EXPECT_FALSE(check_success(s, task));
  s.objects.front().position = cfg.bin_center;
  s.objects.front().held = true;
  EXPECT_FALSE(check_success(s, task));
  // Dropping into the conveyor box does not count for pick-place.
  s.objects.front().held = false;
  s.objects.front().position = cfg.box_center;
  EXPECT_FALSE(check_success(s, task));
}

TEST(Success, ConveyorNeedsOpenWindow) {
  WorldConfig cfg;
  const TaskSpec& task = task_by_name("conveyor-pack");
  WorldState s = scene({0.5, 0.5}, cfg.box_center);
  s.conveyor->phase = 0.5;
  EXPECT_TRUE(check_success(s, task));
  s.conveyor->phase = 3.0;
  EXPECT_FALSE(check_success(s, task));
}

TEST(Conveyor, PhaseWrapsWithPeriod) {
  WorldConfig cfg;
  WorldState s = scene({0.5, 0.5}, {0.2, 0.2});
  for (int i = 0; i < 100; ++i) s = step(s, act(0, 0, 1), cfg);
  EXPECT_NEAR(s.conveyor->phase, 1.0, 1e-9);  // 5 s into a 4 s period
  advance_time(s, 1.5);
  EXPECT_NEAR(s.conveyor->phase, 2.5, 1e-9);
  EXPECT_FALSE(s.conveyor->window_open());
  EXPECT_NEAR(s.sim_time, 6.5, 1e-9);
}

TEST(Expert, HoldsAtConveyorWhileWindowClosed) {
  WorldConfig cfg;
  const TaskSpec& task = task_by_name("conveyor-pack");
  WorldState s = scene(cfg.box_center, cfg.box_center);
  s.objects.front().held = true;
  s.aperture = 0.0;
  s.conveyor->phase = 3.0;
  const auto a = expert_policy(s, task, ScriptedExpert{}, cfg, nullptr);
  EXPECT_EQ(a, act(0.0, 0.0, -1.0));
  s.conveyor->phase = 0.1;
  const auto b = expert_policy(s, task, ScriptedExpert{}, cfg, nullptr);
  EXPECT_EQ(b, act(0.0, 0.0, 1.0));
}

TEST(Expert, SpeedBoundsAndDirection) {
  WorldConfig cfg;
  ScriptedExpert ex;
  const TaskSpec& task = task_by_name("pick-place");
  const double fast = ex.v_fast * cfg.dt() / cfg.max_step;
  const double slow = ex.v_slow * cfg.dt() / cfg.max_step;
  Rng rng(4);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int i = 0; i < 500; ++i) {
    const Vec2 g(u(rng), u(rng));
    const Vec2 o(u(rng), u(rng));
    const WorldState s = scene(g, o);
    const auto a = expert_policy(s, task, ex, cfg, nullptr);
    const Vec2 d(a[0], a[1]);
    const double dist = (o - g).norm();
    if (dist <= ex.reach_tol) continue;
    const double expected = dist > ex.approach_dist
                                ? fast
                                : std::min(slow, dist / cfg.max_step);
    EXPECT_NEAR(d.norm(), expected, 1e-12);
    // Collinear with the direction to the object.
    const Vec2 dir = (o - g) / dist;
    EXPECT_NEAR(d.x() * dir.y() - d.y() * dir.x(), 0.0, 1e-12);
    EXPECT_GT(d.dot(dir), 0.0);
    EXPECT_EQ(a[2], 1.0);

    // Noise stays within its half-width on each component.
    const auto n = expert_policy(s, task, ex, cfg, &rng);
    EXPECT_LE(std::abs(n[0] - a[0]), ex.noise_scale + 1e-15);
    EXPECT_LE(std::abs(n[1] - a[1]), ex.noise_scale + 1e-15);
  }
}

TEST(Respawn, ZeroDriftReturnsToAnchor) {
  WorldConfig cfg;
  TaskSpec task = task_by_name("pick-place");
  task.sigma_drift = 0.0;
  WorldState s = scene({0.8, 0.7}, cfg.bin_center);
  s.spawn_anchor = {0.3, 0.4};
  Rng rng(2);
  for (int i = 0; i < 5; ++i) {
    s = respawn(s, task, rng, RespawnCause::kSuccess, cfg);
    EXPECT_EQ(s.objects.front().position, Vec2(0.3, 0.4));
    EXPECT_EQ(s.gripper, Vec2(0.8, 0.7));  // no gripper reset
  }
}

TEST(Respawn, DriftIsUniformAroundAnchor) {
  WorldConfig cfg;
  const TaskSpec& task = task_by_name("pick-place");
  const double sigma = task.sigma_drift;
  Rng rng(3);
  const int n = 20000;
  std::vector<double> dx, dy;
  for (int i = 0; i < n; ++i) {
    WorldState s = scene({0.5, 0.5}, {0.3, 0.5});
    s = respawn(s, task, rng, RespawnCause::kSuccess, cfg);
    const Vec2 d = s.objects.front().position - Vec2(0.3, 0.5);
    ASSERT_LE(d.cwiseAbs().maxCoeff(), sigma);
    EXPECT_EQ(s.spawn_anchor, s.objects.front().position);
    dx.push_back(d.x());
    dy.push_back(d.y());
  }
  for (auto* v : {&dx, &dy}) {
    std::sort(v->begin(), v->end());
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
      const double cdf = ((*v)[i] + sigma) / (2 * sigma);
      ks = std::max({ks, std::abs(cdf - static_cast<double>(i) / n),
                     std::abs(cdf - static_cast<double>(i + 1) / n)});
    }
    EXPECT_LT(ks, 1.95 / std::sqrt(n));  // 0.1% critical value
  }
}

TEST(Respawn, DriftIsClampedToRegion) {
  WorldConfig cfg;
  TaskSpec task = task_by_name("pick-place");
  task.sigma_drift = 0.3;
  Rng rng(5);
  WorldState s = scene({0.5, 0.5}, {0.06, 0.06});
  for (int i = 0; i < 2000; ++i) {
    s = respawn(s, task, rng, RespawnCause::kSuccess, cfg);
    const Vec2 p = s.objects.front().position;
    ASSERT_TRUE((p.array() >= cfg.drift_region.lo.array()).all());
    ASSERT_TRUE((p.array() <= cfg.drift_region.hi.array()).all());
  }
}

TEST(Respawn, InterventionResetsScene) {
  WorldConfig cfg;
  const TaskSpec& task = task_by_name("pick-place");
  Rng rng(6);
  WorldState s = scene({0.9, 0.1}, {0.9, 0.1});
  s.objects.front().held = true;
  s.aperture = 0.0;
  s = respawn(s, task, rng, RespawnCause::kIntervention, cfg);
  EXPECT_EQ(s.gripper, cfg.home);
  EXPECT_EQ(s.aperture, 1.0);
  EXPECT_FALSE(s.holding());
  const Vec2 p = s.objects.front().position;
  EXPECT_TRUE((p.array() >= cfg.spawn_region.lo.array()).all());
  EXPECT_TRUE((p.array() <= cfg.spawn_region.hi.array()).all());
}

TEST(Observe, RoundTripsControllerState) {
  WorldConfig cfg;
  WorldState s = scene({0.42, 0.61}, {0.2, 0.3});
  s.aperture = 0.25;
  s.conveyor->phase = 1.0;
  s.sim_time = 12.5;
  const Observation obs = observe(s, InstructionTag::task(1), cfg);
  namespace si = state_index;
  ASSERT_EQ(obs.state.size(), static_cast<std::size_t>(si::kDim));
  EXPECT_NEAR(obs.state[si::kObjectRelX], 0.2 - 0.42, 1e-15);
  EXPECT_NEAR(obs.state[si::kBinRelY], cfg.bin_center.y() - 0.61, 1e-15);
  EXPECT_EQ(obs.state[si::kWindowOpen], 1.0);
  EXPECT_NEAR(obs.state[si::kConveyorPhase], 0.25, 1e-15);
  EXPECT_EQ(obs.instruction, InstructionTag::task(1));
  const WorldState back = state_from_observation(obs, cfg);
  EXPECT_EQ(back.gripper, s.gripper);
  EXPECT_EQ(back.aperture, s.aperture);
  EXPECT_EQ(back.objects.front().position, s.objects.front().position);
  EXPECT_NEAR(back.conveyor->phase, 1.0, 1e-15);
  Observation bad = obs;
  bad.state.resize(5);
  EXPECT_THROW(state_from_observation(bad, cfg), DataError);
}

TEST(Tasks, Registry) {
  EXPECT_EQ(task_by_name("pick-place").time_limit, 15.0);
  EXPECT_EQ(task_by_name("conveyor-pack").time_limit, 30.0);
  EXPECT_EQ(task_by_id(1).name, "conveyor-pack");
  EXPECT_THROW(task_by_name("stack"), ArgumentError);
  EXPECT_THROW(task_by_id(7), ArgumentError);
  EXPECT_EQ(task_infos().size(), 2u);
}

GenerateOptions opts(Regime r, double seconds, std::uint64_t seed) {
  GenerateOptions o;
  o.regime = r;
  o.seconds = seconds;
  o.seed = seed;
  return o;
}

TEST(Generate, NoncyclicEpisodesEndOnSuccess) {
  GenerateOptions o = opts(Regime::kNoncyclic, 0.0, 9);
  o.episodes = 5;
  const Dataset ds = generate_demos(task_by_name("pick-place"),
                                    ScriptedExpert{}, WorldConfig{}, o);
  ASSERT_EQ(ds.trajectories.size(), 5u);
  for (const auto& t : ds.trajectories) {
    ASSERT_EQ(t.success_frames.size(), 1u);
    EXPECT_EQ(t.success_frames[0], static_cast<int>(t.frames.size()) - 1);
    EXPECT_LT(t.frames.size(), 15u * 20u);
  }
}

TEST(Generate, CyclicStreamLengthAndSuccesses) {
  for (const char* name : {"pick-place", "conveyor-pack"}) {
    const Dataset ds = generate_demos(task_by_name(name), ScriptedExpert{},
                                      WorldConfig{},
                                      opts(Regime::kCyclic, 60.0, 4));
    ASSERT_EQ(ds.trajectories.size(), 1u);
    const auto& t = ds.trajectories[0];
    EXPECT_EQ(t.frames.size(), 1200u) << name;
    EXPECT_GE(t.success_frames.size(), 2u) << name;
    EXPECT_TRUE(std::is_sorted(t.success_frames.begin(), t.success_frames.end()));
    for (const auto& f : t.frames) {
      ASSERT_EQ(f.obs.instruction, InstructionTag::task(task_by_name(name).id));
    }
    // Frames are consecutive ticks of one clock.
    for (std::size_t i = 1; i < t.frames.size(); ++i) {
      ASSERT_NEAR(t.frames[i].obs.sim_time - t.frames[i - 1].obs.sim_time,
                  0.05, 1e-9);
    }
  }
}

TEST(Generate, PlayHasNullInstructions) {
  GenerateOptions o = opts(Regime::kPlay, 30.0, 2);
  o.streams = 2;
  const Dataset ds = generate_demos(task_by_name("pick-place"),
                                    ScriptedExpert{}, WorldConfig{}, o);
  ASSERT_EQ(ds.trajectories.size(), 2u);
  for (const auto& t : ds.trajectories) {
    EXPECT_EQ(t.frames.size(), 600u);
    EXPECT_TRUE(t.success_frames.empty());
    for (const auto& f : t.frames) ASSERT_TRUE(f.obs.instruction.is_null());
  }
}

TEST(Generate, DeterministicInSeed) {
  const auto& task = task_by_name("pick-place");
  const auto a = generate_demos(task, ScriptedExpert{}, WorldConfig{},
                                opts(Regime::kCyclic, 20.0, 8));
  const auto b = generate_demos(task, ScriptedExpert{}, WorldConfig{},
                                opts(Regime::kCyclic, 20.0, 8));
  const auto c = generate_demos(task, ScriptedExpert{}, WorldConfig{},
                                opts(Regime::kCyclic, 20.0, 9));
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Generate, ReplayedActionsReproduceObservations) {
  WorldConfig cfg;
  GenerateOptions o = opts(Regime::kNoncyclic, 0.0, 12);
  o.episodes = 1;
  const auto ds =
      generate_demos(task_by_name("pick-place"), ScriptedExpert{}, cfg, o);
  const auto& t = ds.trajectories[0];
  WorldState s = state_from_observation(t.frames[0].obs, cfg);
  for (std::size_t i = 0; i + 1 < t.frames.size(); ++i) {
    s = step(s, t.frames[i].action, cfg);
    const auto obs = observe(s, t.frames[i + 1].obs.instruction, cfg);
    for (std::size_t k = 0; k < obs.state.size(); ++k) {
      ASSERT_NEAR(obs.state[k], t.frames[i + 1].obs.state[k], 1e-9)
          << "frame " << i + 1 << " component " << k;
    }
  }
  s = step(s, t.frames.back().action, cfg);
  EXPECT_TRUE(check_success(s, task_by_name("pick-place")));
}

TEST(Generate, RejectsBadExpert) {
  ScriptedExpert ex;
  ex.v_slow = ex.v_fast;
  EXPECT_THROW(generate_demos(task_by_name("pick-place"), ex, WorldConfig{},
                              opts(Regime::kCyclic, 5.0, 1)),
               ConfigError);
}

}  // namespace
}  // namespace cycleflow::sim
