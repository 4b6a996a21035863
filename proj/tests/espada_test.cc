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

#include "cycleflow/espada.h"

#include <cmath>
#include <numbers>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "cycleflow/error.h"
#include "cycleflow/simenv.h"

namespace cycleflow::espada {
namespace {

namespace si = sim::state_index;
constexpr Phase C = Phase::kCasual;
constexpr Phase P = Phase::kPrecision;

// Frames whose only nearby thing is the (unheld) object at `dist`.
Trajectory with_object_distances(const std::vector<double>& dist) {
  Trajectory t;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    Frame f;
    f.obs.state.assign(si::kDim, 0.0);
    f.obs.state[si::kObjectRelX] = dist[i];
    f.obs.state[si::kBinRelX] = 1.0;
    f.obs.state[si::kBoxRelY] = 1.0;
    f.obs.state[si::kAperture] = 1.0;
    f.obs.sim_time = 0.05 * i;
    f.action = {0.1, 0.0, 1.0};
    t.frames.push_back(f);
  }
  return t;
}

// Constant-speed motion turning by `turn` radians per tick, far from
// everything (all casual).
Trajectory arc(int n, double turn, double step = 0.2) {
  std::vector<double> far(n, 1.0);
  Trajectory t = with_object_distances(far);
  for (int i = 0; i < n; ++i) {
    t.frames[i].action = {step * std::cos(turn * i), step * std::sin(turn * i),
                          1.0};
  }
  return t;
}

ActionChunk rows_of(const Trajectory& t, int begin, int end) {
  ActionChunk c(end - begin, 3);
  for (int i = begin; i < end; ++i) {
    for (int j = 0; j < 3; ++j) c(i - begin, j) = t.frames[i].action[j];
  }
  return c;
}

TEST(Segment, ThresholdExample) {
  EspadaConfig cfg;
  cfg.d_prec = 0.1;
  cfg.min_run = 1;
  const auto seg =
      segment_phases(with_object_distances({0.5, 0.3, 0.05, 0.02, 0.3}), cfg);
  EXPECT_EQ(seg.labels, (std::vector<Phase>{C, C, P, P, C}));
  ASSERT_EQ(seg.segments.size(), 3u);
  EXPECT_EQ(seg.segments[1], (Segment{P, 2, 4}));
}

TEST(Segment, FarAndStillIsAllCasual) {
  EspadaConfig cfg;
  const auto seg = segment_phases(with_object_distances({0.5, 0.4, 0.3, 0.6}), cfg);
  for (Phase p : seg.labels) EXPECT_EQ(p, C);
}

TEST(Segment, MovingApertureIsPrecision) {
  Trajectory t = with_object_distances({0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
  t.frames[3].obs.state[si::kAperture] = 0.8;
  EspadaConfig cfg;
  cfg.min_run = 1;
  const auto raw = raw_labels(t, cfg);
  EXPECT_EQ(raw, (std::vector<Phase>{C, C, P, P, P, C}));
}

TEST(Segment, HeldObjectDistanceIgnored) {
  Trajectory t = with_object_distances({0.01, 0.01});
  for (auto& f : t.frames) f.obs.state[si::kHeld] = 1.0;
  EspadaConfig cfg;
  EXPECT_EQ(raw_labels(t, cfg), (std::vector<Phase>{C, C}));
}

TEST(Segment, SmoothingAbsorbsBlips) {
  EXPECT_EQ(smooth_labels({C, C, P, C, C}, 2), (std::vector<Phase>{C, C, C, C, C}));
  EXPECT_EQ(smooth_labels({P, C, C, C}, 2), (std::vector<Phase>{P, C, C, C}));
  EXPECT_EQ(smooth_labels({C, P, P, C, P, P}, 3),
            (std::vector<Phase>{C, P, P, P, P, P}));
}

TEST(Segment, MissingStateIsDataError) {
  Trajectory t = with_object_distances({0.5});
  t.frames[0].obs.state.resize(4);
  EXPECT_THROW(segment_phases(t, EspadaConfig{}), DataError);
}

TEST(Downsample, FactorOneIsIdentity) {
  const Trajectory t = arc(13, 0.1);
  EspadaConfig cfg;
  cfg.factor = 1;
  const auto seg = segment_phases(t, cfg);
  Trajectory out = downsample(t, seg, cfg);
  EXPECT_EQ(out.frames, t.frames);
}

TEST(Downsample, AllCasualSumsGroupsOfN) {
  Trajectory t = arc(12, 0.0);
  for (int i = 0; i < 12; ++i) t.frames[i].action = {0.01 * (i + 1), -0.02 * i, 1.0};
  EspadaConfig cfg;
  cfg.factor = 4;
  const auto seg = segment_phases(t, cfg);
  const auto out = downsample_with_map(t, seg, cfg);
  ASSERT_EQ(out.traj.frames.size(), 3u);
  EXPECT_EQ(out.kept, (std::vector<int>{0, 4, 8}));
  for (int k = 0; k < 3; ++k) {
    double sx = 0.0, sy = 0.0;
    for (int i = 4 * k; i < 4 * k + 4; ++i) {
      sx += t.frames[i].action[0];
      sy += t.frames[i].action[1];
    }
    EXPECT_NEAR(out.traj.frames[k].action[0], sx, 1e-15);
    EXPECT_NEAR(out.traj.frames[k].action[1], sy, 1e-15);
    EXPECT_EQ(out.traj.frames[k].obs, t.frames[4 * k].obs);
  }
}

TEST(Downsample, AllPrecisionKeepsEveryFrame) {
  for (int n : {5, 12, 17}) {
    std::vector<double> near(n, 0.01);
    const Trajectory t = with_object_distances(near);
    for (int factor : {2, 3, 4, 7}) {
      EspadaConfig cfg;
      cfg.factor = factor;
      const auto out = downsample(t, segment_phases(t, cfg), cfg);
      EXPECT_LE(std::abs(static_cast<int>(out.frames.size()) - n), 1);
    }
  }
}

TEST(RescaleHorizon, ExhaustiveCeiling) {
  for (int h = 1; h <= 100; ++h) {
    for (int n = 1; n <= 100; ++n) {
      const int hp = rescale_horizon(h, n);
      ASSERT_GE(hp * n, h);
      ASSERT_LT((hp - 1) * n, h);
    }
  }
  EXPECT_EQ(rescale_horizon(50, 4), 13);
  EXPECT_EQ(rescale_horizon(9, 1), 9);
  EXPECT_EQ(rescale_horizon(7, 7), 1);
  EXPECT_EQ(rescale_horizon(48, 4), 12);
  EXPECT_THROW(rescale_horizon(0, 2), ArgumentError);
}

TEST(Displacement, CollinearMotionIsExact) {
  const Trajectory t = arc(40, 0.0);
  for (int factor : {1, 2, 4, 5}) {
    EspadaConfig cfg;
    cfg.factor = factor;
    const auto out = downsample_with_map(t, segment_phases(t, cfg), cfg);
    const auto r = displacement_check(
        rows_of(t, 0, 40),
        rows_of(out.traj, 0, static_cast<int>(out.traj.frames.size())), 0.1);
    EXPECT_NEAR(r.rel_err, 0.0, 1e-12) << "N=" << factor;
    EXPECT_TRUE(r.pass);
  }
}

TEST(Displacement, ArcShortfallMatchesChordOverArc) {
  const double theta = 0.15;
  const int n = 48;
  const Trajectory t = arc(n, theta);
  for (int factor : {2, 3, 4}) {
    EspadaConfig cfg;
    cfg.factor = factor;
    const auto seg = segment_phases(t, cfg);
    // Summing N unit-length steps turning by theta gives the chord of the
    // arc: sin(N theta / 2) / sin(theta / 2) step lengths.
    const auto sum = downsample(t, seg, cfg);
    const auto rs = displacement_check(rows_of(t, 0, n),
                                       rows_of(sum, 0, n / factor), 0.1);
    const double chord_ratio =
        std::sin(factor * theta / 2) / (factor * std::sin(theta / 2));
    EXPECT_NEAR(rs.rel_err, 1.0 - chord_ratio, 1e-9);
    EXPECT_LE(rs.ds_sum, rs.orig_sum);
    // Keeping every N-th row alone drops (N - 1) / N of the path.
    cfg.mode = CompressMode::kDrop;
    const auto drop = downsample(t, seg, cfg);
    const auto rd = displacement_check(rows_of(t, 0, n),
                                       rows_of(drop, 0, n / factor), 0.1);
    EXPECT_NEAR(rd.rel_err, 1.0 - 1.0 / factor, 1e-9);
    EXPECT_FALSE(rd.pass);
  }
}

class SimTrajectories : public ::testing::Test {
 protected:
  static Dataset data() {
    sim::GenerateOptions go;
    go.regime = Regime::kCyclic;
    go.seconds = 120.0;
    go.streams = 2;
    go.seed = 3;
    return sim::generate_demos(sim::task_by_name("pick-place"),
                               sim::ScriptedExpert{}, sim::WorldConfig{}, go);
  }
};

TEST_F(SimTrajectories, SegmentsTileAndRespectMinRun) {
  EspadaConfig cfg;
  for (const auto& t : data().trajectories) {
    const auto seg = segment_phases(t, cfg);
    int pos = 0;
    for (std::size_t r = 0; r < seg.segments.size(); ++r) {
      const auto& s = seg.segments[r];
      EXPECT_EQ(s.start, pos);
      pos = s.end;
      if (r > 0 && r + 1 < seg.segments.size()) {
        EXPECT_GE(s.end - s.start, cfg.min_run);
      }
      if (r > 0) EXPECT_NE(s.phase, seg.segments[r - 1].phase);
    }
    EXPECT_EQ(pos, static_cast<int>(t.frames.size()));
    EXPECT_GT(seg.segments.size(), 4u);
  }
}

TEST_F(SimTrajectories, CompressionRatioPrecisionAndDisplacement) {
  for (int factor : {2, 4, 8}) {
    EspadaConfig cfg;
    cfg.factor = factor;
    for (const auto& t : data().trajectories) {
      const auto seg = segment_phases(t, cfg);
      const auto out = downsample_with_map(t, seg, cfg);
      const double L = static_cast<double>(t.frames.size());
      double casual = 0.0;
      for (Phase p : seg.labels) casual += p == C;
      const double f = casual / L;
      const double expected = f * L / factor + (1.0 - f) * L;
      EXPECT_LE(std::abs(out.traj.frames.size() - expected),
                static_cast<double>(seg.segments.size()));

      const std::set<int> kept(out.kept.begin(), out.kept.end());
      for (std::size_t i = 0; i < seg.labels.size(); ++i) {
        if (seg.labels[i] == P) EXPECT_TRUE(kept.count(static_cast<int>(i)));
      }
      for (std::size_t k = 0; k < out.kept.size(); ++k) {
        EXPECT_EQ(out.traj.frames[k].obs, t.frames[out.kept[k]].obs);
        EXPECT_EQ(out.traj.phase_labels[k], seg.labels[out.kept[k]]);
      }

      const double in_len = path_length(t, 0, static_cast<int>(L));
      const double out_len =
          path_length(out.traj, 0, static_cast<int>(out.traj.frames.size()));
      EXPECT_LE(out_len, in_len + 1e-9);
      EXPECT_GT(out_len, 0.9 * in_len);
    }
  }
}

TEST_F(SimTrajectories, ApplyRescalesHorizonAndKeepsSuccesses) {
  Dataset ds = data();
  ds.meta.horizon = 32;
  EspadaConfig cfg;
  cfg.factor = 4;
  const Dataset out = apply(ds, cfg);
  EXPECT_EQ(out.meta.horizon, 8);
  EXPECT_EQ(out.meta.espada_factor, 4);
  EXPECT_LT(out.num_frames(), ds.num_frames());
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    EXPECT_EQ(out.trajectories[i].success_frames.size(),
              ds.trajectories[i].success_frames.size());
  }
  EXPECT_NO_THROW(out.validate());
}

TEST(EspadaConfig, Validation) {
  EspadaConfig c;
  c.factor = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = EspadaConfig{};
  c.d_prec = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = EspadaConfig{};
  c.min_run = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace cycleflow::espada
