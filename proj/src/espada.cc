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

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "cycleflow/error.h"
#include "cycleflow/simenv.h"

namespace cycleflow::espada {

namespace si = sim::state_index;

void EspadaConfig::validate() const {
  if (factor < 1) throw ConfigError("espada: factor N must be >= 1");
  if (!(d_prec > 0.0)) throw ConfigError("espada: d_prec must be > 0");
  if (min_run < 1) throw ConfigError("espada: min_run must be >= 1");
  if (!(disp_tol >= 0.0)) throw ConfigError("espada: disp_tol must be >= 0");
}

std::vector<Segment> runs_of(const std::vector<Phase>& labels) {
  std::vector<Segment> out;
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
    if (out.empty() || out.back().phase != labels[i]) {
      out.push_back({labels[i], i, i + 1});
    } else {
      out.back().end = i + 1;
    }
  }
  return out;
}

std::vector<Phase> smooth_labels(std::vector<Phase> labels, int min_run) {
  for (;;) {
    const auto runs = runs_of(labels);
    int victim = -1;
    for (int r = 1; r + 1 < static_cast<int>(runs.size()); ++r) {
      const int len = runs[r].end - runs[r].start;
      if (len < min_run &&
          (victim < 0 || len < runs[victim].end - runs[victim].start)) {
        victim = r;
      }
    }
    if (victim < 0) return labels;
    const Phase flipped = runs[victim].phase == Phase::kCasual
                              ? Phase::kPrecision
                              : Phase::kCasual;
    for (int i = runs[victim].start; i < runs[victim].end; ++i) {
      labels[i] = flipped;
    }
  }
}

std::vector<Phase> raw_labels(const Trajectory& traj, const EspadaConfig& cfg) {
  const int n = static_cast<int>(traj.frames.size());
  std::vector<Phase> labels(n, Phase::kCasual);
  for (int i = 0; i < n; ++i) {
    const auto& s = traj.frames[i].obs.state;
    if (static_cast<int>(s.size()) < si::kDim) {
      throw DataError("segmentation: frame " + std::to_string(i) +
                      " lacks gripper/object state");
    }
    double nearest = std::hypot(s[si::kBinRelX], s[si::kBinRelY]);
    nearest = std::min(nearest, std::hypot(s[si::kBoxRelX], s[si::kBoxRelY]));
    if (s[si::kHeld] < 0.5) {
      nearest = std::min(nearest,
                         std::hypot(s[si::kObjectRelX], s[si::kObjectRelY]));
    }
    auto aperture = [&](int k) {
      return traj.frames[k].obs.state[si::kAperture];
    };
    const bool aperture_moving =
        (i + 1 < n && aperture(i + 1) != aperture(i)) ||
        (i > 0 && aperture(i - 1) != aperture(i));
    if (nearest < cfg.d_prec || aperture_moving) labels[i] = Phase::kPrecision;
  }
  return labels;
}

PhaseSegmentation segment_phases(const Trajectory& traj,
                                 const EspadaConfig& cfg) {
  cfg.validate();
  PhaseSegmentation seg;
  seg.labels = smooth_labels(raw_labels(traj, cfg), cfg.min_run);
  seg.segments = runs_of(seg.labels);
  return seg;
}

Downsampled downsample_with_map(const Trajectory& traj,
                                const PhaseSegmentation& seg,
                                const EspadaConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(traj.frames.size());
  if (static_cast<int>(seg.labels.size()) != n) {
    throw ArgumentError("downsample: segmentation does not match trajectory");
  }
  const long factor = cfg.factor;
  Downsampled out;
  long pos = 0;
  for (int i = 0; i < n; ++i) {
    const long weight = seg.labels[i] == Phase::kPrecision ? factor : 1;
    // Is there a multiple of N in [pos, pos + weight)?
    const long next_multiple = (pos + factor - 1) / factor * factor;
    if (next_multiple < pos + weight) out.kept.push_back(i);
    pos += weight;
  }
  // Endpoints of precision segments are always retained; with the expansion
  // above they already are, this keeps the guarantee explicit.
  for (const auto& s : seg.segments) {
    if (s.phase != Phase::kPrecision) continue;
    for (int idx : {s.start, s.end - 1}) {
      if (!std::binary_search(out.kept.begin(), out.kept.end(), idx)) {
        out.kept.insert(
            std::upper_bound(out.kept.begin(), out.kept.end(), idx), idx);
      }
    }
  }

  Trajectory& t = out.traj;
  t.control_hz = traj.control_hz;
  const bool labelled = !seg.labels.empty();
  const int k_count = static_cast<int>(out.kept.size());
  for (int k = 0; k < k_count; ++k) {
    const int begin = out.kept[k];
    const int end = k + 1 < k_count ? out.kept[k + 1] : n;
    Frame f = traj.frames[begin];
    if (cfg.mode == CompressMode::kSum) {
      for (int j = 0; j < 2 && j < static_cast<int>(f.action.size()); ++j) {
        double sum = 0.0;
        for (int i = begin; i < end; ++i) sum += traj.frames[i].action[j];
        f.action[j] = sum;
      }
    }
    t.frames.push_back(std::move(f));
    if (labelled) t.phase_labels.push_back(seg.labels[begin]);
  }
  for (int s : traj.success_frames) {
    const auto it = std::upper_bound(out.kept.begin(), out.kept.end(), s);
    const int k = static_cast<int>(it - out.kept.begin()) - 1;
    if (k >= 0 && (t.success_frames.empty() || t.success_frames.back() != k)) {
      t.success_frames.push_back(k);
    }
  }
  return out;
}

Trajectory downsample(const Trajectory& traj, const PhaseSegmentation& seg,
                      const EspadaConfig& cfg) {
  return downsample_with_map(traj, seg, cfg).traj;
}

int rescale_horizon(int horizon, int factor) {
  if (horizon < 1 || factor < 1) {
    throw ArgumentError("rescale_horizon: H and N must be >= 1");
  }
  return (horizon + factor - 1) / factor;
}

namespace {

double translational_sum(const ActionChunk& w) {
  double s = 0.0;
  const int cols = std::min<int>(2, static_cast<int>(w.cols()));
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    s += w.row(r).head(cols).norm();
  }
  return s;
}

}  // namespace

DisplacementReport displacement_check(const ActionChunk& orig_window,
                                      const ActionChunk& ds_window,
                                      double tol) {
  DisplacementReport r;
  r.orig_sum = translational_sum(orig_window);
  r.ds_sum = translational_sum(ds_window);
  const double diff = std::abs(r.ds_sum - r.orig_sum);
  if (r.orig_sum > 0.0) {
    r.rel_err = diff / r.orig_sum;
  } else {
    r.rel_err = diff > 0.0 ? INFINITY : 0.0;
  }
  r.pass = diff <= tol * r.orig_sum;
  return r;
}

double path_length(const Trajectory& traj, int begin, int end) {
  double s = 0.0;
  for (int i = begin; i < end; ++i) {
    const auto& a = traj.frames[i].action;
    s += std::hypot(a[0], a[1]);
  }
  return s;
}

Dataset apply(const Dataset& ds, const EspadaConfig& cfg) {
  cfg.validate();
  Dataset out;
  out.regime = ds.regime;
  out.meta = ds.meta;
  out.meta.horizon = rescale_horizon(ds.meta.horizon, cfg.factor);
  out.meta.espada_factor = ds.meta.espada_factor * cfg.factor;
  for (const auto& t : ds.trajectories) {
    out.trajectories.push_back(downsample(t, segment_phases(t, cfg), cfg));
  }
  out.validate();
  return out;
}

std::string report_json(const Trajectory& traj, const PhaseSegmentation& seg,
                        const Downsampled& out, int index) {
  using nlohmann::json;
  json segs = json::array();
  int casual = 0;
  for (const auto& s : seg.segments) {
    segs.push_back({{"phase", s.phase == Phase::kCasual ? "casual" : "precision"},
                    {"start", s.start},
                    {"end", s.end}});
    if (s.phase == Phase::kCasual) casual += s.end - s.start;
  }
  const int n = static_cast<int>(traj.frames.size());
  json j = {{"trajectory", index},
            {"frames_in", n},
            {"frames_out", out.traj.frames.size()},
            {"casual_fraction", n > 0 ? static_cast<double>(casual) / n : 0.0},
            {"path_length_in", path_length(traj, 0, n)},
            {"path_length_out",
             path_length(out.traj, 0,
                         static_cast<int>(out.traj.frames.size()))},
            {"segments", std::move(segs)}};
  return j.dump();
}

}  // namespace cycleflow::espada
