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

// Phase-adaptive demonstration downsampling.
//
// Frames near an object or target, or with a moving gripper aperture, are
// "precision"; everything else is "casual" transit. Casual stretches are
// compressed by a factor N while precision frames keep their density, and
// the chunk horizon shrinks to ceil(H / N).

#ifndef CYCLEFLOW_ESPADA_H_
#define CYCLEFLOW_ESPADA_H_

#include <string>
#include <vector>

#include "cycleflow/traj.h"

namespace cycleflow::espada {

enum class CompressMode {
  // Intervening displacement rows are summed into the kept row.
  kSum,
  // Ablation: kept rows keep their own action, the rest is discarded.
  kDrop,
};

struct EspadaConfig {
  int factor = 4;
  // Gripper to object/target-center distance below which a frame is
  // precision. Default: 1.5 x object radius + 0.035 reach margin.
  double d_prec = 0.08;
  int min_run = 3;
  double disp_tol = 0.10;
  CompressMode mode = CompressMode::kSum;

  void validate() const;
};

struct Segment {
  Phase phase = Phase::kCasual;
  int start = 0;
  int end = 0;  // exclusive

  bool operator==(const Segment&) const = default;
};

struct PhaseSegmentation {
  std::vector<Phase> labels;
  std::vector<Segment> segments;
};

// Run-length encoding of a label sequence.
std::vector<Segment> runs_of(const std::vector<Phase>& labels);

// Interior runs shorter than min_run flip to the surrounding phase until
// none remain. Runs touching either end of the trajectory are kept.
std::vector<Phase> smooth_labels(std::vector<Phase> labels, int min_run);

// Raw per-frame rule before smoothing.
std::vector<Phase> raw_labels(const Trajectory& traj, const EspadaConfig& cfg);

PhaseSegmentation segment_phases(const Trajectory& traj,
                                 const EspadaConfig& cfg);

struct Downsampled {
  Trajectory traj;
  // Original index of every kept frame.
  std::vector<int> kept;
};

// Replicate-before-downsample: precision frames are replicated N times,
// casual frames once, and every N-th entry of the expanded sequence is kept.
Downsampled downsample_with_map(const Trajectory& traj,
                                const PhaseSegmentation& seg,
                                const EspadaConfig& cfg);
Trajectory downsample(const Trajectory& traj, const PhaseSegmentation& seg,
                      const EspadaConfig& cfg);

int rescale_horizon(int horizon, int factor);

struct DisplacementReport {
  double orig_sum = 0.0;
  double ds_sum = 0.0;
  double rel_err = 0.0;
  bool pass = false;
};

// Compares sums of translational row norms (gripper channel excluded).
DisplacementReport displacement_check(const ActionChunk& orig_window,
                                      const ActionChunk& ds_window,
                                      double tol);

// Sum of translational row norms over frames [begin, end).
double path_length(const Trajectory& traj, int begin, int end);

// Applies segmentation + downsampling to every trajectory of a dataset and
// rescales the recorded horizon.
Dataset apply(const Dataset& ds, const EspadaConfig& cfg);

// JSON segmentation/compression report for one trajectory.
std::string report_json(const Trajectory& traj, const PhaseSegmentation& seg,
                        const Downsampled& out, int index);

}  // namespace cycleflow::espada

#endif  // CYCLEFLOW_ESPADA_H_
