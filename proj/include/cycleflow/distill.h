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

// Rectified-flow distillation of a multi-step teacher into a few-step
// student.
//
// Distillation is phrased in the integration progress s = (1 - tau) / span,
// which runs from 0 (noise) to 1 (teacher terminal chunk x_1). The target
// for a teacher state x_s is the secant (x_1 - x_s) / (1 - s). A network in
// the noise-direction convention of flowmatch.h realizes the progress
// velocity g = -span * v(o, x, tau(s)), so the student starts as an exact
// copy of the teacher and a two-step student sample is a two-step Euler
// integration of its own field.

#ifndef CYCLEFLOW_DISTILL_H_
#define CYCLEFLOW_DISTILL_H_

#include <cstdint>
#include <span>
#include <vector>

#include "cycleflow/flowmatch.h"

namespace cycleflow {

struct DistillConfig {
  int teacher_steps = 10;
  int student_steps = 2;
  int pairs_per_obs = 4;

  void validate() const;
  // Largest progress value used for targets, keeping (1 - s) away from 0.
  double s_cap() const { return 1.0 - 1.0 / teacher_steps; }
};

// Items carry teacher rollouts only; no demonstration actions.
struct DistillItem {
  Observation obs;
  double s = 0.0;
  Matrix x_s;
  Matrix x_1;
  Matrix target;
};

double tau_of_progress(double s, const FlowConfig& cfg);

// One full teacher rollout from the noise drawn for `seed`, then
// `pairs_per_obs` progress values drawn uniformly on [0, 1), capped at
// s_cap() and snapped to the nearest teacher grid point.
std::vector<DistillItem> make_distill_items(const VelocityField& teacher,
                                            const Observation& obs,
                                            const DistillConfig& cfg,
                                            const FlowConfig& flow,
                                            std::uint64_t seed);

// Mean over items of (1/(H d)) ||g_student(o, x_s, s) - target||^2.
LossAndGrad distill_loss_and_grad(const FlowModel& student,
                                  std::span<const DistillItem> items);

// Few-step Euler sample in progress time from the noise drawn for `seed`
// (the same noise the teacher would use for that seed), then clipped.
Matrix student_sample(const VelocityField& student, const Observation& obs,
                      std::uint64_t seed, const FlowConfig& flow,
                      int steps = 2);

struct DistillTrainOptions {
  TrainOptions train;
  DistillConfig distill;
  // Items are regenerated from fresh teacher rollouts every `refresh`
  // optimizer steps.
  int items_per_refresh = 512;
  int refresh = 200;
};

// Initial distillation loss of the student copy vs. teacher self-consistency,
// recorded once per run.
struct DistillSanity {
  double student_initial_loss = 0.0;
  double teacher_self_loss = 0.0;
};

// Trains `student` (normally a copy of `teacher`) on teacher rollouts at the
// given observations.
std::vector<LossPoint> train_distillation(
    FlowModel& student, const FlowModel& teacher,
    std::span<const Observation> observations, const DistillTrainOptions& opts,
    DistillSanity* sanity = nullptr);

}  // namespace cycleflow

#endif  // CYCLEFLOW_DISTILL_H_
