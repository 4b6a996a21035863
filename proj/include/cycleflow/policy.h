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


// Concrete policies for the runner: the scripted expert, flow-model
// samplers (teacher or distilled student, optionally guided) and an idle
// baseline.

#ifndef CYCLEFLOW_POLICY_H_
#define CYCLEFLOW_POLICY_H_

#include <cstdint>
#include <random>

#include "cycleflow/flowmatch.h"
#include "cycleflow/guidance.h"
#include "cycleflow/runner.h"
#include "cycleflow/simenv.h"

namespace cycleflow {

// Replans every tick from the observation alone. Costs no inference time.
class ExpertPolicy : public Policy {
 public:
  ExpertPolicy(sim::ScriptedExpert expert, sim::WorldConfig world,
               bool noisy = false);
  ActionChunk act(const Observation& obs) override;
  int horizon() const override { return 1; }
  double inference_cost() const override { return 0.0; }
  void reset(std::uint64_t seed) override { rng_.seed(seed); }

 private:
  sim::ScriptedExpert expert_;
  sim::WorldConfig world_;
  bool noisy_;
  sim::Rng rng_;
};

// Holds position with the gripper open.
class IdlePolicy : public Policy {
 public:
  explicit IdlePolicy(int horizon = 8, double cost = 0.0)
      : horizon_(horizon), cost_(cost) {}
  ActionChunk act(const Observation& obs) override;
  int horizon() const override { return horizon_; }
  double inference_cost() const override { return cost_; }
  void reset(std::uint64_t) override {}

 private:
  int horizon_;
  double cost_;
};

struct FlowPolicyOptions {
  int steps = 10;
  GuidanceConfig guidance;
  double inference_cost = 0.25;
};

// Draws fresh noise from an internal stream on every call.
class FlowPolicy : public Policy {
 public:
  FlowPolicy(const VelocityField& field, const FlowConfig& flow,
             FlowPolicyOptions opts);
  ActionChunk act(const Observation& obs) override;
  int horizon() const override { return field_.horizon(); }
  double inference_cost() const override { return opts_.inference_cost; }
  void reset(std::uint64_t seed) override { rng_.seed(seed); }

 private:
  const VelocityField& base_;
  GuidedField field_;
  FlowConfig flow_;
  FlowPolicyOptions opts_;
  std::mt19937_64 rng_;
};

}  // namespace cycleflow

#endif  // CYCLEFLOW_POLICY_H_
