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


#include "cycleflow/policy.h"

#include "cycleflow/error.h"

namespace cycleflow {

ExpertPolicy::ExpertPolicy(sim::ScriptedExpert expert, sim::WorldConfig world,
                           bool noisy)
    : expert_(expert), world_(world), noisy_(noisy) {}

ActionChunk ExpertPolicy::act(const Observation& obs) {
  if (obs.instruction.task_id == InstructionTag::kNull) {
    throw ArgumentError("expert policy needs a task instruction");
  }
  const sim::TaskSpec& task = sim::task_by_id(obs.instruction.task_id);
  const sim::WorldState state = sim::state_from_observation(obs, world_);
  const std::vector<double> a =
      sim::expert_policy(state, task, expert_, world_, noisy_ ? &rng_ : nullptr);
  ActionChunk chunk(1, static_cast<Eigen::Index>(a.size()));
  for (std::size_t j = 0; j < a.size(); ++j) chunk(0, j) = a[j];
  return chunk;
}

ActionChunk IdlePolicy::act(const Observation&) {
  ActionChunk chunk = ActionChunk::Zero(horizon_, 3);
  chunk.col(2).setOnes();
  return chunk;
}

FlowPolicy::FlowPolicy(const VelocityField& field, const FlowConfig& flow,
                       FlowPolicyOptions opts)
    : base_(field), field_(field, opts.guidance), flow_(flow), opts_(opts) {
  opts_.guidance.validate();
  if (opts_.steps < 1) throw ConfigError("flow policy: steps must be >= 1");
  if (!(opts_.inference_cost >= 0.0)) {
    throw ConfigError("flow policy: inference cost must be >= 0");
  }
}

ActionChunk FlowPolicy::act(const Observation& obs) {
  return sample_chunk(field_, obs, opts_.steps, rng_(), flow_);
}

}  // namespace cycleflow
