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

#ifndef CYCLEFLOW_GUIDANCE_H_
#define CYCLEFLOW_GUIDANCE_H_

#include "cycleflow/flowmatch.h"

namespace cycleflow {

struct GuidanceConfig {
  double w = 1.0;
  bool rescale = true;
  double eps = 1e-6;

  void validate() const;
};

// v_uncond + w (v_cond - v_uncond)
Matrix cfg_mix(const Matrix& v_cond, const Matrix& v_uncond, double w);

// v_cfg * ||v_cond|| / (||v_cfg|| + eps), Frobenius norms over the chunk.
Matrix rescale(const Matrix& v_cfg, const Matrix& v_cond, double eps);

// Conditional and instruction-free evaluations mixed by cfg_mix, then
// optionally rescaled. w == 1 returns the plain conditional evaluation.
Matrix guided_velocity(const VelocityField& model, const Observation& obs,
                       const Matrix& x, double tau, const GuidanceConfig& g);

// Wraps a field so that every evaluation inside a sampler is guided.
class GuidedField : public VelocityField {
 public:
  GuidedField(const VelocityField& base, GuidanceConfig g);

  Matrix velocity(const Observation& obs, const Matrix& x,
                  double tau) const override;
  int horizon() const override { return base_.horizon(); }
  int action_dim() const override { return base_.action_dim(); }

 private:
  const VelocityField& base_;
  GuidanceConfig g_;
};

}  // namespace cycleflow

#endif  // CYCLEFLOW_GUIDANCE_H_
