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

#include "cycleflow/guidance.h"

#include "cycleflow/error.h"

namespace cycleflow {

void GuidanceConfig::validate() const {
  if (!(w >= 0.0)) throw ConfigError("guidance scale must be >= 0");
  if (!(eps > 0.0)) throw ConfigError("guidance eps must be > 0");
}

Matrix cfg_mix(const Matrix& v_cond, const Matrix& v_uncond, double w) {
  if (v_cond.rows() != v_uncond.rows() || v_cond.cols() != v_uncond.cols()) {
    throw ArgumentError("cfg_mix: shape mismatch");
  }
  // Same affine combination as v_uncond + w (v_cond - v_uncond), arranged so
  // that w = 1 and w = 0 reproduce the inputs bit for bit.
  return w * v_cond + (1.0 - w) * v_uncond;
}

Matrix rescale(const Matrix& v_cfg, const Matrix& v_cond, double eps) {
  if (v_cfg.rows() != v_cond.rows() || v_cfg.cols() != v_cond.cols()) {
    throw ArgumentError("rescale: shape mismatch");
  }
  return v_cfg * (v_cond.norm() / (v_cfg.norm() + eps));
}

Matrix guided_velocity(const VelocityField& model, const Observation& obs,
                       const Matrix& x, double tau, const GuidanceConfig& g) {
  Matrix v_cond = model.velocity(obs, x, tau);
  if (g.w == 1.0) return v_cond;
  Observation uncond = obs;
  uncond.instruction = InstructionTag::null();
  const Matrix v_uncond = model.velocity(uncond, x, tau);
  Matrix mixed = cfg_mix(v_cond, v_uncond, g.w);
  if (!g.rescale) return mixed;
  return rescale(mixed, v_cond, g.eps);
}

GuidedField::GuidedField(const VelocityField& base, GuidanceConfig g)
    : base_(base), g_(g) {
  g_.validate();
}

Matrix GuidedField::velocity(const Observation& obs, const Matrix& x,
                             double tau) const {
  return guided_velocity(base_, obs, x, tau, g_);
}

}  // namespace cycleflow
