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

// Flow-matching action generation.
//
// Time convention: tau = 1 is pure noise, tau -> 0 is data. The training
// path is x_tau = tau * eps + (1 - tau) * a with constant target velocity
// u = eps - a, and sampling integrates x <- x - dtau * v from tau = 1 down
// to tau = tau_shift.

#ifndef CYCLEFLOW_FLOWMATCH_H_
#define CYCLEFLOW_FLOWMATCH_H_

#include <atomic>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "cycleflow/net.h"
#include "cycleflow/traj.h"

namespace cycleflow {

struct FlowConfig {
  int horizon = 32;
  int action_dim = 3;
  double beta_a = 1.5;
  double beta_b = 1.0;
  double tau_scale = 0.999;
  double tau_shift = 0.001;
  double p_masked = 0.1;
  int teacher_steps = 10;
  double action_clip = 1.0;
  // Assumed per-entry data scale for the network's input/skip/output
  // scalings; 0 disables them (raw MLP output is the velocity).
  double sigma_data = 0.5;

  void validate() const;
  // Length of the integrated tau interval, 1 - tau_shift.
  double span() const { return 1.0 - tau_shift; }
};

// Inverse-CDF sample of Beta(beta_a, 1), mapped affinely onto
// [tau_shift, tau_shift + tau_scale].
double sample_tau(double u, const FlowConfig& cfg);

struct Interpolant {
  Matrix x_tau;
  Matrix u_tau;
};

Interpolant interpolate(const Matrix& a, const Matrix& eps, double tau);

// Replaces the instruction by the null token iff u < p_masked.
Observation mask_instruction(const Observation& obs, double u,
                             double p_masked);

// v(o, x, tau) in the noise-direction convention above.
class VelocityField {
 public:
  virtual ~VelocityField() = default;
  virtual Matrix velocity(const Observation& obs, const Matrix& x,
                          double tau) const = 0;
  virtual int horizon() const = 0;
  virtual int action_dim() const = 0;
};

// Velocity network: an MLP over [state, instruction one-hot (null token
// last), flattened x, time embedding].
class FlowModel : public VelocityField {
 public:
  FlowModel() = default;
  FlowModel(int state_dim, int num_tasks, const FlowConfig& flow,
            std::vector<int> hidden_dims, Activation activation,
            std::uint64_t seed);
  FlowModel(const FlowModel& other);
  FlowModel& operator=(const FlowModel& other);

  Matrix velocity(const Observation& obs, const Matrix& x,
                  double tau) const override;
  int horizon() const override { return flow_.horizon; }
  int action_dim() const override { return flow_.action_dim; }

  int state_dim() const { return state_dim_; }
  int num_tasks() const { return num_tasks_; }
  int obs_feature_dim() const { return state_dim_ + num_tasks_ + 1; }
  const FlowConfig& flow() const { return flow_; }
  FlowConfig& mutable_flow() { return flow_; }
  const MlpSpec& spec() const { return spec_; }
  const TimeEmbedding& time_embedding() const { return temb_; }
  const ParamVector& params() const { return params_; }
  ParamVector& mutable_params() { return params_; }
  void set_params(ParamVector params);

  // Velocity = c_skip * x + c_out * mlp(obs, c_in * x, tau), with the
  // coefficients of the best linear predictor of eps - a from x_tau when
  // the chunk entries have scale sigma_data.
  struct Scalings {
    double c_in = 1.0;
    double c_skip = 0.0;
    double c_out = 1.0;
  };
  Scalings scalings(double tau) const;

  // Writes the network input row for (obs, x, tau).
  void encode(const Observation& obs, const Matrix& x, double tau,
              std::span<double> row) const;
  // Batched raw MLP forward over pre-encoded rows.
  Matrix forward_rows(const Matrix& rows, ForwardCache* cache) const;
  // Velocities from raw outputs; row i of `x_flat` is the flattened x_tau
  // of item i.
  Matrix combine_rows(const Matrix& raw, const Matrix& x_flat,
                      std::span<const double> taus) const;

  std::uint64_t forward_count() const { return forward_count_.load(); }
  void reset_forward_count() { forward_count_.store(0); }

 private:
  int state_dim_ = 0;
  int num_tasks_ = 0;
  FlowConfig flow_;
  MlpSpec spec_;
  TimeEmbedding temb_;
  ParamVector params_;
  mutable std::atomic<std::uint64_t> forward_count_{0};
};

struct FlowBatchItem {
  Observation obs;
  Matrix chunk;
  Matrix noise;
  double tau = 1.0;
  bool masked = false;
};

struct LossAndGrad {
  double loss = 0.0;
  ParamVector grads;
};

// Mean over rows of (1/(H d)) ||scale * v_i - target_i||^2 with v_i the
// model velocity for encoded row i, plus its parameter gradient.
LossAndGrad regress_velocity(const FlowModel& model, const Matrix& rows,
                             const Matrix& x_flat,
                             std::span<const double> taus,
                             const Matrix& targets, double scale = 1.0);

// Mean over the batch of (1/(H d)) ||v(o~, x_tau, tau) - u_tau||^2, with
// o~ the observation with its instruction nulled for masked items.
LossAndGrad fm_loss_and_grad(const FlowModel& model,
                             std::span<const FlowBatchItem> batch);

Matrix draw_noise(int horizon, int action_dim, std::uint64_t seed);

// Euler integration from eps at tau = 1 down to tau_shift, then clipped.
Matrix sample_chunk_from(const VelocityField& field, const Observation& obs,
                         const Matrix& noise, int steps,
                         const FlowConfig& cfg);
Matrix sample_chunk(const VelocityField& field, const Observation& obs,
                    int steps, std::uint64_t seed, const FlowConfig& cfg);

// All Euler states x_0 (= noise) ... x_steps, unclipped.
std::vector<Matrix> integrate_path(const VelocityField& field,
                                   const Observation& obs, const Matrix& noise,
                                   int steps, const FlowConfig& cfg);

struct TrainOptions {
  int steps = 2000;
  int batch_size = 64;
  AdamConfig adam;
  std::uint64_t seed = 0;
  // Loss is recorded every `log_every` steps (mean over the window).
  int log_every = 50;
  // Cosine decay of the learning rate down to final_lr_frac * lr.
  bool cosine_decay = false;
  double final_lr_frac = 0.1;

  // Learning rate in effect at optimizer step `step` (0-based).
  double lr_at(int step) const;
};

struct LossPoint {
  int step = 0;
  double loss = 0.0;
};

// Minimizes the flow-matching loss over all (o, a) windows of `data`.
// Returns the logged loss curve.
std::vector<LossPoint> train_flow_matching(FlowModel& model,
                                           const Dataset& data,
                                           const TrainOptions& opts);

}  // namespace cycleflow

#endif  // CYCLEFLOW_FLOWMATCH_H_
