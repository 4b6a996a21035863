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

#include "cycleflow/flowmatch.h"

#include <cmath>
#include <sstream>

#include "cycleflow/error.h"

namespace cycleflow {

void FlowConfig::validate() const {
  if (horizon < 1 || action_dim < 1) {
    throw ConfigError("flow config: horizon and action_dim must be >= 1");
  }
  if (beta_a <= 0.0) throw ConfigError("flow config: beta_a must be > 0");
  if (beta_b != 1.0) {
    throw ConfigError("flow config: only Beta(a, 1) tau sampling is supported");
  }
  if (!(p_masked >= 0.0 && p_masked <= 1.0)) {
    throw ConfigError("flow config: p_masked must lie in [0, 1]");
  }
  if (tau_shift <= 0.0 || tau_scale <= 0.0 || tau_scale + tau_shift > 1.0) {
    throw ConfigError("flow config: tau mapping must stay inside (0, 1]");
  }
  if (teacher_steps < 1) throw ConfigError("flow config: teacher_steps < 1");
  if (action_clip <= 0.0) throw ConfigError("flow config: action_clip <= 0");
  if (!(sigma_data >= 0.0)) throw ConfigError("flow config: sigma_data < 0");
}

double sample_tau(double u, const FlowConfig& cfg) {
  if (!(u >= 0.0 && u <= 1.0)) {
    throw ArgumentError("sample_tau: u must lie in [0, 1]");
  }
  return cfg.tau_scale * std::pow(u, 1.0 / cfg.beta_a) + cfg.tau_shift;
}

Interpolant interpolate(const Matrix& a, const Matrix& eps, double tau) {
  if (a.rows() != eps.rows() || a.cols() != eps.cols()) {
    throw ArgumentError("interpolate: chunk and noise shapes differ");
  }
  return {tau * eps + (1.0 - tau) * a, eps - a};
}

Observation mask_instruction(const Observation& obs, double u,
                             double p_masked) {
  Observation out = obs;
  if (u < p_masked) out.instruction = InstructionTag::null();
  return out;
}

FlowModel::FlowModel(int state_dim, int num_tasks, const FlowConfig& flow,
                     std::vector<int> hidden_dims, Activation activation,
                     std::uint64_t seed)
    : state_dim_(state_dim), num_tasks_(num_tasks), flow_(flow) {
  flow_.validate();
  if (state_dim < 1 || num_tasks < 0) {
    throw ConfigError("flow model: bad state_dim / num_tasks");
  }
  const int hd = flow_.horizon * flow_.action_dim;
  spec_.input_dim = obs_feature_dim() + hd + temb_.dim();
  spec_.hidden_dims = std::move(hidden_dims);
  spec_.output_dim = hd;
  spec_.activation = activation;
  params_ = init_params(spec_, seed);
}

FlowModel::FlowModel(const FlowModel& other)
    : state_dim_(other.state_dim_),
      num_tasks_(other.num_tasks_),
      flow_(other.flow_),
      spec_(other.spec_),
      temb_(other.temb_),
      params_(other.params_) {}

FlowModel& FlowModel::operator=(const FlowModel& other) {
  if (this != &other) {
    state_dim_ = other.state_dim_;
    num_tasks_ = other.num_tasks_;
    flow_ = other.flow_;
    spec_ = other.spec_;
    temb_ = other.temb_;
    params_ = other.params_;
    forward_count_.store(0);
  }
  return *this;
}

void FlowModel::set_params(ParamVector params) {
  check_params(spec_, params);
  params_ = std::move(params);
}

void FlowModel::encode(const Observation& obs, const Matrix& x, double tau,
                       std::span<double> row) const {
  if (static_cast<int>(obs.state.size()) != state_dim_) {
    std::ostringstream os;
    os << "observation state has " << obs.state.size()
       << " entries, model expects " << state_dim_;
    throw ConfigError(os.str());
  }
  if (x.rows() != flow_.horizon || x.cols() != flow_.action_dim) {
    throw ConfigError("noisy chunk shape does not match model horizon/dim");
  }
  std::size_t k = 0;
  for (double s : obs.state) row[k++] = s;
  const int id = obs.instruction.task_id;
  if (!obs.instruction.is_null() && (id < 0 || id >= num_tasks_)) {
    throw ConfigError("instruction task id out of range for model");
  }
  const int slot = obs.instruction.is_null() ? num_tasks_ : id;
  for (int i = 0; i <= num_tasks_; ++i) row[k++] = i == slot ? 1.0 : 0.0;
  const double c_in = scalings(tau).c_in;
  for (Eigen::Index i = 0; i < x.size(); ++i) row[k++] = c_in * x.data()[i];
  temb_.embed(tau, row.subspan(k, temb_.dim()));
}

FlowModel::Scalings FlowModel::scalings(double tau) const {
  const double s = flow_.sigma_data;
  if (s == 0.0) return {};
  const double var_x = tau * tau + (1.0 - tau) * (1.0 - tau) * s * s;
  const double c_in = 1.0 / std::sqrt(var_x);
  return {c_in, (tau - (1.0 - tau) * s * s) / var_x, s * c_in};
}

Matrix FlowModel::combine_rows(const Matrix& raw, const Matrix& x_flat,
                               std::span<const double> taus) const {
  Matrix v(raw.rows(), raw.cols());
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const Scalings c = scalings(taus[i]);
    v.row(i) = c.c_skip * x_flat.row(i) + c.c_out * raw.row(i);
  }
  return v;
}

Matrix FlowModel::forward_rows(const Matrix& rows, ForwardCache* cache) const {
  forward_count_.fetch_add(static_cast<std::uint64_t>(rows.rows()));
  return forward_batch(spec_, params_, rows, cache);
}

Matrix FlowModel::velocity(const Observation& obs, const Matrix& x,
                           double tau) const {
  Matrix row(1, spec_.input_dim);
  encode(obs, x, tau, {row.data(), static_cast<std::size_t>(row.size())});
  const Matrix raw = forward_rows(row, nullptr);
  const Scalings c = scalings(tau);
  Matrix v = c.c_out * Eigen::Map<const Matrix>(raw.data(), flow_.horizon,
                                                flow_.action_dim);
  if (c.c_skip != 0.0) v += c.c_skip * x;
  return v;
}

LossAndGrad regress_velocity(const FlowModel& model, const Matrix& rows,
                             const Matrix& x_flat,
                             std::span<const double> taus,
                             const Matrix& targets, double scale) {
  ForwardCache cache;
  const Matrix raw = model.forward_rows(rows, &cache);
  const Matrix resid = scale * model.combine_rows(raw, x_flat, taus) - targets;
  const double b = static_cast<double>(rows.rows());
  const double hd = static_cast<double>(targets.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < resid.rows(); ++i) {
    total += resid.row(i).squaredNorm() / hd;
  }
  LossAndGrad out{total / b, ParamVector::zeros(model.spec())};
  if (!std::isfinite(out.loss)) {
    throw TrainingError("regression loss is not finite");
  }
  Matrix grad_raw = resid * (2.0 * scale / (b * hd));
  for (Eigen::Index i = 0; i < grad_raw.rows(); ++i) {
    grad_raw.row(i) *= model.scalings(taus[i]).c_out;
  }
  backward_batch(model.spec(), model.params(), cache, grad_raw, &out.grads);
  return out;
}

LossAndGrad fm_loss_and_grad(const FlowModel& model,
                             std::span<const FlowBatchItem> batch) {
  if (batch.empty()) throw ArgumentError("fm_loss_and_grad: empty batch");
  const int hd = model.horizon() * model.action_dim();
  Matrix rows(static_cast<Eigen::Index>(batch.size()), model.spec().input_dim);
  Matrix targets(static_cast<Eigen::Index>(batch.size()), hd);
  Matrix xs(static_cast<Eigen::Index>(batch.size()), hd);
  std::vector<double> taus(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& item = batch[i];
    const Interpolant path = interpolate(item.chunk, item.noise, item.tau);
    const Observation obs =
        item.masked ? mask_instruction(item.obs, 0.0, 1.0) : item.obs;
    model.encode(obs, path.x_tau, item.tau,
                 {rows.row(i).data(), static_cast<std::size_t>(rows.cols())});
    targets.row(i) = Eigen::Map<const Eigen::RowVectorXd>(path.u_tau.data(), hd);
    xs.row(i) = Eigen::Map<const Eigen::RowVectorXd>(path.x_tau.data(), hd);
    taus[i] = item.tau;
  }
  return regress_velocity(model, rows, xs, taus, targets);
}

Matrix draw_noise(int horizon, int action_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix eps(horizon, action_dim);
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = n(rng);
  return eps;
}

std::vector<Matrix> integrate_path(const VelocityField& field,
                                   const Observation& obs, const Matrix& noise,
                                   int steps, const FlowConfig& cfg) {
  if (steps < 1) throw ArgumentError("sampler needs at least one step");
  const double dtau = cfg.span() / steps;
  std::vector<Matrix> path;
  path.reserve(steps + 1);
  path.push_back(noise);
  Matrix x = noise;
  for (int j = 0; j < steps; ++j) {
    const double tau = 1.0 - j * dtau;
    x -= dtau * field.velocity(obs, x, tau);
    if (!x.allFinite()) {
      std::ostringstream os;
      os << "sampler state became non-finite at step " << j;
      throw SamplingError(os.str());
    }
    path.push_back(x);
  }
  return path;
}

Matrix sample_chunk_from(const VelocityField& field, const Observation& obs,
                         const Matrix& noise, int steps,
                         const FlowConfig& cfg) {
  Matrix x = integrate_path(field, obs, noise, steps, cfg).back();
  return x.cwiseMax(-cfg.action_clip).cwiseMin(cfg.action_clip);
}

Matrix sample_chunk(const VelocityField& field, const Observation& obs,
                    int steps, std::uint64_t seed, const FlowConfig& cfg) {
  return sample_chunk_from(
      field, obs, draw_noise(field.horizon(), field.action_dim(), seed), steps,
      cfg);
}

double TrainOptions::lr_at(int step) const {
  if (!cosine_decay || steps <= 1) return adam.lr;
  const double progress = static_cast<double>(step) / (steps - 1);
  const double c = 0.5 * (1.0 + std::cos(M_PI * progress));
  return adam.lr * (final_lr_frac + (1.0 - final_lr_frac) * c);
}

std::vector<LossPoint> train_flow_matching(FlowModel& model,
                                           const Dataset& data,
                                           const TrainOptions& opts) {
  const FlowConfig& cfg = model.flow();
  const int horizon = cfg.horizon;
  const int d = cfg.action_dim;
  if (data.meta.action_dim != d) {
    throw ConfigError("dataset action_dim does not match model");
  }
  struct WindowRef {
    std::uint32_t traj;
    std::uint32_t start;
  };
  std::vector<WindowRef> windows;
  for (std::size_t t = 0; t < data.trajectories.size(); ++t) {
    const std::size_t n = num_windows(data.trajectories[t], horizon);
    for (std::size_t s = 0; s < n; ++s) {
      windows.push_back(
          {static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(s)});
    }
  }
  if (windows.empty()) {
    throw DataError("dataset has no trajectory of length >= horizon");
  }
  if (opts.batch_size < 1 || opts.steps < 0) {
    throw ConfigError("train options: batch_size >= 1 and steps >= 0");
  }

  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<std::size_t> pick(0, windows.size() - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  OptimizerState opt = OptimizerState::for_params(model.params(), opts.adam);

  const int hd = horizon * d;
  const int b = opts.batch_size;
  Matrix rows(b, model.spec().input_dim);
  Matrix targets(b, hd);
  Matrix xs(b, hd);
  std::vector<double> taus(b);
  Matrix chunk(horizon, d), eps(horizon, d);
  std::vector<LossPoint> curve;
  double window_sum = 0.0;
  int window_n = 0;
  for (int step = 0; step < opts.steps; ++step) {
    for (int i = 0; i < b; ++i) {
      const WindowRef w = windows[pick(rng)];
      const Trajectory& traj = data.trajectories[w.traj];
      for (int h = 0; h < horizon; ++h) {
        const auto& a = traj.frames[w.start + h].action;
        for (int j = 0; j < d; ++j) chunk(h, j) = a[j];
      }
      for (Eigen::Index k = 0; k < eps.size(); ++k) {
        eps.data()[k] = normal(rng);
      }
      const double tau = sample_tau(unif(rng), cfg);
      const Observation obs = mask_instruction(traj.frames[w.start].obs,
                                               unif(rng), cfg.p_masked);
      const Interpolant path = interpolate(chunk, eps, tau);
      model.encode(obs, path.x_tau, tau,
                   {rows.row(i).data(), static_cast<std::size_t>(rows.cols())});
      targets.row(i) =
          Eigen::Map<const Eigen::RowVectorXd>(path.u_tau.data(), hd);
      xs.row(i) = Eigen::Map<const Eigen::RowVectorXd>(path.x_tau.data(), hd);
      taus[i] = tau;
    }
    LossAndGrad lg = regress_velocity(model, rows, xs, taus, targets);
    opt.config.lr = opts.lr_at(step);
    optimizer_step(opt, model.mutable_params(), lg.grads);
    window_sum += lg.loss;
    ++window_n;
    if (window_n == opts.log_every || step + 1 == opts.steps) {
      curve.push_back({step + 1, window_sum / window_n});
      window_sum = 0.0;
      window_n = 0;
    }
  }
  return curve;
}

}  // namespace cycleflow
