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

#include "cycleflow/distill.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "cycleflow/error.h"

namespace cycleflow {

void DistillConfig::validate() const {
  if (teacher_steps < 2) throw ConfigError("distill: teacher_steps must be >= 2");
  if (student_steps < 1) throw ConfigError("distill: student_steps must be >= 1");
  if (pairs_per_obs < 1) throw ConfigError("distill: pairs_per_obs must be >= 1");
}

double tau_of_progress(double s, const FlowConfig& cfg) {
  return 1.0 - cfg.span() * s;
}

std::vector<DistillItem> make_distill_items(const VelocityField& teacher,
                                            const Observation& obs,
                                            const DistillConfig& cfg,
                                            const FlowConfig& flow,
                                            std::uint64_t seed) {
  cfg.validate();
  const Matrix noise =
      draw_noise(teacher.horizon(), teacher.action_dim(), seed);
  std::vector<Matrix> path;
  try {
    path = integrate_path(teacher, obs, noise, cfg.teacher_steps, flow);
  } catch (const SamplingError& e) {
    throw TrainingError(std::string("teacher rollout failed: ") + e.what());
  }
  const int n = cfg.teacher_steps;
  // Progress draws use a stream separate from the noise.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<DistillItem> items;
  items.reserve(cfg.pairs_per_obs);
  for (int p = 0; p < cfg.pairs_per_obs; ++p) {
    const double s_raw = std::min(unif(rng), cfg.s_cap());
    const int j = std::clamp(static_cast<int>(std::lround(s_raw * n)), 0,
                             n - 1);
    const double s = static_cast<double>(j) / n;
    DistillItem item;
    item.obs = obs;
    item.s = s;
    item.x_s = path[j];
    item.x_1 = path[n];
    item.target = (item.x_1 - item.x_s) / (1.0 - s);
    if (!item.target.allFinite()) {
      throw TrainingError("distillation target is not finite");
    }
    items.push_back(std::move(item));
  }
  return items;
}

LossAndGrad distill_loss_and_grad(const FlowModel& student,
                                  std::span<const DistillItem> items) {
  if (items.empty()) throw ArgumentError("distill_loss_and_grad: no items");
  const FlowConfig& flow = student.flow();
  const double span = flow.span();
  const int hd = student.horizon() * student.action_dim();
  const auto b = static_cast<Eigen::Index>(items.size());
  Matrix rows(b, student.spec().input_dim);
  Matrix targets(b, hd);
  Matrix xs(b, hd);
  std::vector<double> taus(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto& it = items[i];
    taus[i] = tau_of_progress(it.s, flow);
    student.encode(it.obs, it.x_s, taus[i],
                   {rows.row(i).data(), static_cast<std::size_t>(rows.cols())});
    targets.row(i) = Eigen::Map<const Eigen::RowVectorXd>(it.target.data(), hd);
    xs.row(i) = Eigen::Map<const Eigen::RowVectorXd>(it.x_s.data(), hd);
  }
  // Progress velocity g = dx/ds = -span * v.
  LossAndGrad out = regress_velocity(student, rows, xs, taus, targets, -span);
  if (!std::isfinite(out.loss)) {
    throw TrainingError("distillation loss is not finite");
  }
  return out;
}

Matrix student_sample(const VelocityField& student, const Observation& obs,
                      std::uint64_t seed, const FlowConfig& flow, int steps) {
  const Matrix noise =
      draw_noise(student.horizon(), student.action_dim(), seed);
  return sample_chunk_from(student, obs, noise, steps, flow);
}

std::vector<LossPoint> train_distillation(
    FlowModel& student, const FlowModel& teacher,
    std::span<const Observation> observations, const DistillTrainOptions& opts,
    DistillSanity* sanity) {
  opts.distill.validate();
  if (observations.empty()) {
    throw DataError("distillation needs at least one observation");
  }
  if (!(student.spec() == teacher.spec())) {
    throw ConfigError("student and teacher architectures differ");
  }
  const FlowConfig& flow = teacher.flow();
  std::mt19937_64 rng(opts.train.seed);
  std::uniform_int_distribution<std::size_t> pick_obs(0,
                                                      observations.size() - 1);
  OptimizerState opt =
      OptimizerState::for_params(student.params(), opts.train.adam);

  std::vector<DistillItem> pool;
  auto refill = [&]() {
    pool.clear();
    while (static_cast<int>(pool.size()) < opts.items_per_refresh) {
      const Observation& o = observations[pick_obs(rng)];
      auto items = make_distill_items(teacher, o, opts.distill, flow, rng());
      for (auto& it : items) pool.push_back(std::move(it));
    }
  };
  refill();
  if (sanity) {
    sanity->teacher_self_loss = distill_loss_and_grad(teacher, pool).loss;
    sanity->student_initial_loss = distill_loss_and_grad(student, pool).loss;
  }

  std::uniform_int_distribution<std::size_t> pick_item(0, pool.size() - 1);
  std::vector<DistillItem> batch(opts.train.batch_size);
  std::vector<LossPoint> curve;
  double window_sum = 0.0;
  int window_n = 0;
  for (int step = 0; step < opts.train.steps; ++step) {
    if (step > 0 && opts.refresh > 0 && step % opts.refresh == 0) refill();
    for (auto& it : batch) it = pool[pick_item(rng)];
    LossAndGrad lg = distill_loss_and_grad(student, batch);
    opt.config.lr = opts.train.lr_at(step);
    optimizer_step(opt, student.mutable_params(), lg.grads);
    window_sum += lg.loss;
    ++window_n;
    if (window_n == opts.train.log_every || step + 1 == opts.train.steps) {
      curve.push_back({step + 1, window_sum / window_n});
      window_sum = 0.0;
      window_n = 0;
    }
  }
  return curve;
}

}  // namespace cycleflow
