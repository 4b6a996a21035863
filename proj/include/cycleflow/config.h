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

// Experiment configuration shared by every CLI subcommand.
//
// The on-disk form is a single JSON document whose sections mirror the
// module configs. Every key has a default; a file only needs the keys it
// changes, and unknown keys are rejected so typos do not pass silently.

#ifndef CYCLEFLOW_CONFIG_H_
#define CYCLEFLOW_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cycleflow/distill.h"
#include "cycleflow/espada.h"
#include "cycleflow/flowmatch.h"
#include "cycleflow/guidance.h"
#include "cycleflow/net.h"
#include "cycleflow/runner.h"
#include "cycleflow/simenv.h"

namespace cycleflow {

inline constexpr const char* kSeedEnvVar = "CYCLEFLOW_SEED";

struct NetConfig {
  std::vector<int> hidden_dims{128, 128};
  Activation activation = Activation::kGeluApprox;
};

struct GenConfig {
  std::string regime = "cyclic";
  std::string task = "pick-place";
  double seconds = 600.0;
  int episodes = 0;
  int streams = 1;
  double p_fail = 0.1;
};

// Optimizer settings for flow-matching training.
struct TrainConfig {
  int steps = 10000;
  int batch_size = 64;
  double lr = 1e-3;
  int log_every = 100;
  bool cosine_decay = false;
  double final_lr_frac = 0.1;
};

struct DistillRunConfig {
  DistillConfig distill;
  int steps = 4000;
  int batch_size = 64;
  double lr = 3e-4;
  int log_every = 100;
  int items_per_refresh = 512;
  int refresh = 200;
};

struct EvalConfig {
  std::string task = "pick-place";
  int seeds = 3;
  // Inference cost per call; a negative value selects the default for the
  // checkpoint kind below.
  double inference_cost = -1.0;
  double teacher_cost = 0.25;
  double student_cost = 0.05;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  sim::WorldConfig world;
  sim::ScriptedExpert expert;
  GenConfig gen;
  FlowConfig flow;
  NetConfig net;
  TrainConfig train;
  espada::EspadaConfig espada;
  DistillRunConfig distill;
  GuidanceConfig guidance;
  RunConfig run;
  EvalConfig eval;

  // Throws ConfigError on the first invalid value.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
// Overlays `patch` on the defaults; unknown keys or ill-typed values throw
// ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& patch);
ExperimentConfig load_config(const std::filesystem::path& path);

// Seed from the environment override, if set and well-formed. Throws
// ConfigError when set but not a non-negative integer.
std::optional<std::uint64_t> seed_from_env();

// Defaults with the environment seed applied, then the file (if any).
ExperimentConfig resolve_config(
    const std::optional<std::filesystem::path>& file);

TrainOptions train_options(const ExperimentConfig& cfg, std::uint64_t seed);
DistillTrainOptions distill_options(const ExperimentConfig& cfg,
                                    std::uint64_t seed);

}  // namespace cycleflow

#endif  // CYCLEFLOW_CONFIG_H_
