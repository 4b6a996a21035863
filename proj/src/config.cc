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

#include "cycleflow/config.h"

#include <cstdlib>
#include <fstream>
#include <string>

#include "cycleflow/error.h"

namespace cycleflow {

using nlohmann::json;

namespace {

json vec2(const sim::Vec2& v) { return json::array({v.x(), v.y()}); }

sim::Vec2 vec2_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

json box(const sim::Box2& b) { return {{"lo", vec2(b.lo)}, {"hi", vec2(b.hi)}}; }

sim::Box2 box_from(const json& j) {
  return {vec2_from(j.at("lo")), vec2_from(j.at("hi"))};
}

// Every key of `patch` must exist in `base` with a compatible type; objects
// are checked recursively. Arrays replace wholesale.
void check_keys(const json& base, const json& patch, const std::string& at) {
  if (!patch.is_object()) {
    throw ConfigError("config: " + (at.empty() ? "document" : at) +
                      " must be an object");
  }
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = at.empty() ? it.key() : at + "." + it.key();
    if (!base.contains(it.key())) {
      throw ConfigError("config: unknown key '" + key + "'");
    }
    const json& b = base.at(it.key());
    if (b.is_object()) {
      check_keys(b, it.value(), key);
    } else if (b.is_number() != it.value().is_number() ||
               b.is_boolean() != it.value().is_boolean() ||
               b.is_string() != it.value().is_string() ||
               b.is_array() != it.value().is_array() ||
               (b.is_number_integer() && !it.value().is_number_integer())) {
      throw ConfigError("config: wrong type for '" + key + "'");
    }
  }
}

}  // namespace

json to_json(const ExperimentConfig& c) {
  const auto& w = c.world;
  const auto& e = c.expert;
  const auto& f = c.flow;
  const auto& d = c.distill;
  return {
      {"seed", c.seed},
      {"world",
       {{"control_hz", w.control_hz},
        {"workspace", box(w.workspace)},
        {"object_radius", w.object_radius},
        {"grasp_dist", w.grasp_dist},
        {"max_step", w.max_step},
        {"action_clip", w.action_clip},
        {"aperture_rate", w.aperture_rate},
        {"home", vec2(w.home)},
        {"spawn_region", box(w.spawn_region)},
        {"drift_region", box(w.drift_region)},
        {"bin_center", vec2(w.bin_center)},
        {"bin_radius", w.bin_radius},
        {"box_center", vec2(w.box_center)},
        {"box_radius", w.box_radius},
        {"conveyor_period", w.conveyor_period},
        {"conveyor_open_fraction", w.conveyor_open_fraction}}},
      {"expert",
       {{"v_fast", e.v_fast},
        {"v_slow", e.v_slow},
        {"approach_dist", e.approach_dist},
        {"noise_scale", e.noise_scale},
        {"reach_tol", e.reach_tol}}},
      {"gen",
       {{"regime", c.gen.regime},
        {"task", c.gen.task},
        {"seconds", c.gen.seconds},
        {"episodes", c.gen.episodes},
        {"streams", c.gen.streams},
        {"p_fail", c.gen.p_fail}}},
      {"flow",
       {{"horizon", f.horizon},
        {"action_dim", f.action_dim},
        {"beta_a", f.beta_a},
        {"beta_b", f.beta_b},
        {"tau_scale", f.tau_scale},
        {"tau_shift", f.tau_shift},
        {"p_masked", f.p_masked},
        {"teacher_steps", f.teacher_steps},
        {"action_clip", f.action_clip},
        {"sigma_data", f.sigma_data}}},
      {"net",
       {{"hidden_dims", c.net.hidden_dims},
        {"activation", activation_name(c.net.activation)}}},
      {"train",
       {{"steps", c.train.steps},
        {"batch_size", c.train.batch_size},
        {"lr", c.train.lr},
        {"log_every", c.train.log_every},
        {"cosine_decay", c.train.cosine_decay},
        {"final_lr_frac", c.train.final_lr_frac}}},
      {"espada",
       {{"factor", c.espada.factor},
        {"d_prec", c.espada.d_prec},
        {"min_run", c.espada.min_run},
        {"disp_tol", c.espada.disp_tol},
        {"mode", c.espada.mode == espada::CompressMode::kSum ? "sum" : "drop"}}},
      {"distill",
       {{"teacher_steps", d.distill.teacher_steps},
        {"student_steps", d.distill.student_steps},
        {"pairs_per_obs", d.distill.pairs_per_obs},
        {"steps", d.steps},
        {"batch_size", d.batch_size},
        {"lr", d.lr},
        {"log_every", d.log_every},
        {"items_per_refresh", d.items_per_refresh},
        {"refresh", d.refresh}}},
      {"guidance",
       {{"w", c.guidance.w},
        {"rescale", c.guidance.rescale},
        {"eps", c.guidance.eps}}},
      {"run",
       {{"duration", c.run.duration},
        {"exec_horizon", c.run.exec_horizon},
        {"consec_interventions_for_rerandomize",
         c.run.consec_interventions_for_rerandomize},
        {"reset_cost", c.run.reset_cost},
        {"maintenance_cost", c.run.maintenance_cost},
        {"mode", c.run.mode == RunMode::kContinuous ? "continuous" : "single"},
        {"episodes", c.run.episodes}}},
      {"eval",
       {{"task", c.eval.task},
        {"seeds", c.eval.seeds},
        {"inference_cost", c.eval.inference_cost},
        {"teacher_cost", c.eval.teacher_cost},
        {"student_cost", c.eval.student_cost}}},
  };
}

ExperimentConfig config_from_json(const json& patch) {
  ExperimentConfig c;
  json j = to_json(c);
  check_keys(j, patch, "");
  j.merge_patch(patch);
  try {
    c.seed = j.at("seed").get<std::uint64_t>();
    const json& w = j.at("world");
    c.world.control_hz = w.at("control_hz");
    c.world.workspace = box_from(w.at("workspace"));
    c.world.object_radius = w.at("object_radius");
    c.world.grasp_dist = w.at("grasp_dist");
    c.world.max_step = w.at("max_step");
    c.world.action_clip = w.at("action_clip");
    c.world.aperture_rate = w.at("aperture_rate");
    c.world.home = vec2_from(w.at("home"));
    c.world.spawn_region = box_from(w.at("spawn_region"));
    c.world.drift_region = box_from(w.at("drift_region"));
    c.world.bin_center = vec2_from(w.at("bin_center"));
    c.world.bin_radius = w.at("bin_radius");
    c.world.box_center = vec2_from(w.at("box_center"));
    c.world.box_radius = w.at("box_radius");
    c.world.conveyor_period = w.at("conveyor_period");
    c.world.conveyor_open_fraction = w.at("conveyor_open_fraction");

    const json& e = j.at("expert");
    c.expert.v_fast = e.at("v_fast");
    c.expert.v_slow = e.at("v_slow");
    c.expert.approach_dist = e.at("approach_dist");
    c.expert.noise_scale = e.at("noise_scale");
    c.expert.reach_tol = e.at("reach_tol");

    const json& g = j.at("gen");
    c.gen.regime = g.at("regime");
    c.gen.task = g.at("task");
    c.gen.seconds = g.at("seconds");
    c.gen.episodes = g.at("episodes");
    c.gen.streams = g.at("streams");
    c.gen.p_fail = g.at("p_fail");

    const json& f = j.at("flow");
    c.flow.horizon = f.at("horizon");
    c.flow.action_dim = f.at("action_dim");
    c.flow.beta_a = f.at("beta_a");
    c.flow.beta_b = f.at("beta_b");
    c.flow.tau_scale = f.at("tau_scale");
    c.flow.tau_shift = f.at("tau_shift");
    c.flow.p_masked = f.at("p_masked");
    c.flow.teacher_steps = f.at("teacher_steps");
    c.flow.action_clip = f.at("action_clip");
    c.flow.sigma_data = f.at("sigma_data");

    const json& n = j.at("net");
    c.net.hidden_dims = n.at("hidden_dims").get<std::vector<int>>();
    c.net.activation = activation_from_name(n.at("activation"));

    const json& t = j.at("train");
    c.train.steps = t.at("steps");
    c.train.batch_size = t.at("batch_size");
    c.train.lr = t.at("lr");
    c.train.log_every = t.at("log_every");
    c.train.cosine_decay = t.at("cosine_decay");
    c.train.final_lr_frac = t.at("final_lr_frac");

    const json& es = j.at("espada");
    c.espada.factor = es.at("factor");
    c.espada.d_prec = es.at("d_prec");
    c.espada.min_run = es.at("min_run");
    c.espada.disp_tol = es.at("disp_tol");
    const std::string mode = es.at("mode");
    if (mode != "sum" && mode != "drop") {
      throw ConfigError("config: espada.mode must be sum or drop");
    }
    c.espada.mode =
        mode == "sum" ? espada::CompressMode::kSum : espada::CompressMode::kDrop;

    const json& d = j.at("distill");
    c.distill.distill.teacher_steps = d.at("teacher_steps");
    c.distill.distill.student_steps = d.at("student_steps");
    c.distill.distill.pairs_per_obs = d.at("pairs_per_obs");
    c.distill.steps = d.at("steps");
    c.distill.batch_size = d.at("batch_size");
    c.distill.lr = d.at("lr");
    c.distill.log_every = d.at("log_every");
    c.distill.items_per_refresh = d.at("items_per_refresh");
    c.distill.refresh = d.at("refresh");

    const json& gd = j.at("guidance");
    c.guidance.w = gd.at("w");
    c.guidance.rescale = gd.at("rescale");
    c.guidance.eps = gd.at("eps");

    const json& r = j.at("run");
    c.run.duration = r.at("duration");
    c.run.exec_horizon = r.at("exec_horizon");
    c.run.consec_interventions_for_rerandomize =
        r.at("consec_interventions_for_rerandomize");
    c.run.reset_cost = r.at("reset_cost");
    c.run.maintenance_cost = r.at("maintenance_cost");
    const std::string rmode = r.at("mode");
    if (rmode != "continuous" && rmode != "single") {
      throw ConfigError("config: run.mode must be continuous or single");
    }
    c.run.mode =
        rmode == "continuous" ? RunMode::kContinuous : RunMode::kSingleTrial;
    c.run.episodes = r.at("episodes");

    const json& ev = j.at("eval");
    c.eval.task = ev.at("task");
    c.eval.seeds = ev.at("seeds");
    c.eval.inference_cost = ev.at("inference_cost");
    c.eval.teacher_cost = ev.at("teacher_cost");
    c.eval.student_cost = ev.at("student_cost");
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  } catch (const ArgumentError& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  }
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  flow.validate();
  espada.validate();
  distill.distill.validate();
  guidance.validate();
  if (world.control_hz <= 0.0) throw ConfigError("config: control_hz <= 0");
  try {
    regime_from_name(gen.regime);
    sim::task_by_name(gen.task);
    sim::task_by_name(eval.task);
    MlpSpec{1, net.hidden_dims, 1, net.activation}.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (gen.seconds <= 0.0 && gen.episodes <= 0) {
    throw ConfigError("config: gen needs seconds > 0 or episodes > 0");
  }
  if (gen.streams < 1) throw ConfigError("config: gen.streams must be >= 1");
  if (!(gen.p_fail >= 0.0 && gen.p_fail <= 1.0)) {
    throw ConfigError("config: gen.p_fail must lie in [0, 1]");
  }
  if (train.steps < 1 || train.batch_size < 1 || train.log_every < 1) {
    throw ConfigError("config: train steps, batch_size, log_every must be >= 1");
  }
  if (!(train.lr > 0.0)) throw ConfigError("config: train.lr must be > 0");
  if (distill.steps < 1 || distill.batch_size < 1 || distill.log_every < 1 ||
      distill.items_per_refresh < 1 || distill.refresh < 0) {
    throw ConfigError("config: invalid distill schedule");
  }
  if (!(distill.lr > 0.0)) throw ConfigError("config: distill.lr must be > 0");
  if (!(run.duration > 0.0)) throw ConfigError("config: run.duration must be > 0");
  if (run.exec_horizon < 0) {
    throw ConfigError("config: run.exec_horizon must be >= 0");
  }
  if (run.consec_interventions_for_rerandomize < 1) {
    throw ConfigError("config: consec_interventions_for_rerandomize < 1");
  }
  if (run.reset_cost < 0.0 || run.maintenance_cost < 0.0) {
    throw ConfigError("config: reset costs must be >= 0");
  }
  if (run.episodes < 1) throw ConfigError("config: run.episodes must be >= 1");
  if (eval.seeds < 1) throw ConfigError("config: eval.seeds must be >= 1");
  if (eval.teacher_cost < 0.0 || eval.student_cost < 0.0) {
    throw ConfigError("config: inference costs must be >= 0");
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::optional<std::uint64_t> seed_from_env() {
  const char* v = std::getenv(kSeedEnvVar);
  if (v == nullptr || *v == '\0') return std::nullopt;
  const std::string s(v);
  if (s.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError(std::string(kSeedEnvVar) + " must be a non-negative integer");
  }
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw ConfigError(std::string(kSeedEnvVar) + " is out of range");
  }
}

ExperimentConfig resolve_config(
    const std::optional<std::filesystem::path>& file) {
  json patch = json::object();
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot open config file " + file->string());
    try {
      patch = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config file " + file->string() + ": " + e.what());
    }
    if (!patch.is_object()) throw ConfigError("config: document must be an object");
  }
  // The environment replaces the built-in default seed only.
  if (const auto s = seed_from_env(); s && !patch.contains("seed")) {
    patch["seed"] = *s;
  }
  return config_from_json(patch);
}

TrainOptions train_options(const ExperimentConfig& cfg, std::uint64_t seed) {
  TrainOptions o;
  o.steps = cfg.train.steps;
  o.batch_size = cfg.train.batch_size;
  o.adam.lr = cfg.train.lr;
  o.seed = seed;
  o.log_every = cfg.train.log_every;
  o.cosine_decay = cfg.train.cosine_decay;
  o.final_lr_frac = cfg.train.final_lr_frac;
  return o;
}

DistillTrainOptions distill_options(const ExperimentConfig& cfg,
                                    std::uint64_t seed) {
  DistillTrainOptions o;
  o.distill = cfg.distill.distill;
  o.train.steps = cfg.distill.steps;
  o.train.batch_size = cfg.distill.batch_size;
  o.train.adam.lr = cfg.distill.lr;
  o.train.seed = seed;
  o.train.log_every = cfg.distill.log_every;
  o.items_per_refresh = cfg.distill.items_per_refresh;
  o.refresh = cfg.distill.refresh;
  return o;
}

}  // namespace cycleflow
