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


#include "cycleflow/checkpoint.h"

#include <fstream>

#include <json.hpp>

#include "cycleflow/error.h"

namespace cycleflow {

using nlohmann::json;

namespace {

json flow_to_json(const FlowConfig& f) {
  return {{"horizon", f.horizon},           {"action_dim", f.action_dim},
          {"beta_a", f.beta_a},             {"beta_b", f.beta_b},
          {"tau_scale", f.tau_scale},       {"tau_shift", f.tau_shift},
          {"p_masked", f.p_masked},         {"teacher_steps", f.teacher_steps},
          {"action_clip", f.action_clip}, {"sigma_data", f.sigma_data}};
}

FlowConfig flow_from_json(const json& j) {
  FlowConfig f;
  f.horizon = j.at("horizon").get<int>();
  f.action_dim = j.at("action_dim").get<int>();
  f.beta_a = j.at("beta_a").get<double>();
  f.beta_b = j.at("beta_b").get<double>();
  f.tau_scale = j.at("tau_scale").get<double>();
  f.tau_shift = j.at("tau_shift").get<double>();
  f.p_masked = j.at("p_masked").get<double>();
  f.teacher_steps = j.at("teacher_steps").get<int>();
  f.action_clip = j.at("action_clip").get<double>();
  f.sigma_data = j.at("sigma_data").get<double>();
  return f;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const FlowModel& m = ckpt.model;
  if (!m.params().all_finite()) {
    throw TrainingError("refusing to save non-finite parameters");
  }
  json j;
  j["format"] = "cycleflow-checkpoint";
  j["format_version"] = kCheckpointFormatVersion;
  j["kind"] = ckpt.kind;
  j["stage"] = ckpt.stage;
  j["regime"] = ckpt.regime;
  j["espada_factor"] = ckpt.espada_factor;
  j["sample_steps"] = ckpt.sample_steps;
  j["teacher_hash"] = ckpt.teacher_hash;
  j["state_dim"] = m.state_dim();
  j["num_tasks"] = m.num_tasks();
  j["flow"] = flow_to_json(m.flow());
  j["spec"] = {{"input_dim", m.spec().input_dim},
               {"hidden_dims", m.spec().hidden_dims},
               {"output_dim", m.spec().output_dim},
               {"activation", activation_name(m.spec().activation)}};
  j["params"] = m.params().values;
  if (ckpt.optimizer) {
    const auto& o = *ckpt.optimizer;
    j["optimizer"] = {{"step", o.step},
                      {"lr", o.config.lr},
                      {"beta1", o.config.beta1},
                      {"beta2", o.config.beta2},
                      {"eps", o.config.eps},
                      {"first_moment", o.first_moment},
                      {"second_moment", o.second_moment}};
  } else {
    j["optimizer"] = nullptr;
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  Checkpoint c;
  try {
    const json j = json::parse(in);
    if (j.at("format").get<std::string>() != "cycleflow-checkpoint") {
      throw IoError("not a checkpoint");
    }
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw IoError("unsupported checkpoint format_version " +
                    std::to_string(version));
    }
    c.kind = j.at("kind").get<std::string>();
    if (c.kind != "teacher" && c.kind != "student") {
      throw IoError("unknown checkpoint kind '" + c.kind + "'");
    }
    c.stage = j.at("stage").get<std::string>();
    c.regime = j.at("regime").get<std::string>();
    c.espada_factor = j.at("espada_factor").get<int>();
    c.sample_steps = j.at("sample_steps").get<int>();
    c.teacher_hash = j.at("teacher_hash").get<std::string>();
    const auto& s = j.at("spec");
    MlpSpec spec;
    spec.input_dim = s.at("input_dim").get<int>();
    spec.hidden_dims = s.at("hidden_dims").get<std::vector<int>>();
    spec.output_dim = s.at("output_dim").get<int>();
    spec.activation =
        activation_from_name(s.at("activation").get<std::string>());
    c.model = FlowModel(j.at("state_dim").get<int>(),
                        j.at("num_tasks").get<int>(),
                        flow_from_json(j.at("flow")), spec.hidden_dims,
                        spec.activation, 0);
    if (!(c.model.spec() == spec)) {
      throw IoError("stored network spec does not match the flow config");
    }
    ParamVector p = ParamVector::zeros(spec);
    const auto& values = j.at("params");
    if (values.size() != p.size()) {
      throw IoError("expected " + std::to_string(p.size()) +
                    " parameters, found " + std::to_string(values.size()));
    }
    p.values = values.get<std::vector<double>>();
    c.model.set_params(std::move(p));
    const auto& o = j.at("optimizer");
    if (!o.is_null()) {
      OptimizerState st;
      st.step = o.at("step").get<std::int64_t>();
      st.config.lr = o.at("lr").get<double>();
      st.config.beta1 = o.at("beta1").get<double>();
      st.config.beta2 = o.at("beta2").get<double>();
      st.config.eps = o.at("eps").get<double>();
      st.first_moment = o.at("first_moment").get<std::vector<double>>();
      st.second_moment = o.at("second_moment").get<std::vector<double>>();
      if (st.first_moment.size() != c.model.params().size() ||
          st.second_moment.size() != c.model.params().size()) {
        throw IoError("optimizer moments do not match parameter count");
      }
      c.optimizer = std::move(st);
    }
  } catch (const json::exception& e) {
    throw IoError("corrupt checkpoint " + path.string() + ": " + e.what());
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw IoError("corrupt checkpoint " + path.string() + ": " + e.what());
  }
  return c;
}

}  // namespace cycleflow
