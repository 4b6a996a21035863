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

#include "cycleflow/traj.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cycleflow/error.h"

namespace cycleflow {

using nlohmann::json;

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::kPlay:
      return "play";
    case Regime::kNoncyclic:
      return "noncyclic";
    case Regime::kCyclic:
      return "cyclic";
  }
  return "?";
}

Regime regime_from_name(const std::string& name) {
  if (name == "play") return Regime::kPlay;
  if (name == "noncyclic") return Regime::kNoncyclic;
  if (name == "cyclic") return Regime::kCyclic;
  throw ArgumentError("unknown regime '" + name + "'");
}

std::size_t Dataset::num_frames() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.frames.size();
  return n;
}

void Dataset::validate() const {
  for (std::size_t ti = 0; ti < trajectories.size(); ++ti) {
    const auto& t = trajectories[ti];
    auto fail = [&](const std::string& what) {
      std::ostringstream os;
      os << "trajectory " << ti << ": " << what;
      throw DataError(os.str());
    };
    if (t.frames.empty()) fail("no frames");
    if (!t.phase_labels.empty() && t.phase_labels.size() != t.frames.size()) {
      fail("phase label count differs from frame count");
    }
    double prev_time = -INFINITY;
    for (std::size_t fi = 0; fi < t.frames.size(); ++fi) {
      const auto& f = t.frames[fi];
      if (meta.state_dim > 0 &&
          static_cast<int>(f.obs.state.size()) != meta.state_dim) {
        fail("frame " + std::to_string(fi) + " has wrong state dimension");
      }
      if (static_cast<int>(f.action.size()) != meta.action_dim) {
        fail("frame " + std::to_string(fi) + " has wrong action dimension");
      }
      for (double a : f.action) {
        if (!std::isfinite(a)) {
          fail("non-finite action at frame " + std::to_string(fi));
        }
      }
      if (f.obs.sim_time < prev_time) fail("sim_time decreases");
      prev_time = f.obs.sim_time;
      const int id = f.obs.instruction.task_id;
      if (regime == Regime::kPlay && id != InstructionTag::kNull) {
        fail("play data must carry the null instruction");
      }
      if (id != InstructionTag::kNull) {
        bool known = false;
        for (const auto& task : meta.tasks) known |= task.id == id;
        if (!known) fail("unregistered task id " + std::to_string(id));
      }
    }
    for (int s : t.success_frames) {
      if (s < 0 || s >= static_cast<int>(t.frames.size())) {
        fail("success annotation out of range");
      }
    }
    if (regime == Regime::kCyclic && t.success_frames.size() < 2) {
      fail("cyclic stream contains fewer than 2 completed cycles");
    }
  }
}

std::size_t num_windows(const Trajectory& traj, int horizon) {
  if (horizon < 1) throw ArgumentError("window horizon must be >= 1");
  const auto n = traj.frames.size();
  const auto h = static_cast<std::size_t>(horizon);
  return n >= h ? n - h + 1 : 0;
}

ActionChunk chunk_at(const Trajectory& traj, std::size_t start, int horizon) {
  const int d = static_cast<int>(traj.frames[start].action.size());
  ActionChunk c(horizon, d);
  for (int h = 0; h < horizon; ++h) {
    const auto& a = traj.frames[start + h].action;
    for (int j = 0; j < d; ++j) c(h, j) = a[j];
  }
  return c;
}

std::vector<ChunkPair> window_chunks(const Trajectory& traj, int horizon) {
  const std::size_t n = num_windows(traj, horizon);
  std::vector<ChunkPair> out;
  out.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    out.push_back({traj.frames[t].obs, chunk_at(traj, t, horizon)});
  }
  return out;
}

namespace {

json trajectory_to_json(const Trajectory& t) {
  json states = json::array(), actions = json::array(),
       instr = json::array(), times = json::array();
  for (const auto& f : t.frames) {
    states.push_back(f.obs.state);
    actions.push_back(f.action);
    instr.push_back(f.obs.instruction.task_id);
    times.push_back(f.obs.sim_time);
  }
  json j = {{"control_hz", t.control_hz},
            {"states", std::move(states)},
            {"actions", std::move(actions)},
            {"instructions", std::move(instr)},
            {"sim_time", std::move(times)},
            {"success_frames", t.success_frames}};
  if (t.phase_labels.empty()) {
    j["phase_labels"] = nullptr;
  } else {
    std::string labels;
    labels.reserve(t.phase_labels.size());
    for (Phase p : t.phase_labels) labels += p == Phase::kCasual ? 'C' : 'P';
    j["phase_labels"] = labels;
  }
  return j;
}

Trajectory trajectory_from_json(const json& j) {
  Trajectory t;
  t.control_hz = j.at("control_hz").get<double>();
  const auto& states = j.at("states");
  const auto& actions = j.at("actions");
  const auto& instr = j.at("instructions");
  const auto& times = j.at("sim_time");
  const std::size_t n = states.size();
  if (actions.size() != n || instr.size() != n || times.size() != n) {
    throw IoError("per-frame arrays have inconsistent lengths");
  }
  t.frames.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& f = t.frames[i];
    f.obs.state = states[i].get<std::vector<double>>();
    f.action = actions[i].get<std::vector<double>>();
    f.obs.instruction.task_id = instr[i].get<int>();
    f.obs.sim_time = times[i].get<double>();
  }
  t.success_frames = j.at("success_frames").get<std::vector<int>>();
  const auto& labels = j.at("phase_labels");
  if (!labels.is_null()) {
    for (char c : labels.get<std::string>()) {
      if (c != 'C' && c != 'P') throw IoError("bad phase label");
      t.phase_labels.push_back(c == 'C' ? Phase::kCasual : Phase::kPrecision);
    }
  }
  return t;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  json tasks = json::array();
  for (const auto& task : ds.meta.tasks) {
    tasks.push_back(
        {{"id", task.id}, {"name", task.name}, {"time_limit", task.time_limit}});
  }
  json header = {{"format", "cfds"},
                 {"version", kDatasetFormatVersion},
                 {"regime", regime_name(ds.regime)},
                 {"horizon", ds.meta.horizon},
                 {"action_dim", ds.meta.action_dim},
                 {"state_dim", ds.meta.state_dim},
                 {"control_hz", ds.meta.control_hz},
                 {"espada_factor", ds.meta.espada_factor},
                 {"tasks", std::move(tasks)},
                 {"num_trajectories", ds.trajectories.size()}};
  out << header.dump() << '\n';
  for (const auto& t : ds.trajectories) {
    out << trajectory_to_json(t).dump() << '\n';
  }
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) {
    throw IoError(path.string() + ": empty file (missing header record 0)");
  }
  Dataset ds;
  std::size_t expected = 0;
  try {
    const json h = json::parse(line);
    if (h.at("format").get<std::string>() != "cfds") {
      throw IoError("not a cfds file");
    }
    const int version = h.at("version").get<int>();
    if (version != kDatasetFormatVersion) {
      throw IoError("unsupported cfds version " + std::to_string(version));
    }
    ds.regime = regime_from_name(h.at("regime").get<std::string>());
    ds.meta.horizon = h.at("horizon").get<int>();
    ds.meta.action_dim = h.at("action_dim").get<int>();
    ds.meta.state_dim = h.at("state_dim").get<int>();
    ds.meta.control_hz = h.at("control_hz").get<double>();
    ds.meta.espada_factor = h.value("espada_factor", 1);
    for (const auto& tj : h.at("tasks")) {
      ds.meta.tasks.push_back({tj.at("id").get<int>(),
                               tj.at("name").get<std::string>(),
                               tj.at("time_limit").get<double>()});
    }
    expected = h.at("num_trajectories").get<std::size_t>();
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": malformed header (record 0): " +
                  e.what());
  } catch (const ArgumentError& e) {
    throw IoError(path.string() + ": header (record 0): " + e.what());
  } catch (const IoError& e) {
    throw IoError(path.string() + ": header (record 0): " + e.what());
  }
  std::size_t record = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++record;
    try {
      ds.trajectories.push_back(trajectory_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << path.string() << ": malformed trajectory record " << record
         << " (line " << record + 1 << "): " << e.what();
      throw IoError(os.str());
    }
  }
  if (ds.trajectories.size() != expected) {
    std::ostringstream os;
    os << path.string() << ": truncated, header announces " << expected
       << " trajectories but record " << ds.trajectories.size() + 1
       << " is missing";
    throw IoError(os.str());
  }
  ds.validate();
  return ds;
}

}  // namespace cycleflow
