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

#include "cycleflow/runner.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cycleflow/error.h"

namespace cycleflow {

using nlohmann::json;

const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::kCycleStart:
      return "cycle_start";
    case EventKind::kSuccess:
      return "success";
    case EventKind::kTimeout:
      return "timeout";
    case EventKind::kAbort:
      return "abort";
    case EventKind::kMaintenance:
      return "maintenance_reset";
  }
  return "?";
}

EventKind event_kind_from_name(const std::string& name) {
  for (EventKind k : {EventKind::kCycleStart, EventKind::kSuccess,
                      EventKind::kTimeout, EventKind::kAbort,
                      EventKind::kMaintenance}) {
    if (name == event_kind_name(k)) return k;
  }
  throw IoError("unknown run event kind '" + name + "'");
}

RunTotals fold_events(const std::vector<RunEvent>& events, double elapsed) {
  RunTotals t;
  for (const auto& e : events) {
    switch (e.kind) {
      case EventKind::kSuccess:
        ++t.n_succ;
        break;
      case EventKind::kTimeout:
        ++t.k_timeout;
        break;
      case EventKind::kAbort:
        ++t.k_abort;
        break;
      case EventKind::kMaintenance:
        ++t.maintenance;
        break;
      case EventKind::kCycleStart:
        break;
    }
  }
  t.elapsed = elapsed;
  return t;
}

void RunLog::check_totals() const {
  if (!(fold_events(events, totals.elapsed) == totals)) {
    throw DataError("run log totals disagree with its events");
  }
}

namespace {

long to_ticks(double seconds, double hz, const char* what) {
  const double raw = seconds * hz;
  const long ticks = std::lround(raw);
  if (seconds < 0.0 || std::abs(raw - ticks) > 1e-6) {
    std::ostringstream os;
    os << what << " (" << seconds
       << " s) must be a non-negative whole number of control ticks";
    throw ConfigError(os.str());
  }
  return ticks;
}

bool chunk_ok(const ActionChunk& chunk, int k) {
  return chunk.rows() >= k && chunk.cols() >= 1 && chunk.allFinite();
}

}  // namespace

ChunkResult execute_chunk(sim::WorldState& state, const ActionChunk& chunk,
                          int k, const sim::TaskSpec& task,
                          const sim::WorldConfig& cfg) {
  if (k < 0 || k > chunk.rows()) {
    throw ArgumentError("execute_chunk: k exceeds chunk horizon");
  }
  ChunkResult r;
  for (int i = 0; i < k; ++i) {
    state = sim::step(state, {chunk.row(i).data(),
                              static_cast<std::size_t>(chunk.cols())},
                      cfg);
    ++r.executed;
    if (sim::check_success(state, task)) {
      r.success = true;
      break;
    }
  }
  r.elapsed = r.executed / cfg.control_hz;
  return r;
}

RunLog run_continuous(Policy& policy, const sim::TaskSpec& task,
                      const sim::WorldConfig& world, const RunConfig& cfg) {
  const double hz = world.control_hz;
  const double cost =
      cfg.inference_cost >= 0.0 ? cfg.inference_cost : policy.inference_cost();
  const long total_ticks = to_ticks(cfg.duration, hz, "run duration");
  const long limit_ticks = to_ticks(task.time_limit, hz, "time limit");
  const long infer_ticks = to_ticks(cost, hz, "inference cost");
  const long reset_ticks = to_ticks(cfg.reset_cost, hz, "reset cost");
  const long maint_ticks =
      to_ticks(cfg.maintenance_cost, hz, "maintenance cost");
  if (total_ticks <= 0) throw ConfigError("run duration must be > 0");
  const int k = cfg.exec_horizon > 0 ? cfg.exec_horizon : policy.horizon();
  if (k < 1 || k > policy.horizon()) {
    throw ConfigError("exec horizon must satisfy 1 <= k <= chunk horizon");
  }
  if (cfg.consec_interventions_for_rerandomize < 1) {
    throw ConfigError("maintenance threshold must be >= 1");
  }

  RunLog log;
  log.task = task.name;
  log.seed = cfg.seed;
  log.control_hz = hz;
  log.time_limit = task.time_limit;
  log.exec_horizon = k;
  log.inference_cost = cost;
  log.config = cfg;

  policy.reset(cfg.seed);
  sim::Rng rng(cfg.seed);
  sim::WorldState state = sim::make_world(world, rng);
  const InstructionTag instr = InstructionTag::task(task.id);
  const double dt = world.dt();

  long now = 0;
  long cycle_start = 0;
  int cycle = 0;
  int consec = 0;
  auto time_of = [&](long ticks) { return ticks / hz; };
  log.events.push_back({EventKind::kCycleStart, 0.0, 0});

  enum class Outcome { kNone, kSuccess, kTimeout, kAbort, kEnd };
  auto after_tick = [&]() {
    if (sim::check_success(state, task)) return Outcome::kSuccess;
    if (now - cycle_start >= limit_ticks) return Outcome::kTimeout;
    if (now >= total_ticks) return Outcome::kEnd;
    return Outcome::kNone;
  };
  auto charge_reset = [&](long ticks) {
    for (long i = 0; i < ticks && now < total_ticks; ++i) {
      sim::advance_time(state, dt);
      ++now;
      ++log.budget.reset_ticks;
    }
  };

  while (now < total_ticks) {
    Outcome outcome = Outcome::kNone;
    ActionChunk chunk;
    bool fault = false;
    try {
      chunk = policy.act(sim::observe(state, instr, world));
      fault = !chunk_ok(chunk, k);
    } catch (const SamplingError&) {
      fault = true;
    }
    ++log.budget.inference_calls;
    for (long i = 0; i < infer_ticks; ++i) {
      sim::advance_time(state, dt);
      ++now;
      ++log.budget.inference_ticks;
      outcome = after_tick();
      if (outcome != Outcome::kNone) break;
    }
    if (outcome == Outcome::kNone && fault) outcome = Outcome::kAbort;
    for (int r = 0; outcome == Outcome::kNone && r < k; ++r) {
      state = sim::step(state,
                        {chunk.row(r).data(),
                         static_cast<std::size_t>(chunk.cols())},
                        world);
      ++now;
      ++log.budget.executed_ticks;
      outcome = after_tick();
    }

    switch (outcome) {
      case Outcome::kNone:
        break;
      case Outcome::kEnd:
        break;
      case Outcome::kSuccess:
        log.events.push_back({EventKind::kSuccess, time_of(now), cycle});
        consec = 0;
        state = sim::respawn(state, task, rng, sim::RespawnCause::kSuccess,
                             world);
        ++cycle;
        cycle_start = now;
        if (now < total_ticks) {
          log.events.push_back({EventKind::kCycleStart, time_of(now), cycle});
        }
        break;
      case Outcome::kTimeout:
      case Outcome::kAbort: {
        log.events.push_back({outcome == Outcome::kTimeout ? EventKind::kTimeout
                                                           : EventKind::kAbort,
                              time_of(now), cycle});
        ++consec;
        state = sim::respawn(state, task, rng,
                             sim::RespawnCause::kIntervention, world);
        // An abort may happen before any time has passed; charging it at
        // least one tick keeps a faulting policy from stalling the clock.
        const long floor_ticks = outcome == Outcome::kAbort ? 1 : 0;
        if (consec >= cfg.consec_interventions_for_rerandomize) {
          log.events.push_back({EventKind::kMaintenance, time_of(now), cycle});
          consec = 0;
          charge_reset(std::max(maint_ticks, floor_ticks));
        } else {
          charge_reset(std::max(reset_ticks, floor_ticks));
        }
        ++cycle;
        cycle_start = now;
        if (now < total_ticks) {
          log.events.push_back({EventKind::kCycleStart, time_of(now), cycle});
        }
        break;
      }
    }
  }
  log.totals = fold_events(log.events, time_of(now));
  return log;
}

std::vector<bool> run_single_trial(Policy& policy, const sim::TaskSpec& task,
                                   const sim::WorldConfig& world, int episodes,
                                   std::uint64_t seed, const RunConfig& cfg) {
  if (episodes < 1) throw ArgumentError("single trial needs episodes >= 1");
  const double hz = world.control_hz;
  const double cost =
      cfg.inference_cost >= 0.0 ? cfg.inference_cost : policy.inference_cost();
  const long limit_ticks = to_ticks(task.time_limit, hz, "time limit");
  const long infer_ticks = to_ticks(cost, hz, "inference cost");
  const int k = cfg.exec_horizon > 0 ? cfg.exec_horizon : policy.horizon();
  if (k < 1 || k > policy.horizon()) {
    throw ConfigError("exec horizon must satisfy 1 <= k <= chunk horizon");
  }
  const InstructionTag instr = InstructionTag::task(task.id);
  std::vector<bool> flags;
  flags.reserve(episodes);
  for (int ep = 0; ep < episodes; ++ep) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(ep)};
    sim::Rng rng(seq);
    policy.reset(rng());
    sim::WorldState state = sim::make_world(world, rng);
    long now = 0;
    bool success = false;
    bool failed = false;
    while (!success && !failed && now < limit_ticks) {
      ActionChunk chunk;
      try {
        chunk = policy.act(sim::observe(state, instr, world));
      } catch (const SamplingError&) {
        failed = true;
        break;
      }
      for (long i = 0; i < infer_ticks && now < limit_ticks && !success;
           ++i) {
        sim::advance_time(state, world.dt());
        ++now;
        success = sim::check_success(state, task);
      }
      if (success || now >= limit_ticks) break;
      if (!chunk_ok(chunk, k)) {
        failed = true;
        break;
      }
      const int budget = static_cast<int>(
          std::min<long>(k, limit_ticks - now));
      const ChunkResult r = execute_chunk(state, chunk, budget, task, world);
      now += r.executed;
      success = r.success;
    }
    flags.push_back(success);
  }
  return flags;
}

namespace {

json config_to_json(const RunConfig& c) {
  return {{"duration", c.duration},
          {"exec_horizon", c.exec_horizon},
          {"inference_cost", c.inference_cost},
          {"consec_interventions_for_rerandomize",
           c.consec_interventions_for_rerandomize},
          {"reset_cost", c.reset_cost},
          {"maintenance_cost", c.maintenance_cost},
          {"mode", c.mode == RunMode::kContinuous ? "continuous" : "single"},
          {"episodes", c.episodes},
          {"seed", c.seed}};
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  c.duration = j.at("duration").get<double>();
  c.exec_horizon = j.at("exec_horizon").get<int>();
  c.inference_cost = j.at("inference_cost").get<double>();
  c.consec_interventions_for_rerandomize =
      j.at("consec_interventions_for_rerandomize").get<int>();
  c.reset_cost = j.at("reset_cost").get<double>();
  c.maintenance_cost = j.at("maintenance_cost").get<double>();
  c.mode = j.at("mode").get<std::string>() == "continuous"
               ? RunMode::kContinuous
               : RunMode::kSingleTrial;
  c.episodes = j.at("episodes").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::string run_stem(const RunLog& log) {
  std::ostringstream os;
  os << log.method << "__" << log.regime << "__" << log.task << "__seed"
     << log.seed;
  return os.str();
}

void save_run_log(const RunLog& log, const std::filesystem::path& events_path,
                  const std::filesystem::path& summary_path) {
  {
    std::ofstream out(events_path);
    if (!out) throw IoError("cannot write " + events_path.string());
    for (const auto& e : log.events) {
      out << json{{"kind", event_kind_name(e.kind)},
                  {"t", e.sim_time},
                  {"cycle", e.cycle_index}}
                 .dump()
          << '\n';
    }
  }
  json summary = {
      {"format_version", 1},
      {"method", log.method},
      {"regime", log.regime},
      {"task", log.task},
      {"seed", log.seed},
      {"control_hz", log.control_hz},
      {"time_limit", log.time_limit},
      {"exec_horizon", log.exec_horizon},
      {"inference_cost", log.inference_cost},
      {"config", config_to_json(log.config)},
      {"totals",
       {{"n_succ", log.totals.n_succ},
        {"k_timeout", log.totals.k_timeout},
        {"k_abort", log.totals.k_abort},
        {"maintenance", log.totals.maintenance},
        {"elapsed", log.totals.elapsed}}},
      {"budget",
       {{"executed_ticks", log.budget.executed_ticks},
        {"inference_ticks", log.budget.inference_ticks},
        {"reset_ticks", log.budget.reset_ticks},
        {"inference_calls", log.budget.inference_calls}}}};
  std::ofstream out(summary_path);
  if (!out) throw IoError("cannot write " + summary_path.string());
  out << summary.dump(2) << '\n';
}

RunLog load_run_log(const std::filesystem::path& events_path,
                    const std::filesystem::path& summary_path) {
  RunLog log;
  try {
    std::ifstream sin(summary_path);
    if (!sin) throw IoError("cannot open " + summary_path.string());
    const json s = json::parse(sin);
    log.method = s.at("method").get<std::string>();
    log.regime = s.at("regime").get<std::string>();
    log.task = s.at("task").get<std::string>();
    log.seed = s.at("seed").get<std::uint64_t>();
    log.control_hz = s.at("control_hz").get<double>();
    log.time_limit = s.at("time_limit").get<double>();
    log.exec_horizon = s.at("exec_horizon").get<int>();
    log.inference_cost = s.at("inference_cost").get<double>();
    log.config = config_from_json(s.at("config"));
    const auto& t = s.at("totals");
    log.totals.n_succ = t.at("n_succ").get<int>();
    log.totals.k_timeout = t.at("k_timeout").get<int>();
    log.totals.k_abort = t.at("k_abort").get<int>();
    log.totals.maintenance = t.at("maintenance").get<int>();
    log.totals.elapsed = t.at("elapsed").get<double>();
    const auto& b = s.at("budget");
    log.budget.executed_ticks = b.at("executed_ticks").get<long>();
    log.budget.inference_ticks = b.at("inference_ticks").get<long>();
    log.budget.reset_ticks = b.at("reset_ticks").get<long>();
    log.budget.inference_calls = b.at("inference_calls").get<long>();
  } catch (const json::exception& e) {
    throw IoError(summary_path.string() + ": " + e.what());
  }
  std::ifstream in(events_path);
  if (!in) throw IoError("cannot open " + events_path.string());
  std::string line;
  int record = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++record;
    try {
      const json e = json::parse(line);
      log.events.push_back({event_kind_from_name(e.at("kind").get<std::string>()),
                            e.at("t").get<double>(), e.at("cycle").get<int>()});
    } catch (const std::exception& e) {
      throw IoError(events_path.string() + ": event record " +
                    std::to_string(record) + ": " + e.what());
    }
  }
  log.check_totals();
  return log;
}

}  // namespace cycleflow
