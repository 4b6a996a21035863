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

// Continuous-run and single-trial evaluation protocols.
//
// All time is simulated and accounted in integer control ticks: executed
// actions, policy inference (the world is paused while the policy thinks)
// and resets. A run of duration T therefore ends at exactly T.

#ifndef CYCLEFLOW_RUNNER_H_
#define CYCLEFLOW_RUNNER_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cycleflow/simenv.h"
#include "cycleflow/traj.h"

namespace cycleflow {

class Policy {
 public:
  virtual ~Policy() = default;
  // Next action chunk (H x d). May throw SamplingError.
  virtual ActionChunk act(const Observation& obs) = 0;
  virtual int horizon() const = 0;
  // Simulated seconds charged per act() call.
  virtual double inference_cost() const = 0;
  // Re-seeds any internal randomness.
  virtual void reset(std::uint64_t seed) = 0;
};

enum class RunMode { kContinuous, kSingleTrial };

struct RunConfig {
  double duration = 3600.0;  // T, simulated seconds
  int exec_horizon = 0;      // k; 0 means the policy's full horizon
  // Overrides the policy's own inference cost when >= 0.
  double inference_cost = -1.0;
  int consec_interventions_for_rerandomize = 5;
  double reset_cost = 2.0;
  double maintenance_cost = 10.0;
  RunMode mode = RunMode::kContinuous;
  int episodes = 100;
  std::uint64_t seed = 0;
};

enum class EventKind { kCycleStart, kSuccess, kTimeout, kAbort, kMaintenance };

const char* event_kind_name(EventKind k);
EventKind event_kind_from_name(const std::string& name);

struct RunEvent {
  EventKind kind = EventKind::kCycleStart;
  double sim_time = 0.0;
  int cycle_index = 0;

  bool operator==(const RunEvent&) const = default;
};

struct RunTotals {
  int n_succ = 0;
  int k_timeout = 0;
  int k_abort = 0;
  int maintenance = 0;
  double elapsed = 0.0;

  int interventions() const { return k_timeout + k_abort; }
  bool operator==(const RunTotals&) const = default;
};

// Tick-level budget. executed + inference + reset == elapsed ticks.
struct RunBudget {
  long executed_ticks = 0;
  long inference_ticks = 0;
  long reset_ticks = 0;
  long inference_calls = 0;

  bool operator==(const RunBudget&) const = default;
};

struct RunLog {
  // Identification, used for grouping and file names.
  std::string method;
  std::string regime;
  std::string task;
  std::uint64_t seed = 0;
  double control_hz = 20.0;
  double time_limit = 0.0;
  int exec_horizon = 0;
  double inference_cost = 0.0;
  RunConfig config;
  std::vector<RunEvent> events;
  RunTotals totals;
  RunBudget budget;

  // Recomputes totals from events; throws DataError when they disagree
  // with the stored totals.
  void check_totals() const;
};

RunTotals fold_events(const std::vector<RunEvent>& events, double elapsed);

struct ChunkResult {
  int executed = 0;
  bool success = false;
  double elapsed = 0.0;
};

// Executes rows 0..k-1 of `chunk`, stopping right after the first row that
// makes the task succeed. Inference cost is not included.
ChunkResult execute_chunk(sim::WorldState& state, const ActionChunk& chunk,
                          int k, const sim::TaskSpec& task,
                          const sim::WorldConfig& cfg);

RunLog run_continuous(Policy& policy, const sim::TaskSpec& task,
                      const sim::WorldConfig& world, const RunConfig& cfg);

std::vector<bool> run_single_trial(Policy& policy, const sim::TaskSpec& task,
                                   const sim::WorldConfig& world, int episodes,
                                   std::uint64_t seed,
                                   const RunConfig& cfg = {});

// Events as JSON lines plus a summary JSON next to it.
void save_run_log(const RunLog& log, const std::filesystem::path& events_path,
                  const std::filesystem::path& summary_path);
RunLog load_run_log(const std::filesystem::path& events_path,
                    const std::filesystem::path& summary_path);

// "<method>__<regime>__<task>__seed<k>"
std::string run_stem(const RunLog& log);

}  // namespace cycleflow

#endif  // CYCLEFLOW_RUNNER_H_
