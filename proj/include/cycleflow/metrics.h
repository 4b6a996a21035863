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


// Throughput and reliability metrics over run logs, and the
// productivity-reliability plane report.

#ifndef CYCLEFLOW_METRICS_H_
#define CYCLEFLOW_METRICS_H_

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cycleflow/runner.h"

namespace cycleflow {

// Successful cycles per hour. Throws ArgumentError when T <= 0.
double tph(int n_succ, double T);

struct Mtbi {
  double value = 0.0;
  // K == 0: value is T and reads as ">= T".
  bool censored = false;
};

// Mean time between interventions, T / K. Throws ArgumentError when T <= 0.
Mtbi mtbi(int k, double T);

// Successes over attempted cycles (successes + interventions); empty when
// no cycle ended.
std::optional<double> success_rate(const RunTotals& totals);

struct PRPoint {
  std::string method;
  std::string regime;
  std::string task;
  int seeds = 0;
  double tph = 0.0;
  double mtbi = 0.0;
  bool mtbi_censored = false;  // at least one seed had K == 0
  std::optional<double> success_rate;

  bool operator==(const PRPoint&) const = default;
};

// Groups logs by (method, regime, task) in lexicographic order and averages
// per-seed metrics. Logs of one group must share duration, time limit,
// execution horizon, inference cost and reset costs; otherwise DataError.
std::vector<PRPoint> prp_report(std::span<const RunLog> logs);

struct Dominance {
  bool dominated = false;
  // Index into the point list of one dominating point.
  int by = -1;
};

// Pareto dominance on (tph, mtbi) among points of the same task.
std::vector<Dominance> dominance_flags(std::span<const PRPoint> points);

struct TimelineRow {
  double t_start = 0.0;
  double t_end = 0.0;
  std::string outcome;            // success, intervention, unfinished,
                                  // maintenance_reset
  std::string intervention_kind;  // timeout, abort or empty
};

std::vector<TimelineRow> timeline(const RunLog& log);

// CSV writers. Numbers use fixed "%.6f" so output is byte-stable.
void write_prp_csv(std::span<const PRPoint> points, std::ostream& out);
void write_dominance_csv(std::span<const PRPoint> points,
                         std::span<const Dominance> flags, std::ostream& out);
void write_timeline_csv(std::span<const TimelineRow> rows, std::ostream& out);

}  // namespace cycleflow

#endif  // CYCLEFLOW_METRICS_H_
