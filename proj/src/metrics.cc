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


#include "cycleflow/metrics.h"

#include <cmath>
#include <cstdio>
#include <map>
#include <tuple>

#include "cycleflow/error.h"

namespace cycleflow {

double tph(int n_succ, double T) {
  if (!(T > 0.0)) throw ArgumentError("tph: T must be > 0");
  if (n_succ < 0) throw ArgumentError("tph: negative success count");
  return n_succ / (T / 3600.0);
}

Mtbi mtbi(int k, double T) {
  if (!(T > 0.0)) throw ArgumentError("mtbi: T must be > 0");
  if (k < 0) throw ArgumentError("mtbi: negative intervention count");
  if (k == 0) return {T, true};
  return {T / k, false};
}

std::optional<double> success_rate(const RunTotals& totals) {
  const int attempts = totals.n_succ + totals.interventions();
  if (attempts == 0) return std::nullopt;
  return static_cast<double>(totals.n_succ) / attempts;
}

namespace {

using GroupKey = std::tuple<std::string, std::string, std::string>;

void check_same_config(const RunLog& a, const RunLog& b) {
  const RunConfig& x = a.config;
  const RunConfig& y = b.config;
  const bool same = a.totals.elapsed == b.totals.elapsed &&
                    a.time_limit == b.time_limit &&
                    a.exec_horizon == b.exec_horizon &&
                    a.inference_cost == b.inference_cost &&
                    a.control_hz == b.control_hz &&
                    x.reset_cost == y.reset_cost &&
                    x.maintenance_cost == y.maintenance_cost &&
                    x.consec_interventions_for_rerandomize ==
                        y.consec_interventions_for_rerandomize;
  if (!same) {
    throw DataError("aggregation error: logs of group " + a.method + "/" +
                    a.regime + "/" + a.task +
                    " were produced with different run configurations");
  }
}

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::vector<PRPoint> prp_report(std::span<const RunLog> logs) {
  std::map<GroupKey, std::vector<const RunLog*>> groups;
  for (const auto& log : logs) {
    log.check_totals();
    groups[{log.method, log.regime, log.task}].push_back(&log);
  }
  std::vector<PRPoint> out;
  for (const auto& [key, members] : groups) {
    PRPoint p;
    std::tie(p.method, p.regime, p.task) = key;
    p.seeds = static_cast<int>(members.size());
    double sr_sum = 0.0;
    int sr_n = 0;
    for (const RunLog* log : members) {
      check_same_config(*members.front(), *log);
      const double T = log->totals.elapsed;
      p.tph += tph(log->totals.n_succ, T);
      const Mtbi m = mtbi(log->totals.interventions(), T);
      p.mtbi += m.value;
      p.mtbi_censored = p.mtbi_censored || m.censored;
      if (const auto sr = success_rate(log->totals)) {
        sr_sum += *sr;
        ++sr_n;
      }
    }
    p.tph /= p.seeds;
    p.mtbi /= p.seeds;
    if (sr_n > 0) p.success_rate = sr_sum / sr_n;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Dominance> dominance_flags(std::span<const PRPoint> points) {
  std::vector<Dominance> flags(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (i == j || points[i].task != points[j].task) continue;
      const auto& a = points[i];
      const auto& b = points[j];
      if (b.tph >= a.tph && b.mtbi >= a.mtbi &&
          (b.tph > a.tph || b.mtbi > a.mtbi)) {
        flags[i] = {true, static_cast<int>(j)};
        break;
      }
    }
  }
  return flags;
}

std::vector<TimelineRow> timeline(const RunLog& log) {
  std::vector<TimelineRow> rows;
  double start = 0.0;
  bool open = false;
  for (const auto& e : log.events) {
    switch (e.kind) {
      case EventKind::kCycleStart:
        start = e.sim_time;
        open = true;
        break;
      case EventKind::kSuccess:
        rows.push_back({start, e.sim_time, "success", ""});
        open = false;
        break;
      case EventKind::kTimeout:
        rows.push_back({start, e.sim_time, "intervention", "timeout"});
        open = false;
        break;
      case EventKind::kAbort:
        rows.push_back({start, e.sim_time, "intervention", "abort"});
        open = false;
        break;
      case EventKind::kMaintenance:
        rows.push_back({e.sim_time, e.sim_time, "maintenance_reset", ""});
        break;
    }
  }
  if (open && log.totals.elapsed > start) {
    rows.push_back({start, log.totals.elapsed, "unfinished", ""});
  }
  return rows;
}

void write_prp_csv(std::span<const PRPoint> points, std::ostream& out) {
  out << "method,regime,task,seeds,tph,mtbi,mtbi_censored,success_rate\n";
  for (const auto& p : points) {
    out << p.method << ',' << p.regime << ',' << p.task << ',' << p.seeds
        << ',' << fixed(p.tph) << ',' << fixed(p.mtbi) << ','
        << (p.mtbi_censored ? 1 : 0) << ','
        << (p.success_rate ? fixed(*p.success_rate) : "NA") << '\n';
  }
}

void write_dominance_csv(std::span<const PRPoint> points,
                         std::span<const Dominance> flags, std::ostream& out) {
  if (points.size() != flags.size()) {
    throw ArgumentError("dominance flags do not match points");
  }
  out << "method,regime,task,dominated,dominated_by\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    out << p.method << ',' << p.regime << ',' << p.task << ','
        << (flags[i].dominated ? 1 : 0) << ',';
    if (flags[i].dominated) {
      const auto& b = points[flags[i].by];
      out << b.method << '/' << b.regime;
    }
    out << '\n';
  }
}

void write_timeline_csv(std::span<const TimelineRow> rows, std::ostream& out) {
  out << "t_start,t_end,outcome,intervention_kind\n";
  for (const auto& r : rows) {
    out << fixed(r.t_start) << ',' << fixed(r.t_end) << ',' << r.outcome << ','
        << r.intervention_kind << '\n';
  }
}

}  // namespace cycleflow
