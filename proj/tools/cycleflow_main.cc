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

// cycleflow: data generation, training, distillation, downsampling,
// evaluation and reporting.
//
// Exit codes: 0 ok, 1 usage, 2 data (including unreadable or corrupted
// files), 3 training or sampling failure.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cycleflow/checkpoint.h"
#include "cycleflow/config.h"
#include "cycleflow/distill.h"
#include "cycleflow/error.h"
#include "cycleflow/espada.h"
#include "cycleflow/flowmatch.h"
#include "cycleflow/hashing.h"
#include "cycleflow/metrics.h"
#include "cycleflow/policy.h"
#include "cycleflow/runner.h"
#include "cycleflow/simenv.h"
#include "cycleflow/traj.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cycleflow {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitTraining = 3;

// Raised for argument combinations CLI11 cannot express.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Independent sub-stream seeds derived from the global seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32), stream};
  std::mt19937_64 rng(seq);
  return rng();
}

// Provenance record written next to every command's outputs.
class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& argv)
      : command_(std::move(command)), argv_(argv) {}

  void set_config(const ExperimentConfig& cfg) { config_ = to_json(cfg); }
  void input(const fs::path& p) { inputs_.push_back(p); }
  void output(const fs::path& p) { outputs_.push_back(p); }
  void note(const std::string& key, json value) { extra_[key] = std::move(value); }

  void write(const fs::path& dir) const {
    json inputs = json::array();
    for (const auto& p : inputs_) {
      inputs.push_back({{"path", p.string()}, {"hash", git_blob_hash_file(p)}});
    }
    json outputs = json::array();
    for (const auto& p : outputs_) {
      outputs.push_back({{"path", fs::relative(p, dir).generic_string()},
                         {"hash", git_blob_hash_file(p)}});
    }
    json m = {{"format", "cycleflow-manifest"},
              {"format_version", 1},
              {"command", command_},
              {"argv", argv_},
              {"config", config_},
              {"inputs", std::move(inputs)},
              {"outputs", std::move(outputs)}};
    if (!extra_.empty()) m["details"] = extra_;
    std::ofstream out(dir / "manifest.json");
    out << m.dump(2) << "\n";
    if (!out) throw IoError("cannot write manifest in " + dir.string());
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  json config_ = json::object();
  std::vector<fs::path> inputs_;
  std::vector<fs::path> outputs_;
  json extra_ = json::object();
};

// Options shared by every subcommand.
struct Common {
  std::optional<std::string> config_file;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_file, "JSON experiment config")
      ->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed,
                  "global seed (default: config file, then $CYCLEFLOW_SEED, "
                  "then 0)");
  sub->add_option("-o,--out-dir", c.out_dir, "output directory")->required();
}

ExperimentConfig base_config(const Common& c) {
  ExperimentConfig cfg = resolve_config(
      c.config_file ? std::optional<fs::path>(*c.config_file) : std::nullopt);
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

fs::path make_out_dir(const Common& c) {
  const fs::path dir(c.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

void write_loss_csv(const std::vector<LossPoint>& curve, const fs::path& p) {
  std::ofstream out(p);
  out << "step,loss\n";
  char buf[64];
  for (const auto& pt : curve) {
    std::snprintf(buf, sizeof buf, "%d,%.9g\n", pt.step, pt.loss);
    out << buf;
  }
  if (!out) throw IoError("cannot write " + p.string());
}

void log_line(const std::string& s) { std::cerr << "cycleflow: " << s << "\n"; }

// ---------------------------------------------------------------- gen

struct GenArgs {
  Common common;
  std::optional<std::string> regime;
  std::optional<std::string> task;
  std::optional<double> seconds;
  std::optional<int> episodes;
  std::optional<int> streams;
  std::optional<double> p_fail;
  std::optional<int> horizon;
};

int cmd_gen(const GenArgs& a, const std::vector<std::string>& argv) {
  ExperimentConfig cfg = base_config(a.common);
  if (a.regime) cfg.gen.regime = *a.regime;
  if (a.task) cfg.gen.task = *a.task;
  if (a.seconds) cfg.gen.seconds = *a.seconds;
  if (a.episodes) cfg.gen.episodes = *a.episodes;
  if (a.streams) cfg.gen.streams = *a.streams;
  if (a.p_fail) cfg.gen.p_fail = *a.p_fail;
  if (a.horizon) cfg.flow.horizon = *a.horizon;
  cfg.validate();

  sim::GenerateOptions go;
  go.regime = regime_from_name(cfg.gen.regime);
  go.seconds = cfg.gen.seconds;
  go.episodes = cfg.gen.episodes;
  go.streams = cfg.gen.streams;
  go.p_fail = cfg.gen.p_fail;
  go.seed = cfg.seed;
  go.horizon = cfg.flow.horizon;
  const Dataset ds = sim::generate_demos(sim::task_by_name(cfg.gen.task),
                                         cfg.expert, cfg.world, go);

  const fs::path dir = make_out_dir(a.common);
  const fs::path out = dir / "dataset.cfds";
  save_dataset(ds, out);
  Manifest m("gen", argv);
  m.set_config(cfg);
  m.output(out);
  m.note("trajectories", ds.trajectories.size());
  m.note("frames", ds.num_frames());
  m.write(dir);
  log_line("wrote " + out.string() + " (" +
           std::to_string(ds.trajectories.size()) + " trajectories, " +
           std::to_string(ds.num_frames()) + " frames)");
  return kExitOk;
}

// -------------------------------------------------------------- train

struct TrainArgs {
  Common common;
  std::string stage;
  std::string data;
  std::optional<std::string> init;
  bool from_scratch = false;
  std::optional<int> espada;
  std::optional<int> horizon;
  std::optional<int> steps;
  std::optional<double> lr;
};

int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv) {
  ExperimentConfig cfg = base_config(a.common);
  if (a.horizon) cfg.flow.horizon = *a.horizon;
  if (a.steps) cfg.train.steps = *a.steps;
  if (a.lr) cfg.train.lr = *a.lr;
  if (a.espada) cfg.espada.factor = *a.espada;
  cfg.validate();

  const bool pretrain = a.stage == "pretrain";
  if (!pretrain && !a.init && !a.from_scratch) {
    throw UsageError("posttrain needs --init <checkpoint> or --from-scratch");
  }
  if (a.init && a.from_scratch) {
    throw UsageError("--init and --from-scratch are mutually exclusive");
  }

  Dataset ds = load_dataset(a.data);
  if (pretrain && ds.regime != Regime::kPlay) {
    throw UsageError(std::string("pretrain expects play data, got ") +
                     regime_name(ds.regime));
  }
  if (!pretrain && ds.regime == Regime::kPlay) {
    throw UsageError("posttrain expects cyclic or noncyclic task data");
  }
  ds.meta.horizon = cfg.flow.horizon;
  if (a.espada) {
    espada::EspadaConfig ec = cfg.espada;
    ec.factor = *a.espada;
    ds = espada::apply(ds, ec);
  }
  FlowConfig flow = cfg.flow;
  flow.horizon = ds.meta.horizon;
  flow.action_dim = ds.meta.action_dim;

  const int num_tasks = static_cast<int>(ds.meta.tasks.size());
  std::optional<FlowModel> model;
  if (a.init) {
    Checkpoint init = load_checkpoint(*a.init);
    const FlowModel& im = init.model;
    if (im.horizon() != flow.horizon || im.action_dim() != flow.action_dim) {
      throw UsageError("init checkpoint chunk shape " +
                       std::to_string(im.horizon()) + "x" +
                       std::to_string(im.action_dim()) +
                       " differs from training chunk shape " +
                       std::to_string(flow.horizon) + "x" +
                       std::to_string(flow.action_dim));
    }
    if (im.state_dim() != ds.meta.state_dim || im.num_tasks() != num_tasks) {
      throw UsageError("init checkpoint observation layout differs from data");
    }
    model = im;
  } else {
    model.emplace(ds.meta.state_dim, num_tasks, flow, cfg.net.hidden_dims,
                  cfg.net.activation, derive_seed(cfg.seed, 1));
  }

  const TrainOptions opts = train_options(cfg, derive_seed(cfg.seed, 2));
  log_line(a.stage + ": " + std::to_string(opts.steps) + " steps, H=" +
           std::to_string(flow.horizon));
  const auto curve = train_flow_matching(*model, ds, opts);

  Checkpoint ck;
  ck.kind = "teacher";
  ck.stage = a.stage;
  ck.regime = regime_name(ds.regime);
  ck.model = *model;
  ck.espada_factor = ds.meta.espada_factor;
  ck.sample_steps = model->flow().teacher_steps;

  const fs::path dir = make_out_dir(a.common);
  const fs::path ck_path = dir / "checkpoint.json";
  const fs::path loss_path = dir / "loss.csv";
  save_checkpoint(ck, ck_path);
  write_loss_csv(curve, loss_path);
  Manifest m("train", argv);
  m.set_config(cfg);
  m.input(a.data);
  if (a.init) m.input(*a.init);
  m.output(ck_path);
  m.output(loss_path);
  m.note("stage", a.stage);
  m.note("horizon", flow.horizon);
  m.note("espada_factor", ck.espada_factor);
  if (!curve.empty()) {
    m.note("initial_loss", curve.front().loss);
    m.note("final_loss", curve.back().loss);
  }
  m.write(dir);
  log_line("wrote " + ck_path.string());
  return kExitOk;
}

// ------------------------------------------------------------ distill

struct DistillArgs {
  Common common;
  std::string teacher;
  std::string data;
  std::optional<int> steps;
  std::optional<double> lr;
};

int cmd_distill(const DistillArgs& a, const std::vector<std::string>& argv) {
  ExperimentConfig cfg = base_config(a.common);
  if (a.steps) cfg.distill.steps = *a.steps;
  if (a.lr) cfg.distill.lr = *a.lr;
  cfg.validate();

  const Checkpoint teacher = load_checkpoint(a.teacher);
  if (teacher.kind != "teacher") {
    throw UsageError("distill expects a teacher checkpoint, got " +
                     teacher.kind);
  }
  const Dataset ds = load_dataset(a.data);
  std::vector<Observation> obs;
  for (const auto& t : ds.trajectories) {
    for (const auto& f : t.frames) {
      if (static_cast<int>(f.obs.state.size()) != teacher.model.state_dim()) {
        throw DataError("observation width differs from the teacher's");
      }
      obs.push_back(f.obs);
    }
  }
  if (obs.empty()) throw DataError("dataset has no observations");

  FlowModel student = teacher.model;
  DistillTrainOptions opts = distill_options(cfg, derive_seed(cfg.seed, 3));
  opts.distill.teacher_steps = teacher.sample_steps;
  DistillSanity sanity;
  log_line("distill: " + std::to_string(opts.train.steps) + " steps");
  const auto curve =
      train_distillation(student, teacher.model, obs, opts, &sanity);

  Checkpoint ck;
  ck.kind = "student";
  ck.stage = "distill";
  ck.regime = teacher.regime;
  ck.model = student;
  ck.espada_factor = teacher.espada_factor;
  ck.sample_steps = opts.distill.student_steps;
  ck.teacher_hash = git_blob_hash_file(a.teacher);

  const fs::path dir = make_out_dir(a.common);
  const fs::path ck_path = dir / "checkpoint.json";
  const fs::path loss_path = dir / "loss.csv";
  save_checkpoint(ck, ck_path);
  write_loss_csv(curve, loss_path);
  Manifest m("distill", argv);
  m.set_config(cfg);
  m.input(a.teacher);
  m.input(a.data);
  m.output(ck_path);
  m.output(loss_path);
  m.note("teacher_hash", ck.teacher_hash);
  m.note("student_initial_loss", sanity.student_initial_loss);
  m.note("teacher_self_loss", sanity.teacher_self_loss);
  m.write(dir);
  log_line("wrote " + ck_path.string());
  return kExitOk;
}

// ------------------------------------------------------------- espada

struct EspadaArgs {
  Common common;
  std::string data;
  std::optional<int> factor;
  std::optional<std::string> mode;
};

int cmd_espada(const EspadaArgs& a, const std::vector<std::string>& argv) {
  ExperimentConfig cfg = base_config(a.common);
  if (a.factor) cfg.espada.factor = *a.factor;
  if (a.mode) {
    cfg.espada.mode = *a.mode == "drop" ? espada::CompressMode::kDrop
                                        : espada::CompressMode::kSum;
  }
  cfg.validate();

  const Dataset ds = load_dataset(a.data);
  const fs::path dir = make_out_dir(a.common);
  const fs::path report_path = dir / "segmentation.jsonl";
  std::ofstream report(report_path);
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    const auto& t = ds.trajectories[i];
    const auto seg = espada::segment_phases(t, cfg.espada);
    const auto out = espada::downsample_with_map(t, seg, cfg.espada);
    report << espada::report_json(t, seg, out, static_cast<int>(i)) << "\n";
  }
  report.close();
  if (!report) throw IoError("cannot write " + report_path.string());
  const Dataset out = espada::apply(ds, cfg.espada);
  const fs::path data_path = dir / "dataset.cfds";
  save_dataset(out, data_path);

  Manifest m("espada", argv);
  m.set_config(cfg);
  m.input(a.data);
  m.output(data_path);
  m.output(report_path);
  m.note("frames_in", ds.num_frames());
  m.note("frames_out", out.num_frames());
  m.note("horizon_in", ds.meta.horizon);
  m.note("horizon_out", out.meta.horizon);
  m.write(dir);
  log_line("frames " + std::to_string(ds.num_frames()) + " -> " +
           std::to_string(out.num_frames()) + ", H " +
           std::to_string(ds.meta.horizon) + " -> " +
           std::to_string(out.meta.horizon));
  return kExitOk;
}

// --------------------------------------------------------------- eval

struct EvalArgs {
  Common common;
  std::optional<std::string> checkpoint;
  std::optional<std::string> policy;
  std::optional<std::string> mode;
  std::optional<std::string> task;
  std::optional<double> T;
  std::optional<int> episodes;
  std::optional<int> seeds;
  std::optional<double> cfg_scale;
  std::optional<bool> cfg_rescale;
  std::optional<int> exec_horizon;
  std::optional<double> inference_cost;
  std::optional<std::string> method;
  std::optional<std::string> regime;
};

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

int cmd_eval(const EvalArgs& a, const std::vector<std::string>& argv) {
  ExperimentConfig cfg = base_config(a.common);
  if (a.mode) {
    cfg.run.mode =
        *a.mode == "single" ? RunMode::kSingleTrial : RunMode::kContinuous;
  }
  if (cfg.run.mode == RunMode::kSingleTrial && a.T) {
    throw UsageError("--T applies to continuous runs; single mode uses "
                     "--episodes");
  }
  if (cfg.run.mode == RunMode::kContinuous && a.episodes) {
    throw UsageError("--episodes applies to single mode; continuous runs use "
                     "--T");
  }
  if (a.checkpoint.has_value() == a.policy.has_value()) {
    throw UsageError("give exactly one of --checkpoint or --policy");
  }
  if (a.task) cfg.eval.task = *a.task;
  if (a.T) cfg.run.duration = *a.T;
  if (a.episodes) cfg.run.episodes = *a.episodes;
  if (a.seeds) cfg.eval.seeds = *a.seeds;
  if (a.cfg_scale) cfg.guidance.w = *a.cfg_scale;
  if (a.cfg_rescale) cfg.guidance.rescale = *a.cfg_rescale;
  if (a.exec_horizon) cfg.run.exec_horizon = *a.exec_horizon;
  if (a.inference_cost) cfg.eval.inference_cost = *a.inference_cost;
  cfg.validate();

  const sim::TaskSpec& task = sim::task_by_name(cfg.eval.task);
  std::optional<Checkpoint> ck;
  std::unique_ptr<Policy> policy;
  std::string method;
  std::string regime = "none";
  if (a.checkpoint) {
    ck = load_checkpoint(*a.checkpoint);
    FlowPolicyOptions po;
    po.steps = ck->sample_steps;
    po.guidance = cfg.guidance;
    po.inference_cost = cfg.eval.inference_cost >= 0.0 ? cfg.eval.inference_cost
                        : ck->kind == "student"       ? cfg.eval.student_cost
                                                      : cfg.eval.teacher_cost;
    policy = std::make_unique<FlowPolicy>(ck->model, ck->model.flow(), po);
    method = ck->kind;
    if (ck->espada_factor > 1) {
      method += "-espada" + std::to_string(ck->espada_factor);
    }
    regime = ck->regime;
  } else if (*a.policy == "expert") {
    policy = std::make_unique<ExpertPolicy>(cfg.expert, cfg.world);
    method = "expert";
  } else {
    policy = std::make_unique<IdlePolicy>(cfg.flow.horizon);
    method = "idle";
  }
  if (a.method) method = *a.method;
  if (a.regime) regime = *a.regime;
  for (const std::string& label : {method, regime}) {
    if (label.empty() || label.find("__") != std::string::npos ||
        label.find_first_of("/\\,\"\n") != std::string::npos) {
      throw UsageError("method and regime labels must be non-empty and free "
                       "of '__', '/', ',' and quotes");
    }
  }

  RunConfig rc = cfg.run;
  rc.inference_cost = policy->inference_cost();
  const fs::path dir = make_out_dir(a.common);
  Manifest m("eval", argv);
  m.set_config(cfg);
  if (a.checkpoint) m.input(*a.checkpoint);
  json per_seed = json::array();

  for (int i = 0; i < cfg.eval.seeds; ++i) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
    rc.seed = seed;
    const std::string stem = method + "__" + regime + "__" + task.name +
                             "__seed" + std::to_string(seed);
    if (rc.mode == RunMode::kContinuous) {
      RunLog log = run_continuous(*policy, task, cfg.world, rc);
      log.method = method;
      log.regime = regime;
      const fs::path ev = dir / (stem + ".events.jsonl");
      const fs::path su = dir / (stem + ".summary.json");
      save_run_log(log, ev, su);
      m.output(ev);
      m.output(su);
      const auto sr = success_rate(log.totals);
      const Mtbi mt = mtbi(log.totals.interventions(), rc.duration);
      per_seed.push_back(
          {{"seed", seed},
           {"n_succ", log.totals.n_succ},
           {"interventions", log.totals.interventions()},
           {"tph", tph(log.totals.n_succ, rc.duration)},
           {"mtbi", mt.value},
           {"mtbi_censored", mt.censored},
           {"success_rate", sr ? json(*sr) : json(nullptr)}});
      log_line(stem + ": tph " + fmt6(tph(log.totals.n_succ, rc.duration)) +
               " mtbi " + fmt6(mt.value) + (mt.censored ? " (censored)" : "") +
               " success_rate " + (sr ? fmt6(*sr) : std::string("NA")));
    } else {
      const auto flags =
          run_single_trial(*policy, task, cfg.world, rc.episodes, seed, rc);
      const fs::path p = dir / (stem + ".episodes.csv");
      std::ofstream out(p);
      out << "episode,success\n";
      int ok = 0;
      for (std::size_t e = 0; e < flags.size(); ++e) {
        out << e << "," << (flags[e] ? 1 : 0) << "\n";
        ok += flags[e];
      }
      out.close();
      if (!out) throw IoError("cannot write " + p.string());
      m.output(p);
      const double rate = static_cast<double>(ok) / flags.size();
      per_seed.push_back(
          {{"seed", seed}, {"episodes", flags.size()}, {"successes", ok},
           {"success_rate", rate}});
      log_line(stem + ": " + std::to_string(ok) + "/" +
               std::to_string(flags.size()) + " episodes succeeded");
    }
  }
  m.note("method", method);
  m.note("regime", regime);
  m.note("task", task.name);
  m.note("runs", per_seed);
  m.write(dir);
  return kExitOk;
}

// ------------------------------------------------------------- report

struct ReportArgs {
  Common common;
  std::vector<std::string> logs;
};

int cmd_report(const ReportArgs& a, const std::vector<std::string>& argv) {
  ExperimentConfig cfg = base_config(a.common);
  const std::string suffix = ".summary.json";
  std::vector<fs::path> summaries;
  for (const auto& d : a.logs) {
    if (!fs::is_directory(d)) throw UsageError(d + " is not a directory");
    for (const auto& e : fs::recursive_directory_iterator(d)) {
      const std::string name = e.path().filename().string();
      if (e.is_regular_file() && name.size() > suffix.size() &&
          name.compare(name.size() - suffix.size(), suffix.size(), suffix) ==
              0) {
        summaries.push_back(e.path());
      }
    }
  }
  if (summaries.empty()) {
    throw UsageError("no run logs (*" + suffix + ") found under the given "
                     "directories");
  }
  std::sort(summaries.begin(), summaries.end());

  Manifest m("report", argv);
  m.set_config(cfg);
  std::vector<RunLog> logs;
  for (const auto& s : summaries) {
    const std::string name = s.filename().string();
    const fs::path events =
        s.parent_path() /
        (name.substr(0, name.size() - suffix.size()) + ".events.jsonl");
    logs.push_back(load_run_log(events, s));
    m.input(events);
    m.input(s);
  }
  const auto points = prp_report(logs);
  const auto flags = dominance_flags(points);

  const fs::path dir = make_out_dir(a.common);
  const fs::path prp_path = dir / "prp.csv";
  const fs::path dom_path = dir / "dominance.csv";
  {
    std::ofstream out(prp_path);
    write_prp_csv(points, out);
    if (!out) throw IoError("cannot write " + prp_path.string());
  }
  {
    std::ofstream out(dom_path);
    write_dominance_csv(points, flags, out);
    if (!out) throw IoError("cannot write " + dom_path.string());
  }
  m.output(prp_path);
  m.output(dom_path);
  const fs::path tl_dir = dir / "timeline";
  fs::create_directories(tl_dir);
  for (const auto& log : logs) {
    const fs::path p = tl_dir / (run_stem(log) + ".csv");
    const auto rows = timeline(log);
    std::ofstream out(p);
    write_timeline_csv(rows, out);
    if (!out) throw IoError("cannot write " + p.string());
    m.output(p);
  }
  m.write(dir);
  write_prp_csv(points, std::cout);
  return kExitOk;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  if (!args.empty()) args[0] = "cycleflow";
  CLI::App app{"cycleflow: flow-matching action policies, distillation, "
               "phase-adaptive downsampling and continuous-run evaluation"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "generate a demonstration dataset");
  add_common(g, gen.common);
  g->add_option("--regime", gen.regime, "play, noncyclic or cyclic")
      ->check(CLI::IsMember({"play", "noncyclic", "cyclic"}));
  g->add_option("--task", gen.task, "pick-place or conveyor-pack")
      ->check(CLI::IsMember({"pick-place", "conveyor-pack"}));
  g->add_option("--seconds", gen.seconds, "stream duration in sim seconds");
  g->add_option("--episodes", gen.episodes, "noncyclic episode count");
  g->add_option("--streams", gen.streams, "number of streams");
  g->add_option("--p-fail", gen.p_fail, "injected expert failure rate");
  g->add_option("--horizon", gen.horizon, "chunk horizon H recorded in the data");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "flow-matching training");
  add_common(t, train.common);
  t->add_option("--stage", train.stage, "pretrain or posttrain")
      ->required()
      ->check(CLI::IsMember({"pretrain", "posttrain"}));
  t->add_option("--data", train.data, "training dataset (.cfds)")->required();
  t->add_option("--init", train.init, "initial checkpoint");
  t->add_flag("--from-scratch", train.from_scratch,
              "posttrain from a fresh initialization");
  t->add_option("--espada", train.espada,
                "phase-adaptive downsampling factor N applied before windowing")
      ->check(CLI::PositiveNumber);
  t->add_option("--horizon", train.horizon, "chunk horizon H before downsampling")
      ->check(CLI::PositiveNumber);
  t->add_option("--steps", train.steps, "optimizer steps")
      ->check(CLI::PositiveNumber);
  t->add_option("--lr", train.lr, "learning rate");

  DistillArgs dist;
  auto* d = app.add_subcommand("distill", "distill a teacher into a few-step student");
  add_common(d, dist.common);
  d->add_option("--teacher", dist.teacher, "teacher checkpoint")->required();
  d->add_option("--data", dist.data, "dataset supplying observations")
      ->required();
  d->add_option("--steps", dist.steps, "optimizer steps")
      ->check(CLI::PositiveNumber);
  d->add_option("--lr", dist.lr, "learning rate");

  EspadaArgs esp;
  auto* e = app.add_subcommand("espada", "phase-adaptive downsampling of a dataset");
  add_common(e, esp.common);
  e->add_option("--data", esp.data, "input dataset (.cfds)")->required();
  e->add_option("--factor", esp.factor, "casual compression factor N")
      ->check(CLI::PositiveNumber);
  e->add_option("--mode", esp.mode, "sum (default) or drop")
      ->check(CLI::IsMember({"sum", "drop"}));

  EvalArgs ev;
  auto* v = app.add_subcommand("eval", "continuous-run or single-trial evaluation");
  add_common(v, ev.common);
  v->add_option("--checkpoint", ev.checkpoint, "policy checkpoint");
  v->add_option("--policy", ev.policy, "built-in policy instead of a checkpoint")
      ->check(CLI::IsMember({"expert", "idle"}));
  v->add_option("--mode", ev.mode, "continuous or single")
      ->check(CLI::IsMember({"continuous", "single"}));
  v->add_option("--task", ev.task, "pick-place or conveyor-pack")
      ->check(CLI::IsMember({"pick-place", "conveyor-pack"}));
  v->add_option("--T", ev.T, "continuous run duration in sim seconds");
  v->add_option("--episodes", ev.episodes, "single-trial episodes per seed")
      ->check(CLI::PositiveNumber);
  v->add_option("--seeds", ev.seeds, "number of seeds (seed, seed+1, ...)")
      ->check(CLI::PositiveNumber);
  v->add_option("--cfg-scale", ev.cfg_scale, "guidance scale w");
  v->add_option("--cfg-rescale", ev.cfg_rescale, "rescale guided velocity (true/false)");
  v->add_option("--exec-horizon", ev.exec_horizon,
                "rows executed per chunk k (0 = full chunk)");
  v->add_option("--inference-cost", ev.inference_cost,
                "sim seconds charged per inference call");
  v->add_option("--method", ev.method, "method label for reports");
  v->add_option("--regime", ev.regime, "regime label for reports");

  ReportArgs rep;
  auto* r = app.add_subcommand("report", "PRP table, dominance and timelines");
  add_common(r, rep.common);
  r->add_option("--logs", rep.logs, "directories holding run logs")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (g->parsed()) return cmd_gen(gen, args);
    if (t->parsed()) return cmd_train(train, args);
    if (d->parsed()) return cmd_distill(dist, args);
    if (e->parsed()) return cmd_espada(esp, args);
    if (v->parsed()) return cmd_eval(ev, args);
    if (r->parsed()) return cmd_report(rep, args);
  } catch (const UsageError& ex) {
    std::cerr << "usage error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& ex) {
    std::cerr << "usage error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const ArgumentError& ex) {
    std::cerr << "usage error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const IoError& ex) {
    std::cerr << "data error: " << ex.what() << "\n";
    return kExitData;
  } catch (const DataError& ex) {
    std::cerr << "data error: " << ex.what() << "\n";
    return kExitData;
  } catch (const TrainingError& ex) {
    std::cerr << "training error: " << ex.what() << "\n";
    return kExitTraining;
  } catch (const SamplingError& ex) {
    std::cerr << "sampling error: " << ex.what() << "\n";
    return kExitTraining;
  } catch (const fs::filesystem_error& ex) {
    std::cerr << "data error: " << ex.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace
}  // namespace cycleflow

int main(int argc, char** argv) { return cycleflow::run(argc, argv); }
