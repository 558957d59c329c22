// imed: dataset generation, training, distillation, evaluation and ablations.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "imed/checkpoint.hpp"
#include "imed/config.hpp"
#include "imed/datasets.hpp"
#include "imed/harness.hpp"
#include "imed/io.hpp"
#include "imed/tools/ablation.hpp"
#include "imed/tools/process.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace imed;
using namespace imed::tools;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kIo = 3, kHalted = 4 };

struct Globals {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool force = false;
};

void init_logging() {
  auto logger = spdlog::stderr_color_mt("imed");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
  const char* env = std::getenv("IMED_LOG_LEVEL");
  const std::string level = env ? env : "info";
  if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else if (level == "info") {
    spdlog::set_level(spdlog::level::info);
  } else if (level == "warn") {
    spdlog::set_level(spdlog::level::warn);
  } else {
    spdlog::set_level(spdlog::level::info);
    spdlog::warn("IMED_LOG_LEVEL='{}' not one of debug, info, warn; using info", level);
  }
}

RunConfig load_config(const Globals& g) {
  RunConfig cfg = g.config.empty() ? RunConfig{} : RunConfig::load(g.config);
  if (g.seed) cfg.seed = *g.seed;
  cfg.validate();
  return cfg;
}

fs::path require_out(const Globals& g) {
  if (g.out.empty()) throw ConfigError("--out DIR is required");
  return g.out;
}

void write_metrics_summary(const fs::path& dir, const MetricsRecord& r) {
  write_json_atomic(dir / "final_metrics.json", r.to_json());
}

// -- commands ---------------------------------------------------------------

int cmd_gen_data(const Globals& g, const std::optional<std::string>& kind,
                 const std::optional<double>& shift, const std::optional<int>& n,
                 const std::optional<double>& noise) {
  DatasetSpec spec = g.config.empty() ? DatasetSpec{} : RunConfig::load(g.config).dataset;
  if (kind) spec.kind = *kind;
  if (shift) spec.shift = *shift;
  if (n) spec.n = *n;
  if (noise) spec.noise = *noise;
  if (g.seed) spec.seed = *g.seed;
  spec = DatasetSpec::from_json(spec.to_json(), "dataset");
  const fs::path out = require_out(g);
  write_bundle(generate_dataset(spec), out, g.force);
  spdlog::info("wrote {} bundle (shift={}, n={}, seed={}) to {}", spec.kind, spec.shift, spec.n,
               spec.seed, out.string());
  return kOk;
}

int cmd_train_component(const Globals& g, const std::string& data_dir) {
  const RunConfig cfg = load_config(g);
  const DatasetBundle data = read_bundle(data_dir);
  const fs::path out = require_out(g);
  prepare_output_dir(out, g.force);
  write_json_atomic(out / "config.json", cfg.to_json());
  JsonlLog log(out);
  auto comps = train_components(cfg, data, log);
  log.close();
  save_archive(out / "components.ckpt", components_archive(cfg, comps, data.input_dim(), data.num_classes));
  write_metrics_summary(out, evaluate_components(comps, cfg, data));
  return kOk;
}

int cmd_train_teacher(const Globals& g, const std::string& data_dir, const std::string& components) {
  const RunConfig cfg = load_config(g);
  const DatasetBundle data = read_bundle(data_dir);
  const fs::path out = require_out(g);
  prepare_output_dir(out, g.force);
  write_json_atomic(out / "config.json", cfg.to_json());
  std::optional<Archive> pre;
  if (!components.empty()) pre = load_archive(components);
  JsonlLog log(out);
  try {
    Teacher t = train_teacher(cfg, data, log, pre ? &*pre : nullptr);
    log.close();
    save_archive(out / "teacher.ckpt", teacher_archive(t));
    const ParamCounts pc = param_counts(cfg, data.input_dim(), data.num_classes);
    write_json_atomic(out / "params.json", {{"component", pc.component},
                                            {"teacher", pc.teacher},
                                            {"student", pc.student},
                                            {"fusion_overhead", pc.fusion_overhead}});
    write_metrics_summary(out, evaluate_teacher(t, data));
  } catch (const TrainingHalted& e) {
    log.close();
    write_json_atomic(out / "halt_snapshot.json", e.snapshot());
    spdlog::error("training halted: {} (snapshot in {})", e.what(), (out / "halt_snapshot.json").string());
    return kHalted;
  }
  return kOk;
}

int cmd_distill(const Globals& g, const std::string& data_dir, const std::string& teacher_path) {
  Teacher teacher = load_teacher(load_archive(teacher_path));
  RunConfig cfg = g.config.empty() ? teacher.config : RunConfig::load(g.config);
  if (g.seed) cfg.seed = *g.seed;
  cfg.validate();
  const DatasetBundle data = read_bundle(data_dir);
  const fs::path out = require_out(g);
  prepare_output_dir(out, g.force);
  write_json_atomic(out / "config.json", cfg.to_json());
  JsonlLog log(out);
  try {
    Student s = train_student(cfg, teacher, data, log);
    log.close();
    save_archive(out / "student.ckpt", student_archive(s));
    write_metrics_summary(out, evaluate_student(s, data));
  } catch (const TrainingHalted& e) {
    log.close();
    write_json_atomic(out / "halt_snapshot.json", e.snapshot());
    spdlog::error("training halted: {}", e.what());
    return kHalted;
  }
  return kOk;
}

int cmd_eval(const Globals& g, const std::string& checkpoint, const std::string& data_dir) {
  const Archive a = load_archive(checkpoint);
  const DatasetBundle data = read_bundle(data_dir);
  MetricsRecord r;
  std::size_t params = 0;
  const std::string kind = archive_kind(a);
  if (kind == "teacher") {
    Teacher t = load_teacher(a);
    r = evaluate_teacher(t, data);
    params = t.param_count();
  } else if (kind == "student") {
    Student s = load_student(a);
    r = evaluate_student(s, data);
    params = s.param_count();
  } else {
    auto comps = load_components(a);
    RunConfig cfg = RunConfig::from_json(a.meta.at("config"));
    r = evaluate_components(comps, cfg, data);
    params = count_params(comps.front().params());
  }
  json j = r.to_json();
  j["params"] = params;
  std::cout << j.dump() << std::endl;
  if (!g.out.empty()) write_json_atomic(fs::path(g.out) / "eval.json", j);
  return kOk;
}

// -- ablation ---------------------------------------------------------------

std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string run_dir_name(AblationAxis axis, const json& value) {
  std::string label = value_label(value);
  for (char& c : label) {
    if (c == '/' || c == ' ') c = '_';
  }
  return std::string(to_string(axis)) + "=" + label;
}

std::vector<SummaryRow> collect_rows(const fs::path& root) {
  const json plan = read_json(root / "plan.json");
  std::vector<SummaryRow> rows;
  for (const auto& v : plan.at("runs")) {
    const fs::path rd = root / v.at("dir").get<std::string>();
    SummaryRow r;
    r.axis = plan.at("axis").get<std::string>();
    r.value = v.at("value").get<std::string>();
    r.transfer = v.at("transfer").get<std::string>();
    if (!fs::exists(rd / "result.json")) {
      r.status = "failed";
      r.error = "no result (run did not finish)";
      rows.push_back(r);
      continue;
    }
    const json res = read_json(rd / "result.json");
    r.status = res.at("status").get<std::string>();
    r.error = res.value("error", "");
    r.model = res.value("model", "");
    r.source_acc = res.value("source_acc", 0.0);
    r.target_acc = res.value("target_acc", 0.0);
    r.teacher_target_acc = res.value("teacher_target_acc", 0.0);
    r.component_mean_target_acc = res.value("component_mean_target_acc", 0.0);
    r.component_max_target_acc = res.value("component_max_target_acc", 0.0);
    r.params_component = res.value("params_component", std::size_t{0});
    r.params_teacher = res.value("params_teacher", std::size_t{0});
    r.params_student = res.value("params_student", std::size_t{0});
    rows.push_back(r);
  }
  return rows;
}

int write_report(const fs::path& root) {
  const auto rows = with_average_rows(collect_rows(root));
  write_file_atomic(root / "summary.csv", summary_csv(rows));
  write_file_atomic(root / "target_acc.svg", accuracy_plot_svg(rows, "target_acc"));
  write_file_atomic(root / "source_acc.svg", accuracy_plot_svg(rows, "source_acc"));
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.transfer != "avg" && r.status != "ok";
  spdlog::info("report: {} rows, {} failed; wrote {}", rows.size(), failed, (root / "summary.csv").string());
  return kOk;
}

/// One (value, transfer) run through child processes; returns result.json content.
json run_one(const fs::path& exe, const RunConfig& cfg, bool distill, const fs::path& data,
             const fs::path& rd) {
  fs::create_directories(rd);
  write_json_atomic(rd / "config.json", cfg.to_json());
  const fs::path logs = rd / "logs";
  auto step = [&](const std::string& name, std::vector<std::string> args) {
    const fs::path log = logs / (name + ".log");
    const int rc = run_child(exe, args, log);
    if (rc != 0) {
      throw std::runtime_error(name + " exited with " + std::to_string(rc) + ": " + last_line(log));
    }
  };
  const std::string config = (rd / "config.json").string();
  json res{{"status", "ok"}};
  try {
    std::vector<std::string> teacher_args{"train-teacher", "--config", config, "--data", data.string(),
                                          "--out", (rd / "teacher").string(), "--force"};
    if (cfg.components_pretrained) {
      step("train-component", {"train-component", "--config", config, "--data", data.string(), "--out",
                               (rd / "components").string(), "--force"});
      teacher_args.insert(teacher_args.end(), {"--components", (rd / "components/components.ckpt").string()});
    }
    step("train-teacher", teacher_args);
    step("eval-teacher", {"eval", "--checkpoint", (rd / "teacher/teacher.ckpt").string(), "--data",
                          data.string(), "--out", (rd / "teacher").string()});
    const json te = read_json(rd / "teacher/eval.json");
    const json params = read_json(rd / "teacher/params.json");
    res["teacher_target_acc"] = te.at("target_acc");
    const auto comp = te.value("component_target_acc", std::vector<double>{});
    double mean = 0.0, best = 0.0;
    for (double a : comp) mean += a, best = std::max(best, a);
    if (!comp.empty()) mean /= static_cast<double>(comp.size());
    res["component_mean_target_acc"] = mean;
    res["component_max_target_acc"] = best;
    res["params_component"] = params.at("component");
    res["params_teacher"] = params.at("teacher");
    res["params_student"] = params.at("student");
    if (distill) {
      step("distill", {"distill", "--config", config, "--data", data.string(), "--teacher",
                       (rd / "teacher/teacher.ckpt").string(), "--out", (rd / "student").string(), "--force"});
      step("eval-student", {"eval", "--checkpoint", (rd / "student/student.ckpt").string(), "--data",
                            data.string(), "--out", (rd / "student").string()});
      const json se = read_json(rd / "student/eval.json");
      res["model"] = "student";
      res["source_acc"] = se.at("source_acc");
      res["target_acc"] = se.at("target_acc");
    } else {
      res["model"] = "teacher";
      res["source_acc"] = te.at("source_acc");
      res["target_acc"] = te.at("target_acc");
    }
  } catch (const std::exception& e) {
    res["status"] = "failed";
    res["error"] = e.what();
    spdlog::warn("run {} failed: {}", rd.string(), e.what());
  }
  write_json_atomic(rd / "result.json", res);
  return res;
}

int cmd_ablate(const Globals& g, const std::string& plan_path) {
  AblationPlan plan = AblationPlan::load(plan_path);
  if (g.seed) plan.base.seed = *g.seed;
  const fs::path out = require_out(g);
  prepare_output_dir(out, g.force);
  const fs::path exe = self_executable();

  json runs = json::array();
  for (const auto& t : plan.transfers) {
    const fs::path data = out / "data" / transfer_name(t);
    {
      const fs::path log = out / "data" / (transfer_name(t) + ".log");
      const int rc = run_child(exe,
                               {"gen-data", "--kind", t.kind, "--shift", exact(t.shift), "--n",
                                std::to_string(t.n), "--noise", exact(t.noise), "--seed",
                                std::to_string(t.seed), "--out", data.string(), "--force"},
                               log);
      if (rc != 0) throw IoError("gen-data failed for " + transfer_name(t) + ": " + last_line(log));
    }
  }
  for (const auto& v : plan.values) {
    for (const auto& t : plan.transfers) {
      runs.push_back({{"value", value_label(v)},
                      {"transfer", transfer_name(t)},
                      {"dir", (fs::path("runs") / run_dir_name(plan.axis, v) / transfer_name(t)).string()}});
    }
  }
  write_json_atomic(out / "plan.json", {{"axis", to_string(plan.axis)}, {"runs", runs}});

  std::size_t i = 0;
  for (const auto& v : plan.values) {
    bool distill = true;
    RunConfig cfg = apply_axis(plan.base, plan.axis, v, &distill);
    for (const auto& t : plan.transfers) {
      RunConfig c = cfg;
      c.dataset = t;
      c.name = transfer_name(t);
      const fs::path rd = out / runs[i++].at("dir").get<std::string>();
      spdlog::info("ablate: {}={} on {}", to_string(plan.axis), value_label(v), c.name);
      run_one(exe, c, distill, out / "data" / transfer_name(t), rd);
    }
  }
  return write_report(out);
}

int cmd_report(const Globals& g, const std::string& runs) {
  const fs::path root = runs.empty() ? require_out(g) : fs::path(runs);
  return write_report(root);
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"imed: instance-aware model ensemble with distillation on synthetic domain shifts"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Run configuration (JSON)");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--seed", g.seed, "Override the master seed (dataset seed for gen-data)");
  app.add_flag("--force", g.force, "Overwrite a non-empty output directory");

  std::optional<std::string> kind;
  std::optional<double> shift, noise;
  std::optional<int> n;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic source/target/test bundle");
  gen->add_option("--kind", kind, "moons | blobs | rings");
  gen->add_option("--shift", shift, "Domain shift (degrees for moons)");
  gen->add_option("--n", n, "Points per split");
  gen->add_option("--noise", noise, "Noise level");

  std::string data, components, teacher, checkpoint, plan, runs;
  auto* tc = app.add_subcommand("train-component", "Pre-train the component models alone");
  tc->add_option("--data", data, "Dataset bundle directory")->required();
  auto* tt = app.add_subcommand("train-teacher", "Train components and the ensemble teacher");
  tt->add_option("--data", data, "Dataset bundle directory")->required();
  tt->add_option("--components", components, "Pre-trained components checkpoint");
  auto* ds = app.add_subcommand("distill", "Distill a teacher checkpoint into a student");
  ds->add_option("--data", data, "Dataset bundle directory")->required();
  ds->add_option("--teacher", teacher, "Teacher checkpoint")->required();
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint; prints one JSON line");
  ev->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  ev->add_option("--data", data, "Dataset bundle directory")->required();
  auto* ab = app.add_subcommand("ablate", "Run a one-factor ablation plan");
  ab->add_option("--plan", plan, "Ablation plan (JSON)")->required();
  auto* rp = app.add_subcommand("report", "Rebuild summary.csv and plots of an ablation directory");
  rp->add_option("--runs", runs, "Ablation output directory (defaults to --out)");
  for (auto* sub : {gen, tc, tt, ds, ev, ab, rp}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen_data(g, kind, shift, n, noise);
    if (*tc) return cmd_train_component(g, data);
    if (*tt) return cmd_train_teacher(g, data, components);
    if (*ds) return cmd_distill(g, data, teacher);
    if (*ev) return cmd_eval(g, checkpoint, data);
    if (*ab) return cmd_ablate(g, plan);
    if (*rp) return cmd_report(g, runs);
  } catch (const ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kConfig;
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return kIo;
  } catch (const DimensionError& e) {
    spdlog::error("dimension mismatch: {}", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kFailure;
  }
  return kFailure;
}
