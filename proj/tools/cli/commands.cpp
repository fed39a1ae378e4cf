// Copyright 2026 The shiftadd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "commands.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "shiftadd/archive.hpp"
#include "shiftadd/costmodel.hpp"
#include "shiftadd/emulator.hpp"
#include "shiftadd/errors.hpp"
#include "shiftadd/ingest.hpp"
#include "shiftadd/netgraph.hpp"
#include "shiftadd/parallel.hpp"
#include "shiftadd/pruner.hpp"
#include "shiftadd/tensor_io.hpp"
#include "shiftadd/toy.hpp"

namespace shiftadd::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

const char* version() { return SHIFTADD_VERSION; }

namespace {

struct Common {
  std::uint64_t seed = 42;
  std::string budget = "zcu15eg";
  std::string metric = "fidelity";
  std::string format = "16:12";
  std::string act_format = "16:10";
  int jobs = 1;
  std::string config_dir;
  std::string manifest;
};

// Collected while a command runs and written as the run manifest.
struct Run {
  std::string command;
  std::vector<std::string> args;
  ordered_json config = ordered_json::object();
  ordered_json inputs = ordered_json::object();
  ordered_json outputs = ordered_json::object();
  fs::path manifest_path;
};

fs::path config_dir(const Common& c) {
  if (!c.config_dir.empty()) return c.config_dir;
  if (const char* env = std::getenv(kConfigDirEnv); env != nullptr && *env != '\0') return env;
  return SHIFTADD_DEFAULT_CONFIG_DIR;
}

// Relative config files are looked up as given first, then in the config dir.
fs::path resolve_config_file(const std::string& name, const fs::path& dir) {
  const fs::path p(name);
  if (p.is_absolute() || fs::exists(p) || dir.empty()) return p;
  return dir / p;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cli", "cannot write " + path.string());
  f << text;
  if (!f) throw IoError("cli", "write failed: " + path.string());
}

std::string percent(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v << '%';
  return os.str();
}

void record_common(Run& run, const Common& c) {
  run.config["seed"] = c.seed;
  run.config["budget"] = c.budget;
  run.config["metric"] = c.metric;
  run.config["weight_format"] = c.format;
  run.config["activation_format"] = c.act_format;
  run.config["jobs"] = c.jobs;
  run.config["config_dir"] = config_dir(c).string();
}

void record_budget(Run& run, const ChipBudget& b) {
  run.config["budget_resolved"] = {{"name", b.name},
                                   {"bram_bits", b.bram_bits},
                                   {"distributed_ram_bits", b.distributed_ram_bits}};
}

NetworkModel load_input_model(const std::string& model, const std::string& blob) {
  return load_model(model, blob.empty() ? fs::path{} : fs::path(blob));
}

Dataset load_frames(const std::string& frames, const std::string& raw,
                    const std::string& labels, Shape3 input_shape) {
  if (frames.empty() == raw.empty()) {
    throw FormatError("cli", "give exactly one of --frames or --raw");
  }
  if (!frames.empty()) return load_dataset(frames, labels.empty() ? fs::path{} : fs::path(labels));
  const SampleStream stream = read_stream(raw);
  const auto framed = frame(average4(stream), input_shape.rows);
  std::vector<int> y;
  if (!labels.empty()) {
    y = read_labels(labels);
    if (y.size() != framed.size()) {
      throw DatasetError("cli", "label count " + std::to_string(y.size()) +
                                    " differs from frame count " + std::to_string(framed.size()));
    }
  }
  return to_dataset(framed, std::move(y));
}

void check_frames(const Dataset& data, Shape3 input_shape) {
  if (data.count == 0) throw DatasetError("cli", "dataset has no frames");
  if (data.frame_shape.size() != input_shape.size()) {
    throw ShapeError("cli", "frame shape " + data.frame_shape.to_string() +
                                " does not match model input " + input_shape.to_string());
  }
}

void truncate(Dataset& data, std::size_t limit) {
  if (limit == 0 || limit >= data.count) return;
  data.count = limit;
  data.values.resize(limit * data.frame_shape.size());
  if (data.has_labels()) data.labels.resize(limit);
}

// ---- compress ---------------------------------------------------------------

struct CompressArgs {
  std::string model, blob, plan, out, json;
  int terms = 2;
  bool include_overheads = false;
};

int cmd_compress(const CompressArgs& a, const Common& c, Run& run, std::ostream& out,
                 std::ostream& err) {
  run.inputs["model"] = a.model;
  const ChipBudget budget = resolve_budget(c.budget, config_dir(c));
  record_budget(run, budget);
  const NetworkModel model = fold_batchnorm(load_input_model(a.model, a.blob));
  const std::size_t n_layers = model.parametric_layers().size();

  CompressionPlan plan;
  if (!a.plan.empty()) {
    const fs::path p = resolve_config_file(a.plan, config_dir(c));
    std::ifstream f(p);
    if (!f) throw IoError("cli", "cannot open plan " + p.string());
    std::stringstream ss;
    ss << f.rdbuf();
    plan = CompressionPlan::from_json(ss.str());
    run.inputs["plan"] = p.string();
  } else {
    const auto wf = FixedPointFormat::parse(c.format);
    if (a.terms < 1 || a.terms > wf.max_terms()) {
      throw RangeError("cli", "--terms must be in [1, " + std::to_string(wf.max_terms()) +
                                  "], got " + std::to_string(a.terms));
    }
    plan = CompressionPlan::uniform(n_layers, a.terms, wf, FixedPointFormat::parse(c.act_format));
  }
  run.config["plan"] = ordered_json::parse(plan.to_json());

  const CompressedModel cm = compress_model(model, plan, c.jobs);
  save_archive(cm, a.out);
  run.outputs["archive"] = a.out;

  CostOptions opts;
  opts.include_overheads = a.include_overheads;
  const CostReport report = cost_report(cm, budget, opts);
  out << report.to_table();
  if (!a.json.empty()) {
    write_text(a.json, report.to_json());
    run.outputs["report"] = a.json;
  }
  if (!report.fit.fits) {
    err << "shiftadd: model needs " << report.model_size_bits << " bits; budget '" << budget.name
        << "' holds " << budget.total() << " bits\n";
    return kExitBudget;
  }
  return kExitOk;
}

// ---- search -----------------------------------------------------------------

struct SearchArgs {
  std::string model, blob, frames, raw, labels, config, out_dir, archive;
  std::optional<int> n_max;
  std::optional<double> epsilon;
  std::optional<std::int64_t> target_size;
  std::size_t limit = 0;
  bool no_budget = false;
};

int cmd_search(const SearchArgs& a, const Common& c, bool metric_set, bool format_set,
               bool act_format_set, Run& run, std::ostream& out, std::ostream& err) {
  const fs::path dir = config_dir(c);
  SearchConfig cfg;
  if (!a.config.empty()) {
    const fs::path p = resolve_config_file(a.config, dir);
    cfg = SearchConfig::load(p);
    run.inputs["search_config"] = p.string();
  }
  if (metric_set || a.config.empty()) cfg.metric = metric_from_string(c.metric);
  if (format_set || a.config.empty()) cfg.weight_format = FixedPointFormat::parse(c.format);
  if (act_format_set || a.config.empty()) {
    cfg.activation_format = FixedPointFormat::parse(c.act_format);
  }
  if (a.n_max) cfg.n_max = *a.n_max;
  if (a.epsilon) cfg.epsilon = *a.epsilon;
  if (a.target_size) cfg.target_size_bits = *a.target_size;
  cfg.jobs = c.jobs;
  if (cfg.n_max < 1) throw RangeError("cli", "--n-max must be >= 1");
  run.config["search"] = ordered_json::parse(cfg.to_json());

  std::optional<ChipBudget> budget;
  if (!a.no_budget) {
    budget = resolve_budget(c.budget, dir);
    record_budget(run, *budget);
  }

  const NetworkModel model = load_input_model(a.model, a.blob);
  run.inputs["model"] = a.model;
  Dataset data = load_frames(a.frames, a.raw, a.labels, model.input_shape);
  truncate(data, a.limit);
  run.inputs["frames"] = a.frames.empty() ? a.raw : a.frames;
  if (!a.labels.empty()) run.inputs["labels"] = a.labels;
  check_frames(data, model.input_shape);

  const SearchContext ctx(model, data, cfg);
  SearchResult result;
  try {
    result = search(ctx, budget);
  } catch (const NoFitError& e) {
    err << "shiftadd: " << e.what() << "\n";
    run.outputs["best_size_bits"] = e.best_size_bits();
    return kExitBudget;
  }

  const fs::path od(a.out_dir);
  fs::create_directories(od);
  write_text(od / "plan.json", result.plan.to_json() + "\n");
  write_text(od / "trace.json", result.trace.to_json() + "\n");
  write_text(od / "sweep.txt", result.trace.sweep_table());
  write_text(od / "refine.txt", result.trace.refine_table());
  for (const char* f : {"plan.json", "trace.json", "sweep.txt", "refine.txt"}) {
    run.outputs[f] = (od / f).string();
  }

  out << "Uniform sweep (" << to_string(cfg.metric) << ")\n" << result.trace.sweep_table();
  out << "\nPer-layer refinement\n" << result.trace.refine_table();
  out << "\nN* = " << result.trace.n_star << "\n";
  out << "selected terms: [";
  for (std::size_t i = 0; i < result.plan.terms.size(); ++i) {
    out << (i ? ", " : "") << result.plan.terms[i];
  }
  out << "]\nselected size: " << result.trace.selected_size_bits << " bits ("
      << format_mb(result.trace.selected_size_bits) << ")\n";
  out << "stopping: " << result.trace.stopping_reason << "\n";

  if (!a.archive.empty()) {
    save_archive(compress_model(ctx.model(), result.plan, c.jobs), a.archive);
    run.outputs["archive"] = a.archive;
  }
  return kExitOk;
}

// ---- emulate ----------------------------------------------------------------

struct EmulateArgs {
  std::string archive, frames, raw, labels, mode = "shiftadd", model, blob, out;
  std::size_t limit = 0;
};

int cmd_emulate(const EmulateArgs& a, const Common& c, Run& run, std::ostream& out,
                std::ostream& err) {
  run.inputs["archive"] = a.archive;
  run.config["mode"] = a.mode;
  const CompressedModel cm = load_archive(a.archive);
  Dataset data = load_frames(a.frames, a.raw, a.labels, cm.input_shape);
  truncate(data, a.limit);
  run.inputs["frames"] = a.frames.empty() ? a.raw : a.frames;
  check_frames(data, cm.input_shape);
  const std::size_t n = data.count;

  std::optional<NetworkModel> float_model;
  if (!a.model.empty()) {
    float_model = fold_batchnorm(load_input_model(a.model, a.blob));
    run.inputs["model"] = a.model;
  }

  if (a.mode == "verify") {
    const ShiftAddEngine engine(cm);
    const QuantizedModel qm = reconstructed_model(cm);
    std::vector<std::size_t> bad_values(n, 0);
    std::vector<char> bad_frame(n, 0);
    parallel_for(n, c.jobs, [&](std::size_t i) {
      const IntResult s = engine.forward(data.frame(i));
      const IntResult r = forward_int(qm, data.frame(i));
      std::size_t diff = s.scores.size() == r.scores.size()
                             ? 0
                             : std::max(s.scores.size(), r.scores.size());
      for (std::size_t j = 0; j < std::min(s.scores.size(), r.scores.size()); ++j) {
        diff += s.scores[j] != r.scores[j] ? 1 : 0;
      }
      bad_values[i] = diff;
      bad_frame[i] = (diff != 0 || s.label != r.label || s.saturations != r.saturations) ? 1 : 0;
    });
    std::size_t frames_bad = 0, values_bad = 0;
    for (std::size_t i = 0; i < n; ++i) {
      frames_bad += static_cast<std::size_t>(bad_frame[i]);
      values_bad += bad_values[i];
    }
    out << "verify: " << n << " frames, " << frames_bad << " mismatches (" << values_bad
        << " differing output integers)\n";
    run.outputs["frames"] = n;
    run.outputs["mismatches"] = frames_bad;
    if (frames_bad != 0) {
      for (std::size_t i = 0; i < n; ++i) {
        if (bad_frame[i]) {
          err << "shiftadd: equivalence violation at frame " << i << "\n";
          break;
        }
      }
      return kExitEquivalence;
    }
    return kExitOk;
  }

  std::vector<int> predicted(n);
  if (a.mode == "shiftadd") {
    const ShiftAddEngine engine(cm);
    parallel_for(n, c.jobs, [&](std::size_t i) { predicted[i] = engine.forward(data.frame(i)).label; });
  } else if (a.mode == "int-ref") {
    const QuantizedModel qm = reconstructed_model(cm);
    parallel_for(n, c.jobs, [&](std::size_t i) { predicted[i] = forward_int(qm, data.frame(i)).label; });
  } else if (a.mode == "float-ref") {
    if (!float_model) throw FormatError("cli", "--mode float-ref needs --model");
    if (float_model->input_shape != cm.input_shape) {
      throw ShapeError("cli", "model input does not match the archive");
    }
    predicted = reference_labels(*float_model, data, c.jobs);
  } else {
    throw FormatError("cli", "unknown mode '" + a.mode + "'");
  }

  out << a.mode << ": " << n << " frames\n";
  if (float_model && a.mode != "float-ref") {
    const auto ref = reference_labels(*float_model, data, c.jobs);
    const EvalReport r = tally(predicted, ref);
    out << "agreement with float-ref: " << r.correct << "/" << r.sample_count << " ("
        << percent(r.overall_rate) << ")\n";
    run.outputs["float_agreement_percent"] = r.overall_rate;
  }
  if (data.has_labels()) {
    const EvalReport r = tally(predicted, data.labels);
    out << "accuracy: " << r.correct << "/" << r.sample_count << " (" << percent(r.overall_rate)
        << ")\n";
    run.outputs["accuracy_percent"] = r.overall_rate;
  }
  if (!a.out.empty()) {
    write_labels(a.out, predicted);
    run.outputs["predictions"] = a.out;
  }
  return kExitOk;
}

// ---- report -----------------------------------------------------------------

struct ReportArgs {
  std::string archive, paper_config, out;
  bool param_table = false;
  bool include_overheads = false;
  bool json = false;
};

int cmd_report(const ReportArgs& a, const Common& c, Run& run, std::ostream& out,
               std::ostream& err) {
  if (a.param_table == !a.archive.empty()) {
    throw FormatError("cli", "give exactly one of --archive or --paper-config");
  }
  const fs::path dir = config_dir(c);
  const ChipBudget budget = resolve_budget(c.budget, dir);
  record_budget(run, budget);
  CostReport report;
  if (a.param_table) {
    const fs::path p = resolve_config_file(
        a.paper_config.empty() ? std::string("paper_config.json") : a.paper_config, dir);
    run.inputs["paper_config"] = p.string();
    report = param_config_report(ParamConfig::load(p), budget);
  } else {
    run.inputs["archive"] = a.archive;
    CostOptions opts;
    opts.include_overheads = a.include_overheads;
    report = cost_report(load_archive(a.archive), budget, opts);
  }
  out << (a.json ? report.to_json() + "\n" : report.to_table());
  if (!a.out.empty()) {
    write_text(a.out, report.to_json() + "\n");
    run.outputs["report"] = a.out;
  }
  run.outputs["model_size_bits"] = report.model_size_bits;
  run.outputs["fits"] = report.fit.fits;
  if (!report.fit.fits) {
    err << "shiftadd: " << report.model_size_bits << " bits exceed budget '" << budget.name
        << "' (" << budget.total() << " bits)\n";
    return kExitBudget;
  }
  return kExitOk;
}

// ---- synth-data / synth-model ------------------------------------------------

struct SynthArgs {
  std::string out_dir;
  std::size_t frames_per_class = 100;
  int classes = 3;
  int rows = 256;
  int channels = 11;
  bool raw = false;
  double min_rule_accuracy = 0.95;
};

int cmd_synth_data(const SynthArgs& a, const Common& c, Run& run, std::ostream& out,
                   std::ostream& err) {
  SynthConfig sc;
  sc.class_count = a.classes;
  sc.frames_per_class = a.frames_per_class;
  sc.seed = c.seed;
  sc.rows = a.rows;
  sc.channels = a.channels;
  sc.keep_raw = a.raw;
  run.config["frames_per_class"] = a.frames_per_class;
  run.config["classes"] = a.classes;
  run.config["rows"] = a.rows;
  run.config["channels"] = a.channels;
  const SynthDataset ds = synth_dataset(sc);

  const fs::path od(a.out_dir);
  fs::create_directories(od);
  write_tensor(od / "frames.tensor", frames_tensor(ds.frames));
  write_labels(od / "labels.txt", ds.labels);
  run.outputs["frames"] = (od / "frames.tensor").string();
  run.outputs["labels"] = (od / "labels.txt").string();
  if (a.raw) {
    write_stream(od / "raw.dvss", ds.raw);
    run.outputs["raw"] = (od / "raw.dvss").string();
  }
  run.outputs["rule_accuracy"] = ds.rule_accuracy;
  out << "wrote " << ds.frames.size() << " frames (" << a.rows << "x" << a.channels << ") to "
      << od.string() << "\n";
  out << "rule classifier accuracy: " << percent(100.0 * ds.rule_accuracy) << "\n";
  if (ds.rule_accuracy < a.min_rule_accuracy) {
    err << "shiftadd: rule classifier accuracy below " << percent(100.0 * a.min_rule_accuracy)
        << "; classes are not separable\n";
    return kExitUsage;
  }
  return kExitOk;
}

struct SynthModelArgs {
  std::string out_dir;
  std::size_t calibration = 100;
};

int cmd_synth_model(const SynthModelArgs& a, const Common& c, Run& run, std::ostream& out) {
  ToyConfig tc;
  tc.seed = c.seed;
  tc.calibration_frames_per_class = a.calibration;
  run.config["calibration_frames_per_class"] = a.calibration;
  const NetworkModel m = make_toy_model(tc);
  const fs::path od(a.out_dir);
  fs::create_directories(od);
  save_model(m, od / "model.json", od / "model.bin");
  run.outputs["model"] = (od / "model.json").string();
  out << "wrote toy model: " << m.parametric_layers().size() << " parametric layers, "
      << m.weight_count() << " weights, " << m.parameter_count() << " stored values\n";
  return kExitOk;
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kNoFit:
      return kExitBudget;
    case ErrorKind::kEquivalence:
      return kExitEquivalence;
    default:
      return kExitUsage;
  }
}

void write_manifest(const Run& run, int code, const std::string& message) {
  if (run.manifest_path.empty()) return;
  ordered_json j;
  j["tool"] = "shiftadd";
  j["version"] = version();
  j["command"] = run.command;
  j["args"] = run.args;
  j["config"] = run.config;
  j["inputs"] = run.inputs;
  j["outputs"] = run.outputs;
  j["exit_code"] = code;
  if (!message.empty()) j["error"] = message;
  try {
    write_text(run.manifest_path, j.dump(2) + "\n");
  } catch (const Error&) {
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Shift-add compression compiler and bit-exact emulator", "shiftadd"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string("shiftadd ") + version());

  Common c;
  app.add_option("--seed", c.seed, "RNG seed for generated data and models");
  auto* budget_opt = app.add_option("--budget", c.budget, "budget preset name or JSON file");
  auto* metric_opt = app.add_option("--metric", c.metric, "fidelity or accuracy")
                         ->check(CLI::IsMember({"fidelity", "accuracy"}));
  auto* format_opt = app.add_option("--format", c.format, "weight format W:F");
  auto* act_opt = app.add_option("--act-format", c.act_format, "activation format W:F");
  app.add_option("--jobs", c.jobs, "worker threads")->check(CLI::Range(1, 256));
  app.add_option("--config-dir", c.config_dir, "config directory (default $SHIFTADD_CONFIG_DIR)");
  app.add_option("--manifest", c.manifest, "run manifest path");
  (void)budget_opt;

  CompressArgs ca;
  auto* compress = app.add_subcommand("compress", "rewrite a model into shift-add form");
  compress->add_option("--model", ca.model, "model manifest (JSON)")->required();
  compress->add_option("--blob", ca.blob, "weight blob (default from manifest)");
  auto* plan_opt = compress->add_option("--plan", ca.plan, "compression plan JSON");
  compress->add_option("--terms", ca.terms, "uniform terms per weight")->excludes(plan_opt);
  compress->add_option("--out", ca.out, "archive path")->required();
  compress->add_option("--report-json", ca.json, "write the cost report as JSON");
  compress->add_flag("--include-overheads", ca.include_overheads, "count biases and headers");

  SearchArgs sa;
  auto* search_cmd = app.add_subcommand("search", "search per-layer term budgets");
  search_cmd->add_option("--model", sa.model, "model manifest (JSON)")->required();
  search_cmd->add_option("--blob", sa.blob, "weight blob");
  search_cmd->add_option("--frames", sa.frames, "frames tensor");
  search_cmd->add_option("--raw", sa.raw, "raw sample stream");
  search_cmd->add_option("--labels", sa.labels, "labels file");
  search_cmd->add_option("--config", sa.config, "search config JSON");
  search_cmd->add_option("--n-max", sa.n_max, "largest uniform budget to sweep");
  search_cmd->add_option("--epsilon", sa.epsilon, "metric tolerance in percentage points");
  search_cmd->add_option("--target-size", sa.target_size, "stop refining at this many bits");
  search_cmd->add_option("--limit", sa.limit, "use only the first N frames");
  search_cmd->add_option("--out-dir", sa.out_dir, "output directory")->required();
  search_cmd->add_option("--archive", sa.archive, "also write the selected archive");
  search_cmd->add_flag("--no-budget", sa.no_budget, "skip the budget fit check");

  EmulateArgs ea;
  auto* emulate = app.add_subcommand("emulate", "run an archive on frames");
  emulate->add_option("--archive", ea.archive, "compressed archive")->required();
  emulate->add_option("--frames", ea.frames, "frames tensor");
  emulate->add_option("--raw", ea.raw, "raw sample stream");
  emulate->add_option("--labels", ea.labels, "labels file");
  emulate->add_option("--mode", ea.mode, "shiftadd | int-ref | float-ref | verify")
      ->check(CLI::IsMember({"shiftadd", "int-ref", "float-ref", "verify"}));
  emulate->add_option("--model", ea.model, "float model for float-ref and agreement");
  emulate->add_option("--blob", ea.blob, "weight blob for --model");
  emulate->add_option("--limit", ea.limit, "use only the first N frames");
  emulate->add_option("--out", ea.out, "write predicted labels");

  ReportArgs ra;
  auto* report = app.add_subcommand("report", "storage, fit and hardware estimates");
  auto* archive_opt = report->add_option("--archive", ra.archive, "compressed archive");
  report->add_option("--paper-config", ra.paper_config, "parameter-count table (JSON)")
      ->expected(0, 1)
      ->excludes(archive_opt);
  report->add_flag("--include-overheads", ra.include_overheads, "count biases and headers");
  report->add_flag("--json", ra.json, "print JSON");
  report->add_option("--out", ra.out, "also write the JSON report here");

  SynthArgs ya;
  auto* synth = app.add_subcommand("synth-data", "generate a labelled synthetic dataset");
  synth->add_option("--out-dir", ya.out_dir, "output directory")->required();
  synth->add_option("--frames-per-class", ya.frames_per_class, "frames per class");
  synth->add_option("--classes", ya.classes, "class count (1-3)");
  synth->add_option("--rows", ya.rows, "rows per frame");
  synth->add_option("--channels", ya.channels, "channels");
  synth->add_flag("--raw", ya.raw, "also write the raw stream");

  SynthModelArgs ma;
  auto* synth_model = app.add_subcommand("synth-model", "generate the seeded toy model");
  synth_model->add_option("--out-dir", ma.out_dir, "output directory")->required();
  synth_model->add_option("--calibration", ma.calibration, "calibration frames per class");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  ra.param_table = report->count("--paper-config") > 0;

  Run run;
  run.args = args;
  record_common(run, c);
  fs::path primary;
  if (compress->parsed()) {
    run.command = "compress";
    primary = ca.out + ".run.json";
  } else if (search_cmd->parsed()) {
    run.command = "search";
    primary = fs::path(sa.out_dir) / "run.json";
  } else if (emulate->parsed()) {
    run.command = "emulate";
    if (!ea.out.empty()) primary = ea.out + ".run.json";
  } else if (report->parsed()) {
    run.command = "report";
    if (!ra.out.empty()) primary = ra.out + ".run.json";
  } else if (synth->parsed()) {
    run.command = "synth-data";
    primary = fs::path(ya.out_dir) / "run.json";
  } else {
    run.command = "synth-model";
    primary = fs::path(ma.out_dir) / "run.json";
  }
  if (!c.manifest.empty()) {
    run.manifest_path = c.manifest;
  } else if (!primary.empty()) {
    run.manifest_path = primary;
  } else {
    run.manifest_path = "shiftadd-" + run.command + ".run.json";
  }

  int code = kExitOk;
  std::string message;
  try {
    if (compress->parsed()) {
      code = cmd_compress(ca, c, run, out, err);
    } else if (search_cmd->parsed()) {
      code = cmd_search(sa, c, metric_opt->count() > 0, format_opt->count() > 0,
                        act_opt->count() > 0, run, out, err);
    } else if (emulate->parsed()) {
      code = cmd_emulate(ea, c, run, out, err);
    } else if (report->parsed()) {
      code = cmd_report(ra, c, run, out, err);
    } else if (synth->parsed()) {
      code = cmd_synth_data(ya, c, run, out, err);
    } else {
      code = cmd_synth_model(ma, c, run, out);
    }
  } catch (const NoFitError& e) {
    message = e.what();
    err << "shiftadd: " << message << " (best size " << e.best_size_bits() << " bits)\n";
    code = kExitBudget;
  } catch (const Error& e) {
    message = e.what();
    err << "shiftadd: " << message << "\n";
    code = exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    message = e.what();
    err << "shiftadd: " << message << "\n";
    code = kExitUsage;
  }
  write_manifest(run, code, message);
  return code;
}

}  // namespace shiftadd::cli
