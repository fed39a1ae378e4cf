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

#include "shiftadd/pruner.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "json_codec.hpp"
#include "shiftadd/emulator.hpp"
#include "shiftadd/errors.hpp"
#include "shiftadd/parallel.hpp"

namespace shiftadd {

using nlohmann::json;
using nlohmann::ordered_json;

const char* to_string(Metric m) {
  return m == Metric::kAccuracy ? "accuracy" : "fidelity";
}

Metric metric_from_string(const std::string& name) {
  if (name == "accuracy") return Metric::kAccuracy;
  if (name == "fidelity") return Metric::kFidelity;
  throw FormatError("pruner", "unknown metric '" + name + "' (fidelity|accuracy)");
}

EvalReport tally(std::span<const int> predicted, std::span<const int> target) {
  if (target.empty()) throw DatasetError("pruner", "empty dataset");
  if (predicted.size() != target.size()) {
    throw DatasetError("pruner", "prediction and target counts differ");
  }
  EvalReport r;
  std::map<int, std::size_t> hits;
  for (std::size_t i = 0; i < target.size(); ++i) {
    ++r.per_class_count[target[i]];
    if (predicted[i] == target[i]) {
      ++hits[target[i]];
      ++r.correct;
    }
  }
  r.sample_count = target.size();
  for (const auto& [cls, n] : r.per_class_count) {
    r.per_class_rate[cls] = 100.0 * static_cast<double>(hits[cls]) / static_cast<double>(n);
  }
  r.overall_rate = 100.0 * static_cast<double>(r.correct) / static_cast<double>(r.sample_count);
  return r;
}

std::vector<int> reference_labels(const NetworkModel& model, const Dataset& data,
                                  int jobs) {
  std::vector<int> out(data.count);
  parallel_for(data.count, jobs,
               [&](std::size_t i) { out[i] = forward_float(model, data.frame(i)).label; });
  return out;
}

std::vector<int> predict(const CompressedModel& cm, const Dataset& data, int jobs) {
  const ShiftAddEngine engine(cm);
  std::vector<int> out(data.count);
  parallel_for(data.count, jobs,
               [&](std::size_t i) { out[i] = engine.forward(data.frame(i)).label; });
  return out;
}

EvalReport evaluate(const CompressedModel& cm, const Dataset& data, Metric metric,
                    std::span<const int> reference, int jobs) {
  if (data.count == 0) throw DatasetError("pruner", "empty dataset");
  std::span<const int> target;
  if (metric == Metric::kAccuracy) {
    if (!data.has_labels()) {
      throw DatasetError("pruner", "accuracy metric needs ground-truth labels");
    }
    target = data.labels;
  } else {
    if (reference.empty()) {
      throw DatasetError("pruner", "fidelity metric needs reference labels");
    }
    target = reference;
  }
  if (target.size() != data.count) {
    throw DatasetError("pruner", "target label count differs from frame count");
  }
  const auto predicted = predict(cm, data, jobs);
  EvalReport r = tally(predicted, target);
  r.plan = cm.plan;
  return r;
}

// ---- config ----------------------------------------------------------------

std::string SearchConfig::to_json() const {
  ordered_json j;
  j["n_max"] = n_max;
  j["epsilon"] = epsilon;
  j["metric"] = shiftadd::to_string(metric);
  j["trial_order"] = trial_order == TrialOrder::kAscending ? "ascending" : "descending";
  j["target_size_bits"] = target_size_bits ? json(*target_size_bits) : json(nullptr);
  j["explore_all_budgets"] = explore_all_budgets;
  j["weight_format"] = detail::format_to_json(weight_format);
  j["activation_format"] = detail::format_to_json(activation_format);
  return j.dump(2);
}

SearchConfig SearchConfig::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    SearchConfig c;
    c.n_max = j.value("n_max", c.n_max);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.metric = metric_from_string(j.value("metric", std::string("fidelity")));
    const auto order = j.value("trial_order", std::string("ascending"));
    if (order == "ascending") {
      c.trial_order = TrialOrder::kAscending;
    } else if (order == "descending") {
      c.trial_order = TrialOrder::kDescending;
    } else {
      throw FormatError("pruner", "trial_order must be ascending or descending");
    }
    if (j.contains("target_size_bits") && !j.at("target_size_bits").is_null()) {
      c.target_size_bits = j.at("target_size_bits").get<std::int64_t>();
    }
    c.explore_all_budgets = j.value("explore_all_budgets", false);
    if (j.contains("weight_format")) c.weight_format = detail::format_from_json(j.at("weight_format"));
    if (j.contains("activation_format")) {
      c.activation_format = detail::format_from_json(j.at("activation_format"));
    }
    if (c.n_max < 1) throw FormatError("pruner", "n_max must be >= 1");
    if (c.epsilon < 0.0) throw FormatError("pruner", "epsilon must be >= 0");
    return c;
  } catch (const json::exception& e) {
    throw FormatError("pruner", std::string("search config: ") + e.what());
  }
}

SearchConfig SearchConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("pruner", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

// ---- context ---------------------------------------------------------------

SearchContext::SearchContext(const NetworkModel& model, const Dataset& data,
                             SearchConfig config)
    : model_(fold_batchnorm(model)), data_(data), config_(std::move(config)) {
  if (data_.count == 0) throw DatasetError("pruner", "empty dataset");
  if (data_.frame_shape.size() != model_.input_shape.size()) {
    throw DatasetError("pruner", "frame shape " + data_.frame_shape.to_string() +
                                     " does not match model input " +
                                     model_.input_shape.to_string());
  }
  if (config_.n_max < 1) throw FormatError("pruner", "n_max must be >= 1");
  float_labels_ = reference_labels(model_, data_, config_.jobs);
  if (config_.metric == Metric::kAccuracy) {
    if (!data_.has_labels()) {
      throw DatasetError("pruner", "accuracy metric needs ground-truth labels");
    }
    targets_ = data_.labels;
  } else {
    targets_ = float_labels_;
  }
  reference_ = tally(float_labels_, targets_);
}

CompressionPlan SearchContext::uniform_plan(int n) const {
  return CompressionPlan::uniform(model_.parametric_layers().size(), n,
                                  config_.weight_format, config_.activation_format);
}

TraceEntry SearchContext::evaluate_plan(const CompressionPlan& plan, std::string phase,
                                        int layer) const {
  TraceEntry e;
  e.phase = std::move(phase);
  e.layer = layer;
  e.plan = plan;
  const CompressedModel cm = compress_model(model_, plan, config_.jobs);
  e.report = tally(predict(cm, data_, config_.jobs), targets_);
  e.report.plan = plan;
  e.size_bits = model_size_bits(cm);
  return e;
}

// ---- search ----------------------------------------------------------------

namespace {

int capped_n_max(const SearchContext& ctx) {
  return std::min(ctx.config().n_max, ctx.config().weight_format.max_terms());
}

}  // namespace

SearchTrace uniform_sweep(const SearchContext& ctx) {
  SearchTrace trace;
  trace.metric = ctx.config().metric;
  trace.reference = ctx.reference_report();
  const int n_max = capped_n_max(ctx);
  std::size_t best = 0;
  for (int n = 1; n <= n_max; ++n) {
    trace.entries.push_back(ctx.evaluate_plan(ctx.uniform_plan(n), "sweep"));
    best = std::max(best, trace.entries.back().report.correct);
  }
  const double best_rate = 100.0 * static_cast<double>(best) /
                           static_cast<double>(ctx.targets().size());
  for (auto& e : trace.entries) {
    if (e.report.overall_rate >= best_rate - ctx.config().epsilon - 1e-9) {
      e.accepted = true;
      trace.n_star = e.plan.terms.empty() ? 1 : e.plan.terms.front();
      trace.selected = e.plan;
      trace.selected_size_bits = e.size_bits;
      break;
    }
  }
  trace.stopping_reason = "swept N = 1.." + std::to_string(n_max) + "; N* = " +
                          std::to_string(trace.n_star);
  return trace;
}

SearchTrace refine_per_layer(const SearchContext& ctx, int base_n) {
  SearchTrace trace;
  trace.metric = ctx.config().metric;
  trace.reference = ctx.reference_report();
  trace.n_star = base_n;
  CompressionPlan current = ctx.uniform_plan(base_n);
  TraceEntry base = ctx.evaluate_plan(current, "base");
  base.accepted = true;
  std::size_t cur_correct = base.report.correct;
  std::int64_t cur_size = base.size_bits;
  trace.entries.push_back(base);

  const auto& cfg = ctx.config();
  const int layers = static_cast<int>(current.terms.size());
  trace.stopping_reason = "all layers tried";
  auto target_reached = [&] { return cfg.target_size_bits && cur_size <= *cfg.target_size_bits; };
  if (target_reached()) {
    trace.stopping_reason = "target size reached before refinement";
  } else {
    for (int step = 0; step < layers; ++step) {
      const int l = cfg.trial_order == TrialOrder::kAscending ? step : layers - 1 - step;
      std::vector<int> candidates;
      if (cfg.explore_all_budgets) {
        for (int n = 1; n < current.terms[static_cast<std::size_t>(l)]; ++n) candidates.push_back(n);
      } else {
        candidates.push_back(1);
      }
      for (int n : candidates) {
        CompressionPlan trial = current;
        trial.terms[static_cast<std::size_t>(l)] = n;
        TraceEntry e = ctx.evaluate_plan(trial, "refine", l);
        e.accepted = e.report.correct >= cur_correct && e.size_bits < cur_size;
        trace.entries.push_back(e);
        if (e.accepted) {
          current = trial;
          cur_correct = e.report.correct;
          cur_size = e.size_bits;
          break;
        }
      }
      if (target_reached()) {
        trace.stopping_reason = "target size reached after layer " + std::to_string(l + 1);
        break;
      }
    }
  }
  trace.selected = current;
  trace.selected_size_bits = cur_size;
  return trace;
}

SearchResult search(const SearchContext& ctx, const std::optional<ChipBudget>& budget) {
  SearchTrace sweep = uniform_sweep(ctx);
  SearchTrace refine = refine_per_layer(ctx, sweep.n_star);

  SearchTrace trace;
  trace.metric = ctx.config().metric;
  trace.reference = ctx.reference_report();
  trace.n_star = sweep.n_star;
  trace.entries = std::move(sweep.entries);
  for (auto& e : refine.entries) trace.entries.push_back(std::move(e));
  trace.selected = refine.selected;
  trace.selected_size_bits = refine.selected_size_bits;
  trace.stopping_reason = sweep.stopping_reason + "; refinement: " + refine.stopping_reason;

  // Among entries within epsilon of the best metric (and inside the budget,
  // when one is given), the smallest plan wins; earlier entries break ties.
  auto fits = [&](std::int64_t bits) { return !budget || fit_check(bits, *budget).fits; };
  std::size_t best_correct = 0;
  bool any = false;
  for (const auto& e : trace.entries) {
    if (!fits(e.size_bits)) continue;
    best_correct = std::max(best_correct, e.report.correct);
    any = true;
  }
  if (!any) {
    const CompressionPlan floor_plan = ctx.uniform_plan(1);
    const auto floor_size = model_size_bits(layer_counts(ctx.model(), floor_plan));
    if (!fits(floor_size)) {
      throw NoFitError("no plan fits budget '" + budget->name + "' (" +
                           std::to_string(budget->total()) +
                           " bits); smallest achievable size is " +
                           std::to_string(floor_size) + " bits",
                       floor_size);
    }
    trace.entries.push_back(ctx.evaluate_plan(floor_plan, "fallback"));
    best_correct = trace.entries.back().report.correct;
    trace.stopping_reason += "; no evaluated plan fit the budget, fell back to N = 1";
  }
  const double floor_rate = 100.0 * static_cast<double>(best_correct) /
                                static_cast<double>(ctx.targets().size()) -
                            ctx.config().epsilon - 1e-9;
  const TraceEntry* chosen = nullptr;
  for (const auto& e : trace.entries) {
    if (!fits(e.size_bits) || e.report.overall_rate < floor_rate) continue;
    if (chosen == nullptr || e.size_bits < chosen->size_bits) chosen = &e;
  }
  trace.selected = chosen->plan;
  trace.selected_size_bits = chosen->size_bits;
  if (trace.selected.terms != refine.selected.terms) {
    trace.stopping_reason += "; selected a smaller or fitting plan from the trace";
  }
  return SearchResult{trace.selected, std::move(trace)};
}

// ---- rendering -------------------------------------------------------------

namespace {

ordered_json report_json(const EvalReport& r) {
  ordered_json j;
  ordered_json per = ordered_json::object();
  for (const auto& [cls, rate] : r.per_class_rate) per[std::to_string(cls)] = rate;
  j["per_class_rate"] = per;
  j["overall_rate"] = r.overall_rate;
  j["correct"] = r.correct;
  j["sample_count"] = r.sample_count;
  return j;
}

std::string pct(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

std::vector<int> classes_of(const SearchTrace& t) {
  std::vector<int> cls;
  for (const auto& [c, n] : t.reference.per_class_count) cls.push_back(c);
  return cls;
}

std::string render(const std::vector<std::string>& header,
                   const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    os << '|';
    for (std::size_t c = 0; c < cells.size(); ++c) {
      os << ' ' << std::setw(static_cast<int>(width[c])) << cells[c] << " |";
    }
    os << '\n';
  };
  auto rule = [&] {
    os << '+';
    for (auto w : width) os << std::string(w + 2, '-') << '+';
    os << '\n';
  };
  rule();
  line(header);
  rule();
  for (const auto& r : rows) line(r);
  rule();
  return os.str();
}

std::vector<std::string> rate_cells(const EvalReport& r, const std::vector<int>& classes) {
  std::vector<std::string> cells;
  for (int c : classes) {
    const auto it = r.per_class_rate.find(c);
    cells.push_back(it == r.per_class_rate.end() ? "-" : pct(it->second));
  }
  cells.push_back(pct(r.overall_rate));
  return cells;
}

}  // namespace

std::string SearchTrace::to_json() const {
  ordered_json j;
  j["metric"] = shiftadd::to_string(metric);
  j["reference"] = report_json(reference);
  j["n_star"] = n_star;
  ordered_json entries_json = ordered_json::array();
  for (const auto& e : entries) {
    ordered_json ej;
    ej["phase"] = e.phase;
    if (e.layer >= 0) ej["layer"] = e.layer;
    ej["terms"] = e.plan.terms;
    ej["size_bits"] = e.size_bits;
    ej["accepted"] = e.accepted;
    ej["report"] = report_json(e.report);
    entries_json.push_back(std::move(ej));
  }
  j["entries"] = std::move(entries_json);
  j["selected"] = detail::plan_to_json(selected);
  j["selected_size_bits"] = selected_size_bits;
  j["stopping_reason"] = stopping_reason;
  return j.dump(2);
}

std::string SearchTrace::sweep_table() const {
  const auto classes = classes_of(*this);
  std::vector<std::string> header{"Shift layers used"};
  for (int c : classes) header.push_back("Class " + std::to_string(c) + "/%");
  header.push_back(std::string(metric == Metric::kAccuracy ? "Recognition" : "Fidelity") + " rate/%");
  header.push_back("Size/bits");
  std::vector<std::vector<std::string>> rows;
  auto ref = rate_cells(reference, classes);
  ref.insert(ref.begin(), "Original network");
  ref.push_back("-");
  rows.push_back(ref);
  for (const auto& e : entries) {
    if (e.phase != "sweep") continue;
    auto cells = rate_cells(e.report, classes);
    cells.insert(cells.begin(), std::to_string(e.plan.terms.empty() ? 0 : e.plan.terms.front()) +
                                    (e.accepted ? " *" : ""));
    cells.push_back(std::to_string(e.size_bits));
    rows.push_back(cells);
  }
  return render(header, rows);
}

std::string SearchTrace::refine_table() const {
  const auto classes = classes_of(*this);
  std::vector<std::string> header{"Layer number"};
  for (int c : classes) header.push_back("Class " + std::to_string(c) + "/%");
  header.push_back(std::string(metric == Metric::kAccuracy ? "Recognition" : "Fidelity") + " rate/%");
  header.push_back("Size/bits");
  header.push_back("Accepted");
  std::vector<std::vector<std::string>> rows;
  auto ref = rate_cells(reference, classes);
  ref.insert(ref.begin(), "Original network");
  ref.push_back("-");
  ref.push_back("-");
  rows.push_back(ref);
  for (const auto& e : entries) {
    if (e.phase != "base" && e.phase != "refine" && e.phase != "fallback") continue;
    auto cells = rate_cells(e.report, classes);
    std::string label;
    if (e.phase == "base") {
      label = "Base (N=" + std::to_string(n_star) + ")";
    } else if (e.phase == "fallback") {
      label = "Fallback (N=1)";
    } else {
      label = std::to_string(e.layer + 1) + " -> " +
              std::to_string(e.plan.terms[static_cast<std::size_t>(e.layer)]);
    }
    cells.insert(cells.begin(), label);
    cells.push_back(std::to_string(e.size_bits));
    cells.push_back(e.phase == "base" ? "-" : (e.accepted ? "yes" : "no"));
    rows.push_back(cells);
  }
  return render(header, rows);
}

}  // namespace shiftadd
