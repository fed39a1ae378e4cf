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

#pragma once

// Two-phase search over per-layer shift-term budgets: a uniform sweep over
// N = 1..N_max, then greedy per-layer reduction to a single shift layer.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shiftadd/costmodel.hpp"
#include "shiftadd/netgraph.hpp"
#include "shiftadd/tensor_io.hpp"

namespace shiftadd {

enum class Metric { kAccuracy, kFidelity };
const char* to_string(Metric m);
Metric metric_from_string(const std::string& name);

enum class TrialOrder { kAscending, kDescending };

struct EvalReport {
  std::map<int, double> per_class_rate;       // percent
  std::map<int, std::size_t> per_class_count;  // frames per target class
  double overall_rate = 0.0;                  // percent
  std::size_t correct = 0;
  std::size_t sample_count = 0;
  CompressionPlan plan;
};

// Tallies predictions against targets. Throws DatasetError when empty or
// when the two spans differ in length.
EvalReport tally(std::span<const int> predicted, std::span<const int> target);

// Labels predicted by the float model.
std::vector<int> reference_labels(const NetworkModel& model, const Dataset& data,
                                  int jobs = 1);
// Labels predicted by the shift-add pipeline.
std::vector<int> predict(const CompressedModel& cm, const Dataset& data, int jobs = 1);

// Scores `cm` against ground-truth labels (accuracy) or against
// `reference` labels (fidelity).
EvalReport evaluate(const CompressedModel& cm, const Dataset& data, Metric metric,
                    std::span<const int> reference = {}, int jobs = 1);

struct SearchConfig {
  int n_max = 8;
  double epsilon = 0.0;  // percentage points
  Metric metric = Metric::kFidelity;
  TrialOrder trial_order = TrialOrder::kAscending;
  std::optional<std::int64_t> target_size_bits;
  // Try every smaller budget per layer instead of only N_l = 1.
  bool explore_all_budgets = false;
  FixedPointFormat weight_format{16, 12};
  FixedPointFormat activation_format{16, 10};
  int jobs = 1;

  std::string to_json() const;
  static SearchConfig from_json(const std::string& text);
  static SearchConfig load(const std::filesystem::path& path);
};

struct TraceEntry {
  std::string phase;  // "sweep", "refine" or "fallback"
  int layer = -1;     // parametric layer tried (refine only)
  CompressionPlan plan;
  EvalReport report;
  std::int64_t size_bits = 0;
  bool accepted = false;
};

struct SearchTrace {
  Metric metric = Metric::kFidelity;
  EvalReport reference;  // float model against the same targets
  std::vector<TraceEntry> entries;
  CompressionPlan selected;
  std::int64_t selected_size_bits = 0;
  int n_star = 0;
  std::string stopping_reason;

  std::string to_json() const;
  // Uniform-sweep table: one row per N plus the float reference.
  std::string sweep_table() const;
  // Refinement table: one row per layer trial.
  std::string refine_table() const;
};

// Context shared by the search phases: the batch-norm-folded float model,
// the evaluation frames and the reference labels for the chosen metric.
class SearchContext {
 public:
  SearchContext(const NetworkModel& model, const Dataset& data, SearchConfig config);

  const NetworkModel& model() const noexcept { return model_; }
  const Dataset& data() const noexcept { return data_; }
  const SearchConfig& config() const noexcept { return config_; }
  std::span<const int> targets() const noexcept { return targets_; }
  const EvalReport& reference_report() const noexcept { return reference_; }

  TraceEntry evaluate_plan(const CompressionPlan& plan, std::string phase,
                           int layer = -1) const;
  CompressionPlan uniform_plan(int n) const;

 private:
  NetworkModel model_;
  Dataset data_;
  SearchConfig config_;
  std::vector<int> float_labels_;
  std::vector<int> targets_;
  EvalReport reference_;
};

SearchTrace uniform_sweep(const SearchContext& ctx);
SearchTrace refine_per_layer(const SearchContext& ctx, int base_n);

struct SearchResult {
  CompressionPlan plan;
  SearchTrace trace;
};

// Sweep, then refine from the sweep's N*. With a budget the selected plan
// fits it; throws NoFitError (carrying the smallest achievable size) when
// even one term per weight does not fit.
SearchResult search(const SearchContext& ctx,
                    const std::optional<ChipBudget>& budget = std::nullopt);

}  // namespace shiftadd
