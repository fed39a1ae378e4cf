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

// Storage-size and compression-rate arithmetic, on-chip fit check, and
// first-order resource and latency estimates.
//
// Units: "Mb" is 2^20 bits and "MB" is 2^20 bytes.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shiftadd/netgraph.hpp"

namespace shiftadd {

inline constexpr std::int64_t kBitsPerMb = std::int64_t{1} << 20;
inline constexpr int kRecordBits = 6;

// Converts megabits (2^20 bits) to bits, rounding to the nearest bit.
std::int64_t mb_to_bits(double megabits);
double bits_to_mb(std::int64_t bits);
// "31.57 Mb"
std::string format_mb(std::int64_t bits);

struct ChipBudget {
  std::string name;
  std::int64_t bram_bits = 0;
  std::int64_t distributed_ram_bits = 0;

  std::int64_t total() const noexcept { return bram_bits + distributed_ram_bits; }
};

// Built-in "zcu15eg": 26.2 Mb BRAM + 11.3 Mb distributed RAM. The vendor's
// stated "maximum on-chip storage" is quoted elsewhere as 37.3 Mb and 37.6 Mb;
// neither equals the component sum (37.5 Mb), which is what is used here.
ChipBudget zcu15eg_budget();
std::vector<std::string> budget_presets();
// Throws FormatError listing the available presets for unknown names.
ChipBudget budget_preset(const std::string& name);
// JSON: {"name": s, "bram_mb": x, "distributed_ram_mb": y} or the same with
// "bram_bits" / "distributed_ram_bits".
ChipBudget load_budget(const std::filesystem::path& path);
// A preset name, or a path to a budget file. Relative file names are also
// looked up in `config_dir` when given.
ChipBudget resolve_budget(const std::string& preset_or_file,
                          const std::filesystem::path& config_dir = {});

struct LayerCount {
  std::size_t params = 0;
  int terms = 1;
};

// sum(params_l * terms_l * record_bits); byte padding is not included.
std::int64_t model_size_bits(std::span<const LayerCount> layers,
                             int record_bits = kRecordBits);
std::int64_t model_size_bits(const CompressedModel& cm,
                             int record_bits = kRecordBits);
// Per-layer weight counts of a model under a plan.
std::vector<LayerCount> layer_counts(const NetworkModel& model,
                                     const CompressionPlan& plan);

// size / (param_count * original_bits_per_param) * 100. Throws RangeError
// when param_count is zero.
double compression_rate(std::int64_t size_bits, std::size_t param_count,
                        int original_bits_per_param = 32);

struct FitVerdict {
  bool fits = false;
  std::int64_t bram_resident_bits = 0;  // min(size, bram)
  std::int64_t distributed_bits = 0;    // spill past BRAM
  std::int64_t overflow_bits = 0;       // spill past the whole budget
};

FitVerdict fit_check(std::int64_t size_bits, const ChipBudget& budget);

// Fully parallel unit counts. A neuron (conv output channel or dense output)
// with k live records needs k shifters and max(k - 1, 0) + 1 adders, the last
// one adding the bias; the MAC baseline assigns one MAC per weight.
struct ResourceEstimate {
  std::int64_t shifter_count = 0;
  std::int64_t adder_count = 0;
  std::int64_t mac_count_baseline = 0;
};

ResourceEstimate resource_estimate(const CompressedModel& cm);

struct LatencyEstimate {
  std::int64_t cycles = 0;
  double milliseconds = 0.0;
  std::string assumptions;
};

// Streaming model: one frame sample per clock, every layer pipelined, and
// each windowed layer adding the line-buffer fill it needs before its first
// output (in frame samples). Throws RangeError unless clock_hz > 0.
LatencyEstimate latency_estimate(const std::vector<LayerSpec>& layers,
                                 Shape3 frame_shape, double clock_hz);

struct CostOptions {
  bool include_overheads = false;
  double clock_hz = 250e6;
};

struct CostReport {
  std::string source;
  std::size_t param_count = 0;
  std::int64_t model_size_bits = 0;
  std::int64_t padding_bits = 0;
  std::int64_t overhead_bits = 0;
  std::int64_t original_size_bits = 0;
  double compression_rate_percent = 0.0;
  ChipBudget budget;
  FitVerdict fit;
  std::optional<ResourceEstimate> resources;
  std::optional<LatencyEstimate> latency;

  std::string to_json() const;
  std::string to_table() const;
};

// Report for a compressed archive. Sizes count weight records only unless
// `include_overheads` adds biases (W_w + W_a bits each) and a 64-bit header
// per layer.
CostReport cost_report(const CompressedModel& cm, const ChipBudget& budget,
                       const CostOptions& options = {});

// Parameter counts without weights: layers listed explicitly plus a
// remainder of `total_params` at `default_terms`.
struct ParamConfig {
  std::size_t total_params = 0;
  int default_terms = 2;
  int record_bits = kRecordBits;
  int original_bits_per_param = 32;
  struct Layer {
    std::string name;
    std::size_t params = 0;
    int terms = 1;
  };
  std::vector<Layer> layers;

  std::vector<LayerCount> counts() const;
  static ParamConfig from_json(const std::string& text);
  static ParamConfig load(const std::filesystem::path& path);
};

CostReport param_config_report(const ParamConfig& config, const ChipBudget& budget);

}  // namespace shiftadd
