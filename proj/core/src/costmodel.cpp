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

#include "shiftadd/costmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "shiftadd/emulator.hpp"
#include "shiftadd/errors.hpp"

namespace shiftadd {

using nlohmann::json;
using nlohmann::ordered_json;

std::int64_t mb_to_bits(double megabits) {
  return static_cast<std::int64_t>(std::llround(megabits * static_cast<double>(kBitsPerMb)));
}

double bits_to_mb(std::int64_t bits) {
  return static_cast<double>(bits) / static_cast<double>(kBitsPerMb);
}

std::string format_mb(std::int64_t bits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << bits_to_mb(bits) << " Mb";
  return os.str();
}

ChipBudget zcu15eg_budget() {
  return ChipBudget{"zcu15eg", mb_to_bits(26.2), mb_to_bits(11.3)};
}

std::vector<std::string> budget_presets() { return {"zcu15eg"}; }

ChipBudget budget_preset(const std::string& name) {
  if (name == "zcu15eg") return zcu15eg_budget();
  std::string known;
  for (const auto& p : budget_presets()) known += (known.empty() ? "" : ", ") + p;
  throw FormatError("costmodel", "unknown budget preset '" + name +
                                     "' (available: " + known + ")");
}

ChipBudget load_budget(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("costmodel", "cannot open budget " + path.string());
  try {
    const json j = json::parse(in);
    ChipBudget b;
    b.name = j.value("name", path.stem().string());
    b.bram_bits = j.contains("bram_bits") ? j.at("bram_bits").get<std::int64_t>()
                                          : mb_to_bits(j.at("bram_mb").get<double>());
    b.distributed_ram_bits =
        j.contains("distributed_ram_bits")
            ? j.at("distributed_ram_bits").get<std::int64_t>()
            : mb_to_bits(j.at("distributed_ram_mb").get<double>());
    if (b.bram_bits < 0 || b.distributed_ram_bits < 0) {
      throw FormatError("costmodel", "budget fields must be >= 0");
    }
    return b;
  } catch (const json::exception& e) {
    throw FormatError("costmodel", path.string() + ": " + e.what());
  }
}

ChipBudget resolve_budget(const std::string& preset_or_file,
                          const std::filesystem::path& config_dir) {
  const auto presets = budget_presets();
  if (std::find(presets.begin(), presets.end(), preset_or_file) != presets.end()) {
    return budget_preset(preset_or_file);
  }
  const std::filesystem::path direct(preset_or_file);
  if (std::filesystem::is_regular_file(direct)) return load_budget(direct);
  if (!config_dir.empty()) {
    for (const auto& candidate :
         {config_dir / preset_or_file, config_dir / (preset_or_file + ".json")}) {
      if (std::filesystem::is_regular_file(candidate)) return load_budget(candidate);
    }
  }
  return budget_preset(preset_or_file);  // throws with the preset list
}

std::int64_t model_size_bits(std::span<const LayerCount> layers, int record_bits) {
  std::int64_t bits = 0;
  for (const auto& l : layers) {
    bits += static_cast<std::int64_t>(l.params) * l.terms * record_bits;
  }
  return bits;
}

std::int64_t model_size_bits(const CompressedModel& cm, int record_bits) {
  std::vector<LayerCount> counts;
  for (const auto& c : cm.compressed) counts.push_back({c.weight_count, c.slots});
  return model_size_bits(counts, record_bits);
}

std::vector<LayerCount> layer_counts(const NetworkModel& model,
                                     const CompressionPlan& plan) {
  const auto parametric = model.parametric_layers();
  validate_plan(plan, parametric.size());
  std::vector<LayerCount> counts;
  for (std::size_t k = 0; k < parametric.size(); ++k) {
    counts.push_back({model.layers[parametric[k]].weight_count(), plan.terms[k]});
  }
  return counts;
}

double compression_rate(std::int64_t size_bits, std::size_t param_count,
                        int original_bits_per_param) {
  if (param_count == 0 || original_bits_per_param <= 0) {
    throw RangeError("costmodel", "compression rate needs a non-empty original model");
  }
  return static_cast<double>(size_bits) /
         (static_cast<double>(param_count) * original_bits_per_param) * 100.0;
}

FitVerdict fit_check(std::int64_t size_bits, const ChipBudget& budget) {
  FitVerdict v;
  v.fits = size_bits <= budget.total();
  v.bram_resident_bits = std::min(size_bits, budget.bram_bits);
  v.distributed_bits = std::max<std::int64_t>(0, size_bits - budget.bram_bits);
  v.overflow_bits = std::max<std::int64_t>(0, size_bits - budget.total());
  return v;
}

ResourceEstimate resource_estimate(const CompressedModel& cm) {
  ResourceEstimate r;
  for (const auto& layer : cm.compressed) {
    const auto& spec = cm.layers.at(layer.layer_index);
    const auto stages = decode_stages(layer);
    const std::size_t neurons = spec.bias_count();
    const std::size_t per_neuron = layer.weight_count / neurons;
    for (std::size_t n = 0; n < neurons; ++n) {
      std::int64_t live = 0;
      for (const auto& stage : stages) {
        for (std::size_t w = n * per_neuron; w < (n + 1) * per_neuron; ++w) {
          live += stage.records[w].is_nop() ? 0 : 1;
        }
      }
      r.shifter_count += live;
      r.adder_count += std::max<std::int64_t>(live - 1, 0) + 1;
    }
    r.mac_count_baseline += static_cast<std::int64_t>(layer.weight_count);
  }
  return r;
}

LatencyEstimate latency_estimate(const std::vector<LayerSpec>& layers,
                                 Shape3 frame_shape, double clock_hz) {
  if (!(clock_hz > 0.0)) {
    throw RangeError("costmodel", "clock frequency must be > 0");
  }
  const auto shapes = infer_shapes(layers, frame_shape);
  // Each row/column of a layer's input spans this many frame rows/samples.
  std::int64_t row_period = 1;
  std::int64_t col_period = 1;
  const std::int64_t frame_cols = frame_shape.cols;
  std::int64_t fill = 0;
  for (const auto& l : layers) {
    int win_h = 1, win_w = 1, pad_h = 0, pad_w = 0;
    switch (l.kind) {
      case LayerKind::kConv2D:
        win_h = l.kernel_h;
        win_w = l.kernel_w;
        pad_h = l.pad_h;
        pad_w = l.pad_w;
        break;
      case LayerKind::kMaxPool:
      case LayerKind::kAvgPool:
        win_h = l.window_h;
        win_w = l.window_w;
        break;
      default:
        break;
    }
    if (l.kind == LayerKind::kConv2D || l.kind == LayerKind::kMaxPool ||
        l.kind == LayerKind::kAvgPool) {
      fill += std::max(win_h - 1 - pad_h, 0) * row_period * frame_cols +
              std::max(win_w - 1 - pad_w, 0) * col_period;
      row_period *= l.stride_h;
      col_period *= l.stride_w;
    }
  }
  LatencyEstimate e;
  e.cycles = static_cast<std::int64_t>(frame_shape.size()) + fill;
  e.milliseconds = static_cast<double>(e.cycles) / clock_hz * 1e3;
  std::ostringstream os;
  os << "first-order estimate: one frame sample per clock at " << clock_hz / 1e6
     << " MHz; every layer fully pipelined; windowed layers add line-buffer fill ("
     << fill << " samples total); whole-layer result caching and memory stalls "
        "are not modeled";
  e.assumptions = os.str();
  return e;
}

namespace {

std::int64_t padding_bits(const CompressedModel& cm) {
  std::int64_t pad = 0;
  for (const auto& c : cm.compressed) {
    pad += static_cast<std::int64_t>(c.stream.bytes.size()) * 8 -
           static_cast<std::int64_t>(c.stream.bit_count);
  }
  return pad;
}

}  // namespace

CostReport cost_report(const CompressedModel& cm, const ChipBudget& budget,
                       const CostOptions& options) {
  CostReport r;
  r.source = "archive";
  r.param_count = cm.weight_count();
  r.model_size_bits = model_size_bits(cm);
  r.padding_bits = padding_bits(cm);
  if (options.include_overheads) {
    const int bias_bits =
        cm.plan.weight_format.total_bits() + cm.plan.activation_format.total_bits();
    for (const auto& c : cm.compressed) {
      r.overhead_bits += static_cast<std::int64_t>(c.bias.size()) * bias_bits + 64;
    }
  }
  r.original_size_bits = static_cast<std::int64_t>(r.param_count) * 32;
  const std::int64_t stored = r.model_size_bits + r.overhead_bits;
  r.compression_rate_percent =
      r.param_count > 0 ? compression_rate(stored, r.param_count) : 0.0;
  r.budget = budget;
  r.fit = fit_check(stored, budget);
  r.resources = resource_estimate(cm);
  r.latency = latency_estimate(cm.layers, cm.input_shape, options.clock_hz);
  return r;
}

std::vector<LayerCount> ParamConfig::counts() const {
  std::vector<LayerCount> out;
  std::size_t listed = 0;
  for (const auto& l : layers) {
    out.push_back({l.params, l.terms});
    listed += l.params;
  }
  if (listed > total_params) {
    throw RangeError("costmodel", "listed layers hold " + std::to_string(listed) +
                                      " params, more than total " +
                                      std::to_string(total_params));
  }
  if (total_params > listed) out.push_back({total_params - listed, default_terms});
  return out;
}

ParamConfig ParamConfig::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    ParamConfig c;
    c.total_params = j.at("total_params").get<std::size_t>();
    c.default_terms = j.value("default_terms", 2);
    c.record_bits = j.value("record_bits", kRecordBits);
    c.original_bits_per_param = j.value("original_bits_per_param", 32);
    for (const auto& l : j.value("layers", json::array())) {
      c.layers.push_back({l.value("name", std::string{}), l.at("params").get<std::size_t>(),
                          l.at("terms").get<int>()});
    }
    if (c.default_terms < 1 || c.record_bits < 1) {
      throw FormatError("costmodel", "terms and record bits must be >= 1");
    }
    for (const auto& l : c.layers) {
      if (l.terms < 1) throw FormatError("costmodel", "layer terms must be >= 1");
    }
    return c;
  } catch (const json::exception& e) {
    throw FormatError("costmodel", std::string("param config: ") + e.what());
  }
}

ParamConfig ParamConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("costmodel", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

CostReport param_config_report(const ParamConfig& config, const ChipBudget& budget) {
  CostReport r;
  r.source = "param-config";
  r.param_count = config.total_params;
  const auto counts = config.counts();
  r.model_size_bits = model_size_bits(counts, config.record_bits);
  r.original_size_bits =
      static_cast<std::int64_t>(config.total_params) * config.original_bits_per_param;
  r.compression_rate_percent = compression_rate(r.model_size_bits, config.total_params,
                                                config.original_bits_per_param);
  r.budget = budget;
  r.fit = fit_check(r.model_size_bits, budget);
  return r;
}

std::string CostReport::to_json() const {
  ordered_json j;
  j["source"] = source;
  j["param_count"] = param_count;
  j["model_size_bits"] = model_size_bits;
  j["model_size_mb"] = bits_to_mb(model_size_bits);
  j["padding_bits"] = padding_bits;
  j["overhead_bits"] = overhead_bits;
  j["original_size_bits"] = original_size_bits;
  j["original_size_MB"] = static_cast<double>(original_size_bits) / 8.0 /
                          static_cast<double>(kBitsPerMb);
  j["compression_rate_percent"] = compression_rate_percent;
  ordered_json b;
  b["name"] = budget.name;
  b["bram_bits"] = budget.bram_bits;
  b["distributed_ram_bits"] = budget.distributed_ram_bits;
  b["total_bits"] = budget.total();
  j["budget"] = b;
  ordered_json f;
  f["fits"] = fit.fits;
  f["bram_resident_bits"] = fit.bram_resident_bits;
  f["distributed_bits"] = fit.distributed_bits;
  f["overflow_bits"] = fit.overflow_bits;
  j["fit"] = f;
  if (resources) {
    ordered_json res;
    res["shifter_count"] = resources->shifter_count;
    res["adder_count"] = resources->adder_count;
    res["mac_count_baseline"] = resources->mac_count_baseline;
    j["resources"] = res;
  }
  if (latency) {
    ordered_json lat;
    lat["cycles"] = latency->cycles;
    lat["milliseconds"] = latency->milliseconds;
    lat["assumptions"] = latency->assumptions;
    j["latency"] = lat;
  }
  return j.dump(2);
}

std::string CostReport::to_table() const {
  std::ostringstream os;
  auto row = [&](const std::string& key, const std::string& value) {
    os << std::left << std::setw(28) << key << value << '\n';
  };
  auto bits = [](std::int64_t b) {
    std::string s = std::to_string(b);
    for (int i = static_cast<int>(s.size()) - 3; i > (s[0] == '-' ? 1 : 0); i -= 3) {
      s.insert(static_cast<std::size_t>(i), ",");
    }
    return s + " bits";
  };
  std::ostringstream rate;
  rate << std::fixed << std::setprecision(2) << compression_rate_percent << " %";
  row("source", source);
  row("parameters", std::to_string(param_count));
  row("compressed size", bits(model_size_bits) + " (" + format_mb(model_size_bits) + ")");
  if (padding_bits > 0) row("stream byte padding", bits(padding_bits));
  if (overhead_bits > 0) row("bias/header overhead", bits(overhead_bits));
  std::ostringstream orig;
  orig << std::fixed << std::setprecision(2)
       << static_cast<double>(original_size_bits) / 8.0 / static_cast<double>(kBitsPerMb)
       << " MB";
  row("original size", bits(original_size_bits) + " (" + orig.str() + ")");
  row("compression rate", rate.str());
  row("budget", budget.name + " " + format_mb(budget.total()) + " (BRAM " +
                    format_mb(budget.bram_bits) + " + distributed " +
                    format_mb(budget.distributed_ram_bits) + ")");
  std::string verdict = fit.fits ? "fits" : "does not fit";
  if (fit.fits && fit.distributed_bits > 0) verdict += " (spills past BRAM into distributed RAM)";
  row("verdict", verdict);
  row("  BRAM resident", bits(fit.bram_resident_bits));
  row("  distributed RAM", bits(fit.distributed_bits));
  if (fit.overflow_bits > 0) row("  over budget by", bits(fit.overflow_bits));
  if (resources) {
    row("shifters", std::to_string(resources->shifter_count));
    row("adders", std::to_string(resources->adder_count));
    row("MAC baseline", std::to_string(resources->mac_count_baseline));
  }
  if (latency) {
    std::ostringstream ms;
    ms << std::fixed << std::setprecision(3) << latency->milliseconds << " ms";
    row("latency estimate", std::to_string(latency->cycles) + " cycles, " + ms.str());
    row("  assumptions", latency->assumptions);
  }
  return os.str();
}

}  // namespace shiftadd
