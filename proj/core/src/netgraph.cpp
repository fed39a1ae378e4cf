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

#include "shiftadd/netgraph.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>
#include <tuple>

#include "json_codec.hpp"
#include "shiftadd/errors.hpp"
#include "shiftadd/parallel.hpp"

namespace shiftadd {

using nlohmann::json;
using nlohmann::ordered_json;

std::string Shape3::to_string() const {
  std::ostringstream os;
  os << rows << 'x' << cols << 'x' << channels;
  return os.str();
}

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv2D: return "conv2d";
    case LayerKind::kDense: return "dense";
    case LayerKind::kReLU: return "relu";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kAvgPool: return "avgpool";
    case LayerKind::kBatchNorm: return "batchnorm";
    case LayerKind::kGlobalAvgPool: return "global_avg_pool";
    case LayerKind::kSoftmax: return "softmax";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(const std::string& name) {
  for (LayerKind k : {LayerKind::kConv2D, LayerKind::kDense, LayerKind::kReLU,
                      LayerKind::kMaxPool, LayerKind::kAvgPool,
                      LayerKind::kBatchNorm, LayerKind::kGlobalAvgPool,
                      LayerKind::kSoftmax}) {
    if (name == to_string(k)) return k;
  }
  throw FormatError("netgraph", "unknown layer kind '" + name + "'");
}

std::size_t LayerSpec::weight_count() const noexcept {
  switch (kind) {
    case LayerKind::kConv2D:
      return static_cast<std::size_t>(out_channels) * in_channels * kernel_h *
             kernel_w;
    case LayerKind::kDense:
      return static_cast<std::size_t>(out_features) * in_features;
    default:
      return 0;
  }
}

std::size_t LayerSpec::bias_count() const noexcept {
  switch (kind) {
    case LayerKind::kConv2D: return static_cast<std::size_t>(out_channels);
    case LayerKind::kDense: return static_cast<std::size_t>(out_features);
    default: return 0;
  }
}

std::size_t LayerSpec::blob_count() const noexcept {
  if (kind == LayerKind::kBatchNorm) return 4 * static_cast<std::size_t>(channels);
  return weight_count() + bias_count();
}

std::size_t LayerSpec::fan_in() const noexcept {
  switch (kind) {
    case LayerKind::kConv2D:
      return static_cast<std::size_t>(in_channels) * kernel_h * kernel_w;
    case LayerKind::kDense: return static_cast<std::size_t>(in_features);
    default: return 0;
  }
}

LayerSpec conv2d(int in_channels, int out_channels, int kernel_h, int kernel_w,
                 int pad_h, int pad_w, int stride_h, int stride_w) {
  LayerSpec l;
  l.kind = LayerKind::kConv2D;
  l.in_channels = in_channels;
  l.out_channels = out_channels;
  l.kernel_h = kernel_h;
  l.kernel_w = kernel_w;
  l.pad_h = pad_h;
  l.pad_w = pad_w;
  l.stride_h = stride_h;
  l.stride_w = stride_w;
  return l;
}

LayerSpec dense(int in_features, int out_features) {
  LayerSpec l;
  l.kind = LayerKind::kDense;
  l.in_features = in_features;
  l.out_features = out_features;
  return l;
}

LayerSpec relu() {
  LayerSpec l;
  l.kind = LayerKind::kReLU;
  return l;
}

namespace {

LayerSpec pool(LayerKind kind, int window_h, int window_w, int stride_h,
               int stride_w) {
  LayerSpec l;
  l.kind = kind;
  l.window_h = window_h;
  l.window_w = window_w;
  l.stride_h = stride_h;
  l.stride_w = stride_w;
  return l;
}

std::string layer_tag(std::size_t index, const LayerSpec& layer) {
  std::string tag = "layer " + std::to_string(index) + " (" +
                    to_string(layer.kind);
  if (!layer.name.empty()) tag += " '" + layer.name + "'";
  return tag + ")";
}

}  // namespace

LayerSpec max_pool(int window_h, int window_w, int stride_h, int stride_w) {
  return pool(LayerKind::kMaxPool, window_h, window_w, stride_h, stride_w);
}

LayerSpec avg_pool(int window_h, int window_w, int stride_h, int stride_w) {
  return pool(LayerKind::kAvgPool, window_h, window_w, stride_h, stride_w);
}

LayerSpec batch_norm(int channels, double epsilon) {
  LayerSpec l;
  l.kind = LayerKind::kBatchNorm;
  l.channels = channels;
  l.epsilon = epsilon;
  return l;
}

LayerSpec global_avg_pool() {
  LayerSpec l;
  l.kind = LayerKind::kGlobalAvgPool;
  return l;
}

LayerSpec softmax() {
  LayerSpec l;
  l.kind = LayerKind::kSoftmax;
  return l;
}

Shape3 output_shape(const LayerSpec& layer, Shape3 in, std::size_t index) {
  auto fail = [&](const std::string& why) -> ShapeError {
    return ShapeError("netgraph", layer_tag(index, layer) + ": " + why +
                                      " (input " + in.to_string() + ")");
  };
  if (in.rows < 1 || in.cols < 1 || in.channels < 1) throw fail("empty input");
  switch (layer.kind) {
    case LayerKind::kConv2D: {
      if (layer.in_channels < 1 || layer.out_channels < 1 ||
          layer.kernel_h < 1 || layer.kernel_w < 1 || layer.stride_h < 1 ||
          layer.stride_w < 1 || layer.pad_h < 0 || layer.pad_w < 0) {
        throw fail("dimensions must be >= 1 and padding >= 0");
      }
      if (in.channels != layer.in_channels) {
        throw fail("expects " + std::to_string(layer.in_channels) +
                   " input channels");
      }
      const int span_h = in.rows + 2 * layer.pad_h;
      const int span_w = in.cols + 2 * layer.pad_w;
      if (span_h < layer.kernel_h || span_w < layer.kernel_w) {
        throw fail("kernel larger than padded input");
      }
      return Shape3{(span_h - layer.kernel_h) / layer.stride_h + 1,
                    (span_w - layer.kernel_w) / layer.stride_w + 1,
                    layer.out_channels};
    }
    case LayerKind::kDense:
      if (layer.in_features < 1 || layer.out_features < 1) {
        throw fail("features must be >= 1");
      }
      if (in.size() != static_cast<std::size_t>(layer.in_features)) {
        throw fail("expects " + std::to_string(layer.in_features) +
                   " input features");
      }
      return Shape3{1, 1, layer.out_features};
    case LayerKind::kMaxPool:
    case LayerKind::kAvgPool:
      if (layer.window_h < 1 || layer.window_w < 1 || layer.stride_h < 1 ||
          layer.stride_w < 1) {
        throw fail("window and stride must be >= 1");
      }
      if (in.rows < layer.window_h || in.cols < layer.window_w) {
        throw fail("window larger than input");
      }
      return Shape3{(in.rows - layer.window_h) / layer.stride_h + 1,
                    (in.cols - layer.window_w) / layer.stride_w + 1,
                    in.channels};
    case LayerKind::kBatchNorm:
      if (layer.channels != in.channels) {
        throw fail("expects " + std::to_string(layer.channels) + " channels");
      }
      if (!(layer.epsilon >= 0.0)) throw fail("epsilon must be >= 0");
      return in;
    case LayerKind::kGlobalAvgPool:
      return Shape3{1, 1, in.channels};
    case LayerKind::kReLU:
    case LayerKind::kSoftmax:
      return in;
  }
  throw fail("unsupported layer kind");
}

std::vector<Shape3> infer_shapes(const std::vector<LayerSpec>& layers,
                                 Shape3 input) {
  std::vector<Shape3> shapes;
  shapes.reserve(layers.size() + 1);
  shapes.push_back(input);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    shapes.push_back(output_shape(layers[i], shapes.back(), i));
  }
  return shapes;
}

std::vector<std::size_t> NetworkModel::parametric_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].is_parametric()) out.push_back(i);
  }
  return out;
}

std::size_t NetworkModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.blob_count();
  return n;
}

std::size_t NetworkModel::weight_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight_count();
  return n;
}

void NetworkModel::validate() const {
  if (params.size() != layers.size()) {
    throw FormatError("netgraph", "parameter list has " +
                                      std::to_string(params.size()) +
                                      " entries for " +
                                      std::to_string(layers.size()) + " layers");
  }
  infer_shapes(layers, input_shape);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const auto& p = params[i];
    auto expect = [&](const std::vector<double>& v, std::size_t n,
                      const char* what) {
      if (v.size() != n) {
        throw ShapeError("netgraph", layer_tag(i, l) + ": " + what + " has " +
                                         std::to_string(v.size()) +
                                         " values, expected " +
                                         std::to_string(n));
      }
    };
    const std::size_t c = l.kind == LayerKind::kBatchNorm
                              ? static_cast<std::size_t>(l.channels)
                              : 0;
    expect(p.weights, l.weight_count(), "weights");
    expect(p.bias, l.bias_count(), "bias");
    expect(p.gamma, c, "gamma");
    expect(p.beta, c, "beta");
    expect(p.mean, c, "mean");
    expect(p.variance, c, "variance");
    for (double v : p.variance) {
      if (v + l.epsilon <= 0.0) {
        throw FormatError("netgraph", layer_tag(i, l) +
                                          ": variance + epsilon must be > 0");
      }
    }
  }
}

namespace detail {

namespace {

std::pair<int, int> pair_field(const json& j, const char* key, int fallback) {
  if (!j.contains(key)) return {fallback, fallback};
  const auto& v = j.at(key);
  if (v.is_array()) {
    if (v.size() != 2) {
      throw FormatError("netgraph", std::string("'") + key +
                                        "' must be an integer or [h, w]");
    }
    return {v.at(0).get<int>(), v.at(1).get<int>()};
  }
  const int x = v.get<int>();
  return {x, x};
}

}  // namespace

ordered_json layer_to_json(const LayerSpec& l) {
  ordered_json j;
  j["kind"] = to_string(l.kind);
  if (!l.name.empty()) j["name"] = l.name;
  switch (l.kind) {
    case LayerKind::kConv2D:
      j["in_channels"] = l.in_channels;
      j["out_channels"] = l.out_channels;
      j["kernel"] = {l.kernel_h, l.kernel_w};
      j["stride"] = {l.stride_h, l.stride_w};
      j["padding"] = {l.pad_h, l.pad_w};
      break;
    case LayerKind::kDense:
      j["in_features"] = l.in_features;
      j["out_features"] = l.out_features;
      break;
    case LayerKind::kMaxPool:
    case LayerKind::kAvgPool:
      j["window"] = {l.window_h, l.window_w};
      j["stride"] = {l.stride_h, l.stride_w};
      break;
    case LayerKind::kBatchNorm:
      j["channels"] = l.channels;
      j["epsilon"] = l.epsilon;
      break;
    default:
      break;
  }
  return j;
}

LayerSpec layer_from_json(const json& j, std::size_t index) {
  try {
    LayerSpec l;
    l.kind = layer_kind_from_string(j.at("kind").get<std::string>());
    l.name = j.value("name", std::string{});
    switch (l.kind) {
      case LayerKind::kConv2D: {
        l.in_channels = j.at("in_channels").get<int>();
        l.out_channels = j.at("out_channels").get<int>();
        std::tie(l.kernel_h, l.kernel_w) = pair_field(j, "kernel", 1);
        std::tie(l.stride_h, l.stride_w) = pair_field(j, "stride", 1);
        std::tie(l.pad_h, l.pad_w) = pair_field(j, "padding", 0);
        break;
      }
      case LayerKind::kDense:
        l.in_features = j.at("in_features").get<int>();
        l.out_features = j.at("out_features").get<int>();
        break;
      case LayerKind::kMaxPool:
      case LayerKind::kAvgPool: {
        std::tie(l.window_h, l.window_w) = pair_field(j, "window", 2);
        const auto stride = j.contains("stride")
                                ? pair_field(j, "stride", 1)
                                : std::pair{l.window_h, l.window_w};
        std::tie(l.stride_h, l.stride_w) = stride;
        break;
      }
      case LayerKind::kBatchNorm:
        l.channels = j.at("channels").get<int>();
        l.epsilon = j.value("epsilon", 1e-5);
        break;
      default:
        break;
    }
    return l;
  } catch (const FormatError& e) {
    throw FormatError("netgraph", "layer " + std::to_string(index) + ": " +
                                      e.what());
  } catch (const json::exception& e) {
    throw FormatError("netgraph", "layer " + std::to_string(index) + ": " +
                                      e.what());
  }
}

ordered_json shape_to_json(const Shape3& s) {
  return ordered_json::array({s.rows, s.cols, s.channels});
}

Shape3 shape_from_json(const json& j) {
  if (!j.is_array() || j.size() < 2 || j.size() > 3) {
    throw FormatError("netgraph", "shape must be [rows, cols] or [rows, cols, channels]");
  }
  Shape3 s{j.at(0).get<int>(), j.at(1).get<int>(),
           j.size() == 3 ? j.at(2).get<int>() : 1};
  return s;
}

ordered_json format_to_json(const FixedPointFormat& fmt) {
  ordered_json j;
  j["w"] = fmt.total_bits();
  j["f"] = fmt.frac_bits();
  return j;
}

FixedPointFormat format_from_json(const json& j) {
  if (j.is_string()) return FixedPointFormat::parse(j.get<std::string>());
  return FixedPointFormat(j.at("w").get<int>(), j.at("f").get<int>());
}

ordered_json plan_to_json(const CompressionPlan& plan) {
  ordered_json j;
  j["weight_format"] = format_to_json(plan.weight_format);
  j["activation_format"] = format_to_json(plan.activation_format);
  j["terms"] = plan.terms;
  return j;
}

CompressionPlan plan_from_json(const json& j) {
  try {
    CompressionPlan plan;
    if (j.contains("weight_format")) {
      plan.weight_format = format_from_json(j.at("weight_format"));
    }
    if (j.contains("activation_format")) {
      plan.activation_format = format_from_json(j.at("activation_format"));
    }
    plan.terms = j.at("terms").get<std::vector<int>>();
    return plan;
  } catch (const json::exception& e) {
    throw FormatError("netgraph", std::string("plan: ") + e.what());
  }
}

}  // namespace detail

namespace {

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("netgraph", "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("netgraph", path.string() + ": " + e.what());
  }
}

std::vector<float> read_blob(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("netgraph", "cannot open blob " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() % 4 != 0) {
    throw FormatError("netgraph", "blob " + path.string() +
                                      " size is not a multiple of 4 bytes");
  }
  std::vector<float> values(bytes.size() / 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[4 * i]) |
                               static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8 |
                               static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16 |
                               static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24;
    values[i] = std::bit_cast<float>(bits);
  }
  return values;
}

}  // namespace

NetworkModel load_model(const std::filesystem::path& manifest_path,
                        const std::filesystem::path& blob_path) {
  const json manifest = read_json_file(manifest_path);
  NetworkModel model;
  std::filesystem::path blob = blob_path;
  std::vector<json> layer_entries;
  try {
    model.input_shape = detail::shape_from_json(manifest.at("input_shape"));
    if (blob.empty()) {
      blob = manifest_path.parent_path() / manifest.at("blob").get<std::string>();
    }
    layer_entries = manifest.at("layers").get<std::vector<json>>();
  } catch (const json::exception& e) {
    throw FormatError("netgraph", manifest_path.string() + ": " + e.what());
  }
  for (std::size_t i = 0; i < layer_entries.size(); ++i) {
    model.layers.push_back(detail::layer_from_json(layer_entries[i], i));
  }
  infer_shapes(model.layers, model.input_shape);

  const std::vector<float> values = read_blob(blob);
  std::size_t offset = 0;
  auto take = [&](std::size_t n, std::size_t layer) {
    if (offset + n > values.size()) {
      throw FormatError("netgraph",
                        "truncated blob: " + layer_tag(layer, model.layers[layer]) +
                            " needs values [" + std::to_string(offset) + ", " +
                            std::to_string(offset + n) + ") but blob holds " +
                            std::to_string(values.size()));
    }
    std::vector<double> out(values.begin() + static_cast<std::ptrdiff_t>(offset),
                            values.begin() + static_cast<std::ptrdiff_t>(offset + n));
    offset += n;
    return out;
  };
  model.params.resize(model.layers.size());
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& l = model.layers[i];
    if (layer_entries[i].contains("offset") &&
        layer_entries[i].at("offset").get<std::size_t>() != offset) {
      throw FormatError("netgraph", layer_tag(i, l) + ": manifest offset " +
                                        layer_entries[i].at("offset").dump() +
                                        " disagrees with running offset " +
                                        std::to_string(offset));
    }
    auto& p = model.params[i];
    if (l.kind == LayerKind::kBatchNorm) {
      const auto c = static_cast<std::size_t>(l.channels);
      p.gamma = take(c, i);
      p.beta = take(c, i);
      p.mean = take(c, i);
      p.variance = take(c, i);
    } else if (l.is_parametric()) {
      p.weights = take(l.weight_count(), i);
      p.bias = take(l.bias_count(), i);
    }
  }
  if (offset != values.size()) {
    throw FormatError("netgraph", "blob has " +
                                      std::to_string(values.size() - offset) +
                                      " trailing values");
  }
  if (manifest.contains("total_params") &&
      manifest.at("total_params").get<std::size_t>() != model.parameter_count()) {
    throw FormatError("netgraph", "manifest declares " +
                                      manifest.at("total_params").dump() +
                                      " parameters, layers hold " +
                                      std::to_string(model.parameter_count()));
  }
  model.validate();
  return model;
}

void save_model(const NetworkModel& model,
                const std::filesystem::path& manifest_path,
                const std::filesystem::path& blob_path) {
  model.validate();
  ordered_json manifest;
  manifest["format"] = "shiftadd-model";
  manifest["version"] = 1;
  manifest["input_shape"] = detail::shape_to_json(model.input_shape);
  manifest["blob"] = blob_path.filename().string();
  manifest["total_params"] = model.parameter_count();
  ordered_json layers = ordered_json::array();
  std::vector<float> values;
  values.reserve(model.parameter_count());
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    ordered_json lj = detail::layer_to_json(model.layers[i]);
    if (model.layers[i].blob_count() > 0) lj["offset"] = values.size();
    layers.push_back(std::move(lj));
    const auto& p = model.params[i];
    for (const auto* v : {&p.weights, &p.bias, &p.gamma, &p.beta, &p.mean,
                          &p.variance}) {
      for (double x : *v) values.push_back(static_cast<float>(x));
    }
  }
  manifest["layers"] = std::move(layers);

  std::ofstream mout(manifest_path);
  if (!mout) throw IoError("netgraph", "cannot write " + manifest_path.string());
  mout << manifest.dump(2) << '\n';

  std::ofstream bout(blob_path, std::ios::binary);
  if (!bout) throw IoError("netgraph", "cannot write " + blob_path.string());
  for (float f : values) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    const char le[4] = {static_cast<char>(bits & 0xFF),
                        static_cast<char>((bits >> 8) & 0xFF),
                        static_cast<char>((bits >> 16) & 0xFF),
                        static_cast<char>((bits >> 24) & 0xFF)};
    bout.write(le, 4);
  }
  if (!bout) throw IoError("netgraph", "short write to " + blob_path.string());
}

NetworkModel fold_batchnorm(const NetworkModel& model) {
  model.validate();
  NetworkModel out;
  out.input_shape = model.input_shape;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& l = model.layers[i];
    if (l.kind != LayerKind::kBatchNorm) {
      out.layers.push_back(l);
      out.params.push_back(model.params[i]);
      continue;
    }
    if (out.layers.empty() || !out.layers.back().is_parametric() ||
        !model.layers[i - 1].is_parametric()) {
      throw FormatError("netgraph", layer_tag(i, l) +
                                        ": batch norm must directly follow "
                                        "conv2d or dense");
    }
    const auto& bn = model.params[i];
    auto& prev = out.layers.back();
    auto& p = out.params.back();
    const std::size_t outs = prev.bias_count();
    const std::size_t per_out = prev.weight_count() / outs;
    for (std::size_t o = 0; o < outs; ++o) {
      const double scale = bn.gamma[o] / std::sqrt(bn.variance[o] + l.epsilon);
      for (std::size_t k = 0; k < per_out; ++k) p.weights[o * per_out + k] *= scale;
      p.bias[o] = (p.bias[o] - bn.mean[o]) * scale + bn.beta[o];
    }
  }
  out.validate();
  return out;
}

CompressionPlan CompressionPlan::uniform(std::size_t parametric_layers, int n,
                                         FixedPointFormat weight_format,
                                         FixedPointFormat activation_format) {
  CompressionPlan plan;
  plan.terms.assign(parametric_layers, n);
  plan.weight_format = weight_format;
  plan.activation_format = activation_format;
  return plan;
}

std::string CompressionPlan::to_json() const {
  return detail::plan_to_json(*this).dump(2);
}

CompressionPlan CompressionPlan::from_json(const std::string& text) {
  try {
    return detail::plan_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw FormatError("netgraph", std::string("plan: ") + e.what());
  }
}

void validate_plan(const CompressionPlan& plan, std::size_t parametric_layers) {
  if (plan.terms.size() != parametric_layers) {
    throw CapacityError("netgraph", "plan has " +
                                        std::to_string(plan.terms.size()) +
                                        " budgets for " +
                                        std::to_string(parametric_layers) +
                                        " parametric layers");
  }
  const int cap = plan.weight_format.max_terms();
  for (std::size_t i = 0; i < plan.terms.size(); ++i) {
    if (plan.terms[i] < 1 || plan.terms[i] > cap) {
      throw CapacityError("netgraph", "parametric layer " + std::to_string(i) +
                                          " budget " +
                                          std::to_string(plan.terms[i]) +
                                          " outside [1, " +
                                          std::to_string(cap) + "]");
    }
  }
}

void check_headroom(const std::vector<LayerSpec>& layers,
                    const CompressionPlan& plan) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!layers[i].is_parametric()) continue;
    const std::size_t addends = layers[i].fan_in() + 1;
    const int growth = static_cast<int>(std::bit_width(addends - 1));
    const int need = plan.weight_format.total_bits() +
                     plan.activation_format.total_bits() + growth;
    if (need > kAccumulatorBits) {
      throw HeadroomError("netgraph", layer_tag(i, layers[i]) + " needs " +
                                          std::to_string(need) +
                                          " accumulator bits, have " +
                                          std::to_string(kAccumulatorBits));
    }
  }
}

std::size_t CompressedModel::weight_count() const {
  std::size_t n = 0;
  for (const auto& c : compressed) n += c.weight_count;
  return n;
}

namespace {

std::vector<std::int64_t> quantize_bias(const std::vector<double>& bias,
                                        const CompressionPlan& plan) {
  const int frac = plan.weight_format.frac_bits() + plan.activation_format.frac_bits();
  const int width = plan.weight_format.total_bits() + plan.activation_format.total_bits();
  const std::int64_t hi = (std::int64_t{1} << (width - 1)) - 1;
  const std::int64_t lo = -hi - 1;
  std::vector<std::int64_t> out(bias.size());
  for (std::size_t i = 0; i < bias.size(); ++i) {
    out[i] = std::clamp(round_half_even(std::ldexp(bias[i], frac)), lo, hi);
  }
  return out;
}

void require_folded(const NetworkModel& model) {
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    if (model.layers[i].kind == LayerKind::kBatchNorm) {
      throw FormatError("netgraph", layer_tag(i, model.layers[i]) +
                                        ": fold batch norm before compressing");
    }
  }
}

}  // namespace

CompressedModel compress_model(const NetworkModel& model,
                               const CompressionPlan& plan, int jobs) {
  model.validate();
  require_folded(model);
  const auto parametric = model.parametric_layers();
  validate_plan(plan, parametric.size());
  check_headroom(model.layers, plan);

  CompressedModel cm;
  cm.input_shape = model.input_shape;
  cm.layers = model.layers;
  cm.plan = plan;
  cm.compressed.resize(parametric.size());
  parallel_for(parametric.size(), jobs, [&](std::size_t k) {
    const std::size_t li = parametric[k];
    const auto& params = model.params[li];
    const int slots = plan.terms[k];
    std::vector<SptWeight> weights(params.weights.size());
    for (std::size_t w = 0; w < params.weights.size(); ++w) {
      const auto q = quantize(params.weights[w], plan.weight_format);
      try {
        weights[w] = decompose(q.value.raw, plan.weight_format, slots);
      } catch (const Error& e) {
        throw FormatError("netgraph", layer_tag(li, model.layers[li]) +
                                          " weight " + std::to_string(w) +
                                          ": " + e.what());
      }
    }
    CompressedLayer& out = cm.compressed[k];
    out.layer_index = li;
    out.weight_count = weights.size();
    out.slots = slots;
    try {
      out.stream = pack_records(weights, slots);
    } catch (const Error& e) {
      throw FormatError("netgraph", layer_tag(li, model.layers[li]) + ": " +
                                        e.what());
    }
    out.bias = quantize_bias(params.bias, plan);
  });
  return cm;
}

QuantizedModel quantize_model(const NetworkModel& model,
                              FixedPointFormat weight_format,
                              FixedPointFormat activation_format) {
  model.validate();
  require_folded(model);
  CompressionPlan formats;
  formats.weight_format = weight_format;
  formats.activation_format = activation_format;
  check_headroom(model.layers, formats);

  QuantizedModel qm;
  qm.input_shape = model.input_shape;
  qm.layers = model.layers;
  qm.weight_format = weight_format;
  qm.activation_format = activation_format;
  for (std::size_t li : model.parametric_layers()) {
    QuantizedLayer ql;
    ql.layer_index = li;
    const auto& p = model.params[li];
    ql.weights.resize(p.weights.size());
    for (std::size_t w = 0; w < p.weights.size(); ++w) {
      ql.weights[w] = quantize(p.weights[w], weight_format).value.raw;
    }
    ql.bias = quantize_bias(p.bias, formats);
    qm.parametric.push_back(std::move(ql));
  }
  return qm;
}

std::vector<std::vector<std::int64_t>> reconstructed_weights(
    const CompressedModel& cm) {
  std::vector<std::vector<std::int64_t>> out;
  out.reserve(cm.compressed.size());
  for (const auto& layer : cm.compressed) {
    const auto weights = unpack_records(layer.stream, layer.weight_count,
                                        layer.slots, cm.plan.weight_format);
    std::vector<std::int64_t> ints(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
      ints[i] = reconstruct(weights[i]);
    }
    out.push_back(std::move(ints));
  }
  return out;
}

QuantizedModel reconstructed_model(const CompressedModel& cm) {
  QuantizedModel qm;
  qm.input_shape = cm.input_shape;
  qm.layers = cm.layers;
  qm.weight_format = cm.plan.weight_format;
  qm.activation_format = cm.plan.activation_format;
  auto weights = reconstructed_weights(cm);
  for (std::size_t k = 0; k < cm.compressed.size(); ++k) {
    QuantizedLayer ql;
    ql.layer_index = cm.compressed[k].layer_index;
    ql.weights = std::move(weights[k]);
    ql.bias = cm.compressed[k].bias;
    qm.parametric.push_back(std::move(ql));
  }
  return qm;
}

}  // namespace shiftadd
