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

#include "shiftadd/emulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "shiftadd/errors.hpp"

namespace shiftadd {
namespace {

void check_frame(std::span<const float> frame, Shape3 shape) {
  if (frame.size() != shape.size()) {
    throw ShapeError("emulator", "frame has " + std::to_string(frame.size()) +
                                     " values, model expects " + shape.to_string());
  }
}

std::size_t hwc(Shape3 s, int r, int c, int ch) {
  return (static_cast<std::size_t>(r) * s.cols + c) * s.channels + ch;
}

template <class T>
std::int64_t floor_div(T sum, std::int64_t n) {
  std::int64_t q = sum / n;
  if (sum % n != 0 && sum < 0) --q;
  return q;
}

template <class T, class Reduce>
std::vector<T> pool_forward(std::span<const T> input, Shape3 in,
                            const LayerSpec& layer, Reduce&& reduce) {
  const Shape3 out = output_shape(layer, in);
  std::vector<T> result(out.size());
  std::vector<T> window;
  window.reserve(static_cast<std::size_t>(layer.window_h) * layer.window_w);
  for (int r = 0; r < out.rows; ++r) {
    for (int c = 0; c < out.cols; ++c) {
      for (int ch = 0; ch < out.channels; ++ch) {
        window.clear();
        for (int y = 0; y < layer.window_h; ++y) {
          for (int x = 0; x < layer.window_w; ++x) {
            window.push_back(input[hwc(in, r * layer.stride_h + y,
                                       c * layer.stride_w + x, ch)]);
          }
        }
        result[hwc(out, r, c, ch)] = reduce(window);
      }
    }
  }
  return result;
}

template <class T, class Reduce>
std::vector<T> global_pool(std::span<const T> input, Shape3 in, Reduce&& reduce) {
  std::vector<T> result(static_cast<std::size_t>(in.channels));
  std::vector<T> column(static_cast<std::size_t>(in.rows) * in.cols);
  for (int ch = 0; ch < in.channels; ++ch) {
    for (std::size_t p = 0; p < column.size(); ++p) {
      column[p] = input[p * static_cast<std::size_t>(in.channels) + ch];
    }
    result[static_cast<std::size_t>(ch)] = reduce(column);
  }
  return result;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::int64_t floor_mean(const std::vector<std::int64_t>& v) {
  std::int64_t s = 0;
  for (auto x : v) s += x;
  return floor_div(s, static_cast<std::int64_t>(v.size()));
}

// Walks the integer pipeline; `param_layer(k, layer, input, in_shape)` returns
// the accumulators of the k-th parametric layer.
template <class ParamFn>
IntResult run_integer(const std::vector<LayerSpec>& layers, Shape3 input_shape,
                      FixedPointFormat wf, FixedPointFormat af,
                      std::span<const float> frame, ParamFn&& param_layer) {
  check_frame(frame, input_shape);
  IntResult result;
  const int acc_frac = wf.frac_bits() + af.frac_bits();
  std::vector<std::int64_t> cur(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const auto q = quantize(frame[i], af);
    cur[i] = q.value.raw;
    result.saturations += q.saturated ? 1 : 0;
  }
  Shape3 shape = input_shape;
  bool pending = false;
  auto settle = [&] {
    if (!pending) return;
    for (auto& v : cur) {
      bool sat = false;
      v = requantize(v, acc_frac, af, &sat);
      result.saturations += sat ? 1 : 0;
    }
    pending = false;
  };
  std::size_t k = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& layer = layers[i];
    const Shape3 out = output_shape(layer, shape, i);
    switch (layer.kind) {
      case LayerKind::kConv2D:
      case LayerKind::kDense:
        settle();
        cur = param_layer(k++, layer, std::span<const std::int64_t>(cur), shape);
        pending = true;
        break;
      case LayerKind::kReLU:
        for (auto& v : cur) v = std::max<std::int64_t>(v, 0);
        break;
      case LayerKind::kMaxPool:
        settle();
        cur = pool_forward<std::int64_t>(cur, shape, layer, [](const auto& w) {
          return *std::max_element(w.begin(), w.end());
        });
        break;
      case LayerKind::kAvgPool:
        settle();
        cur = pool_forward<std::int64_t>(cur, shape, layer, floor_mean);
        break;
      case LayerKind::kGlobalAvgPool:
        settle();
        cur = global_pool<std::int64_t>(cur, shape, floor_mean);
        break;
      case LayerKind::kSoftmax:
        break;
      case LayerKind::kBatchNorm:
        throw FormatError("emulator", "layer " + std::to_string(i) +
                                          ": integer pipeline needs folded batch norm");
    }
    shape = out;
  }
  result.score_frac_bits = pending ? acc_frac : af.frac_bits();
  result.scores = std::move(cur);
  result.label = argmax(std::span<const std::int64_t>(result.scores));
  return result;
}

}  // namespace

std::vector<double> conv_forward_float(std::span<const double> input, Shape3 in,
                                       const LayerSpec& layer,
                                       const LayerParams& params) {
  const Shape3 out = output_shape(layer, in);
  if (input.size() != in.size()) {
    throw ShapeError("emulator", "input size does not match " + in.to_string());
  }
  std::vector<double> result(out.size());
  if (layer.kind == LayerKind::kDense) {
    const auto n_in = static_cast<std::size_t>(layer.in_features);
    for (std::size_t o = 0; o < result.size(); ++o) {
      double acc = params.bias[o];
      for (std::size_t i = 0; i < n_in; ++i) acc += input[i] * params.weights[o * n_in + i];
      result[o] = acc;
    }
    return result;
  }
  if (layer.kind != LayerKind::kConv2D) {
    throw ShapeError("emulator", "conv_forward_float needs conv2d or dense");
  }
  for (int r = 0; r < out.rows; ++r) {
    for (int c = 0; c < out.cols; ++c) {
      for (int oc = 0; oc < out.channels; ++oc) {
        double acc = params.bias[static_cast<std::size_t>(oc)];
        for (int ky = 0; ky < layer.kernel_h; ++ky) {
          const int y = r * layer.stride_h + ky - layer.pad_h;
          if (y < 0 || y >= in.rows) continue;
          for (int kx = 0; kx < layer.kernel_w; ++kx) {
            const int x = c * layer.stride_w + kx - layer.pad_w;
            if (x < 0 || x >= in.cols) continue;
            for (int ic = 0; ic < layer.in_channels; ++ic) {
              const std::size_t wi =
                  ((static_cast<std::size_t>(oc) * layer.in_channels + ic) * layer.kernel_h + ky) *
                      layer.kernel_w + kx;
              acc += input[hwc(in, y, x, ic)] * params.weights[wi];
            }
          }
        }
        result[hwc(out, r, c, oc)] = acc;
      }
    }
  }
  return result;
}

std::vector<double> layer_forward_float(std::span<const double> input, Shape3 in,
                                        const LayerSpec& layer,
                                        const LayerParams& params) {
  switch (layer.kind) {
    case LayerKind::kConv2D:
    case LayerKind::kDense:
      return conv_forward_float(input, in, layer, params);
    case LayerKind::kReLU: {
      std::vector<double> out(input.begin(), input.end());
      for (auto& v : out) v = std::max(v, 0.0);
      return out;
    }
    case LayerKind::kMaxPool:
      return pool_forward<double>(input, in, layer, [](const auto& w) {
        return *std::max_element(w.begin(), w.end());
      });
    case LayerKind::kAvgPool:
      return pool_forward<double>(input, in, layer, mean_of);
    case LayerKind::kGlobalAvgPool:
      return global_pool<double>(input, in, mean_of);
    case LayerKind::kBatchNorm: {
      std::vector<double> out(input.begin(), input.end());
      const auto ch = static_cast<std::size_t>(in.channels);
      for (std::size_t i = 0; i < out.size(); ++i) {
        const std::size_t c = i % ch;
        out[i] = (out[i] - params.mean[c]) / std::sqrt(params.variance[c] + layer.epsilon) *
                     params.gamma[c] + params.beta[c];
      }
      return out;
    }
    case LayerKind::kSoftmax: {
      std::vector<double> out(input.begin(), input.end());
      if (out.empty()) return out;
      const double hi = *std::max_element(out.begin(), out.end());
      double sum = 0.0;
      for (auto& v : out) {
        v = std::exp(v - hi);
        sum += v;
      }
      for (auto& v : out) v /= sum;
      return out;
    }
  }
  throw ShapeError("emulator", "unsupported layer kind");
}

FloatResult forward_float(const NetworkModel& model, std::span<const float> frame) {
  check_frame(frame, model.input_shape);
  std::vector<double> cur(frame.begin(), frame.end());
  Shape3 shape = model.input_shape;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Shape3 out = output_shape(model.layers[i], shape, i);
    cur = layer_forward_float(cur, shape, model.layers[i], model.params[i]);
    shape = out;
  }
  FloatResult r;
  r.scores = std::move(cur);
  r.label = argmax(std::span<const double>(r.scores));
  return r;
}

std::vector<std::int64_t> conv_forward_int(std::span<const std::int64_t> input,
                                           Shape3 in, const LayerSpec& layer,
                                           std::span<const std::int64_t> weights,
                                           std::span<const std::int64_t> bias) {
  const Shape3 out = output_shape(layer, in);
  if (input.size() != in.size() || weights.size() != layer.weight_count() ||
      bias.size() != layer.bias_count()) {
    throw ShapeError("emulator", "conv_forward_int operand sizes do not match layer");
  }
  std::vector<std::int64_t> result(out.size());
  if (layer.kind == LayerKind::kDense) {
    const auto n_in = static_cast<std::size_t>(layer.in_features);
    for (std::size_t o = 0; o < result.size(); ++o) {
      std::int64_t acc = bias[o];
      for (std::size_t i = 0; i < n_in; ++i) acc += input[i] * weights[o * n_in + i];
      result[o] = acc;
    }
    return result;
  }
  for (int r = 0; r < out.rows; ++r) {
    for (int c = 0; c < out.cols; ++c) {
      for (int oc = 0; oc < out.channels; ++oc) {
        std::int64_t acc = bias[static_cast<std::size_t>(oc)];
        for (int ky = 0; ky < layer.kernel_h; ++ky) {
          const int y = r * layer.stride_h + ky - layer.pad_h;
          if (y < 0 || y >= in.rows) continue;
          for (int kx = 0; kx < layer.kernel_w; ++kx) {
            const int x = c * layer.stride_w + kx - layer.pad_w;
            if (x < 0 || x >= in.cols) continue;
            for (int ic = 0; ic < layer.in_channels; ++ic) {
              const std::size_t wi =
                  ((static_cast<std::size_t>(oc) * layer.in_channels + ic) * layer.kernel_h + ky) *
                      layer.kernel_w + kx;
              acc += input[hwc(in, y, x, ic)] * weights[wi];
            }
          }
        }
        result[hwc(out, r, c, oc)] = acc;
      }
    }
  }
  return result;
}

std::vector<std::int64_t> quantize_frame(std::span<const float> frame,
                                         FixedPointFormat activation_format) {
  std::vector<std::int64_t> out(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) {
    out[i] = quantize(frame[i], activation_format).value.raw;
  }
  return out;
}

IntResult forward_int(const QuantizedModel& model, std::span<const float> frame) {
  return run_integer(model.layers, model.input_shape, model.weight_format,
                     model.activation_format, frame,
                     [&](std::size_t k, const LayerSpec& layer,
                         std::span<const std::int64_t> input, Shape3 in) {
                       const auto& ql = model.parametric.at(k);
                       return conv_forward_int(input, in, layer, ql.weights, ql.bias);
                     });
}

std::vector<ShiftStage> decode_stages(const CompressedLayer& layer) {
  // unpack_records validates ordering and NOP placement.
  const auto weights = unpack_records(layer.stream, layer.weight_count, layer.slots,
                                      FixedPointFormat{});
  std::vector<ShiftStage> stages(static_cast<std::size_t>(layer.slots));
  for (int k = 0; k < layer.slots; ++k) {
    auto& stage = stages[static_cast<std::size_t>(k)];
    stage.slot_index = k;
    stage.records.reserve(weights.size());
    for (const auto& w : weights) {
      stage.records.push_back(static_cast<std::size_t>(k) < w.terms.size()
                                  ? PackedRecord::from_term(w.terms[static_cast<std::size_t>(k)])
                                  : PackedRecord::nop());
    }
  }
  return stages;
}

std::vector<std::int64_t> shiftadd_forward(std::span<const std::int64_t> input,
                                           Shape3 in, const LayerSpec& layer,
                                           std::span<const ShiftStage> stages,
                                           std::span<const std::int64_t> bias,
                                           AddOrder order) {
  const Shape3 out = output_shape(layer, in);
  if (!layer.is_parametric() || input.size() != in.size() ||
      bias.size() != layer.bias_count() || stages.empty()) {
    throw ShapeError("emulator", "shiftadd_forward operand sizes do not match layer");
  }
  for (const auto& s : stages) {
    if (s.records.size() != layer.weight_count()) {
      throw ShapeError("emulator", "shift stage " + std::to_string(s.slot_index) +
                                       " holds " + std::to_string(s.records.size()) +
                                       " records for " +
                                       std::to_string(layer.weight_count()) + " weights");
    }
  }
  std::vector<std::int64_t> result(out.size());
  shiftadd_layer<std::int64_t>(input, in, layer, stages, bias, result, order);
  return result;
}

ShiftAddEngine::ShiftAddEngine(CompressedModel cm) : cm_(std::move(cm)) {
  check_headroom(cm_.layers, cm_.plan);
  stages_.reserve(cm_.compressed.size());
  for (const auto& layer : cm_.compressed) stages_.push_back(decode_stages(layer));
}

IntResult ShiftAddEngine::forward(std::span<const float> frame) const {
  return run_integer(cm_.layers, cm_.input_shape, cm_.plan.weight_format,
                     cm_.plan.activation_format, frame,
                     [&](std::size_t k, const LayerSpec& layer,
                         std::span<const std::int64_t> input, Shape3 in) {
                       return shiftadd_forward(input, in, layer, stages_.at(k),
                                               cm_.compressed.at(k).bias);
                     });
}

IntResult forward(const CompressedModel& cm, std::span<const float> frame) {
  return ShiftAddEngine(cm).forward(frame);
}

}  // namespace shiftadd
