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

// Reference float inference, reference integer (multiply-accumulate)
// inference, and the shift-add forward pass.
//
// Integer pipeline conventions:
//   * the frame is quantized to the activation format on entry;
//   * Conv2D / Dense produce raw accumulators with F_w + F_a fractional bits;
//   * a following ReLU is applied to the accumulator, then every other layer
//     first requantizes (round half to even, saturate) to the activation
//     format;
//   * average pools use floor division; Softmax is the identity on integer
//     scores (it preserves the argmax);
//   * if the graph ends in a parametric layer (optionally followed by ReLU or
//     Softmax) the scores are that layer's raw accumulators.

#include <cstdint>
#include <span>
#include <vector>

#include "shiftadd/netgraph.hpp"
#include "shiftadd/shiftadd_kernel.hpp"

namespace shiftadd {

// Lowest index among the maxima; -1 for an empty span.
template <class T>
int argmax(std::span<const T> scores) {
  int best = -1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (best < 0 || scores[i] > scores[static_cast<std::size_t>(best)]) {
      best = static_cast<int>(i);
    }
  }
  return best;
}

// ---- float reference ------------------------------------------------------

// Cross-correlation (Conv2D) or affine map (Dense) plus bias.
std::vector<double> conv_forward_float(std::span<const double> input, Shape3 in,
                                       const LayerSpec& layer,
                                       const LayerParams& params);
// Any layer kind.
std::vector<double> layer_forward_float(std::span<const double> input, Shape3 in,
                                        const LayerSpec& layer,
                                        const LayerParams& params);

struct FloatResult {
  std::vector<double> scores;
  int label = -1;
};

FloatResult forward_float(const NetworkModel& model, std::span<const float> frame);

// ---- integer reference ----------------------------------------------------

// Exact multiply-accumulate: out = sum(input * weight) + bias.
std::vector<std::int64_t> conv_forward_int(std::span<const std::int64_t> input,
                                           Shape3 in, const LayerSpec& layer,
                                           std::span<const std::int64_t> weights,
                                           std::span<const std::int64_t> bias);

struct IntResult {
  std::vector<std::int64_t> scores;
  int score_frac_bits = 0;
  int label = -1;
  // Number of values clamped by requantization across the pass.
  std::size_t saturations = 0;

  friend bool operator==(const IntResult&, const IntResult&) = default;
};

// Quantizes a real-valued frame to the activation format.
std::vector<std::int64_t> quantize_frame(std::span<const float> frame,
                                         FixedPointFormat activation_format);

IntResult forward_int(const QuantizedModel& model, std::span<const float> frame);

// ---- shift-add ------------------------------------------------------------

// Splits a layer's record stream into its N shift stages.
std::vector<ShiftStage> decode_stages(const CompressedLayer& layer);

std::vector<std::int64_t> shiftadd_forward(std::span<const std::int64_t> input,
                                           Shape3 in, const LayerSpec& layer,
                                           std::span<const ShiftStage> stages,
                                           std::span<const std::int64_t> bias,
                                           AddOrder order = AddOrder::kTree);

// Compressed model with its stages decoded once, ready for repeated frames.
class ShiftAddEngine {
 public:
  explicit ShiftAddEngine(CompressedModel cm);

  IntResult forward(std::span<const float> frame) const;
  const CompressedModel& model() const noexcept { return cm_; }

 private:
  CompressedModel cm_;
  std::vector<std::vector<ShiftStage>> stages_;  // per parametric layer
};

IntResult forward(const CompressedModel& cm, std::span<const float> frame);

}  // namespace shiftadd
