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

// Network IR, model ingestion, batch-norm folding and whole-model
// compression into shift-term bitstreams.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shiftadd/fxp.hpp"
#include "shiftadd/sptcodec.hpp"

namespace shiftadd {

// Row-major rows x cols x channels (HWC) activation shape.
struct Shape3 {
  int rows = 1;
  int cols = 1;
  int channels = 1;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) *
           static_cast<std::size_t>(channels);
  }
  std::string to_string() const;
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

enum class LayerKind {
  kConv2D,
  kDense,
  kReLU,
  kMaxPool,
  kAvgPool,
  kBatchNorm,
  kGlobalAvgPool,
  kSoftmax,
};

const char* to_string(LayerKind kind);
// Throws FormatError for unknown names.
LayerKind layer_kind_from_string(const std::string& name);

// Conv weights are laid out [out][in][kh][kw]; dense weights [out][in] over
// the HWC-flattened input.
struct LayerSpec {
  LayerKind kind = LayerKind::kReLU;
  std::string name;

  // Conv2D
  int in_channels = 0;
  int out_channels = 0;
  int kernel_h = 1;
  int kernel_w = 1;
  int pad_h = 0;
  int pad_w = 0;
  // Conv2D and pools
  int stride_h = 1;
  int stride_w = 1;
  // MaxPool / AvgPool
  int window_h = 1;
  int window_w = 1;
  // Dense
  int in_features = 0;
  int out_features = 0;
  // BatchNorm
  int channels = 0;
  double epsilon = 1e-5;

  bool is_parametric() const noexcept {
    return kind == LayerKind::kConv2D || kind == LayerKind::kDense;
  }
  std::size_t weight_count() const noexcept;
  std::size_t bias_count() const noexcept;
  // Number of blob values the layer owns (weights, bias, or 4*C for BN).
  std::size_t blob_count() const noexcept;
  // Inputs feeding one output neuron.
  std::size_t fan_in() const noexcept;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

LayerSpec conv2d(int in_channels, int out_channels, int kernel_h, int kernel_w,
                 int pad_h = 0, int pad_w = 0, int stride_h = 1,
                 int stride_w = 1);
LayerSpec dense(int in_features, int out_features);
LayerSpec relu();
LayerSpec max_pool(int window_h, int window_w, int stride_h, int stride_w);
LayerSpec avg_pool(int window_h, int window_w, int stride_h, int stride_w);
LayerSpec batch_norm(int channels, double epsilon = 1e-5);
LayerSpec global_avg_pool();
LayerSpec softmax();

// Throws ShapeError naming the layer when `in` cannot feed it.
Shape3 output_shape(const LayerSpec& layer, Shape3 in, std::size_t index = 0);
// Shapes before every layer plus the final output (layers.size() + 1 items).
std::vector<Shape3> infer_shapes(const std::vector<LayerSpec>& layers,
                                 Shape3 input);

// Real-valued parameters of one layer. Only the vectors relevant to the
// layer kind are populated.
struct LayerParams {
  std::vector<double> weights;
  std::vector<double> bias;
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> mean;
  std::vector<double> variance;

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct NetworkModel {
  Shape3 input_shape{256, 11, 1};
  std::vector<LayerSpec> layers;
  std::vector<LayerParams> params;  // parallel to layers

  // Indices into `layers` of Conv2D / Dense layers, ascending.
  std::vector<std::size_t> parametric_layers() const;
  // Every stored value: weights, biases and batch-norm statistics.
  std::size_t parameter_count() const;
  // Conv/Dense weights only.
  std::size_t weight_count() const;

  // Throws ShapeError / FormatError on inconsistent shapes or tensors.
  void validate() const;
};

// Reads a JSON manifest and a little-endian float32 blob. An empty
// `blob_path` resolves the manifest's "blob" entry relative to the manifest.
NetworkModel load_model(const std::filesystem::path& manifest_path,
                        const std::filesystem::path& blob_path = {});
void save_model(const NetworkModel& model,
                const std::filesystem::path& manifest_path,
                const std::filesystem::path& blob_path);

// Folds every BatchNorm into the preceding Conv2D/Dense layer.
NetworkModel fold_batchnorm(const NetworkModel& model);

// Per-parametric-layer term budgets and the fixed-point formats in use.
struct CompressionPlan {
  std::vector<int> terms;  // one entry per parametric layer, in order
  FixedPointFormat weight_format{16, 12};
  FixedPointFormat activation_format{16, 10};

  static CompressionPlan uniform(std::size_t parametric_layers, int n,
                                 FixedPointFormat weight_format = {16, 12},
                                 FixedPointFormat activation_format = {16, 10});

  std::string to_json() const;
  static CompressionPlan from_json(const std::string& text);

  friend bool operator==(const CompressionPlan&,
                         const CompressionPlan&) = default;
};

// Throws CapacityError unless `plan` has one budget in [1, max_terms] per
// parametric layer of `model`.
void validate_plan(const CompressionPlan& plan, std::size_t parametric_layers);

// Throws HeadroomError if any parametric layer could overflow the 64-bit
// accumulator: W_w + W_a + ceil(log2(fan_in + 1)) must not exceed 64.
void check_headroom(const std::vector<LayerSpec>& layers,
                    const CompressionPlan& plan);

struct CompressedLayer {
  std::size_t layer_index = 0;   // position in the layer list
  std::size_t weight_count = 0;
  int slots = 0;                 // N for this layer
  Bitstream stream;
  // Raw, F_w + F_a fractional bits, saturated to W_w + W_a signed bits.
  std::vector<std::int64_t> bias;

  friend bool operator==(const CompressedLayer&,
                         const CompressedLayer&) = default;
};

struct CompressedModel {
  Shape3 input_shape;
  std::vector<LayerSpec> layers;
  CompressionPlan plan;
  std::vector<CompressedLayer> compressed;  // one per parametric layer

  std::size_t weight_count() const;
  friend bool operator==(const CompressedModel&,
                         const CompressedModel&) = default;
};

// Quantizes, decomposes and packs every parametric layer. The model must be
// batch-norm free. `jobs` > 1 compresses layers concurrently; output is
// identical for any job count.
CompressedModel compress_model(const NetworkModel& model,
                               const CompressionPlan& plan, int jobs = 1);

// Integer model evaluated by multiply-accumulate: weights carry F_w
// fractional bits, biases F_w + F_a.
struct QuantizedLayer {
  std::size_t layer_index = 0;
  std::vector<std::int64_t> weights;
  std::vector<std::int64_t> bias;

  friend bool operator==(const QuantizedLayer&,
                         const QuantizedLayer&) = default;
};

struct QuantizedModel {
  Shape3 input_shape;
  std::vector<LayerSpec> layers;
  FixedPointFormat weight_format;
  FixedPointFormat activation_format;
  std::vector<QuantizedLayer> parametric;
};

// Straight quantization of the float weights (no term truncation).
QuantizedModel quantize_model(const NetworkModel& model,
                              FixedPointFormat weight_format,
                              FixedPointFormat activation_format);

// Unpacks and reconstructs every layer's integer weights.
std::vector<std::vector<std::int64_t>> reconstructed_weights(
    const CompressedModel& cm);
QuantizedModel reconstructed_model(const CompressedModel& cm);

}  // namespace shiftadd
