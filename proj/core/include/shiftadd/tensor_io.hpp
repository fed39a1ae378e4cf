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

// Frame tensor files and label files shared by ingestion, emulation and the
// search harness.
//
// Tensor file layout (little-endian):
//   "SATN" | u8 version (1) | u8 dtype (0 = int16, 1 = float32) | u16 ndim |
//   u32 dims[ndim] | payload
// A batch is [frames, rows, cols] or [frames, rows, cols, channels].

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "shiftadd/netgraph.hpp"

namespace shiftadd {

enum class DType : std::uint8_t { kInt16 = 0, kFloat32 = 1 };

// int16 frames hold 14-bit sensing samples; as model input they are read as
// fixed-point values with this many fractional bits (x = s / 2^14).
inline constexpr int kSampleFracBits = 14;

struct TensorFile {
  DType dtype = DType::kInt16;
  std::vector<std::uint32_t> dims;
  std::vector<std::int16_t> i16;
  std::vector<float> f32;

  std::size_t element_count() const noexcept;
};

void write_tensor(const std::filesystem::path& path, const TensorFile& t);
TensorFile read_tensor(const std::filesystem::path& path);

// One integer label per line.
std::vector<int> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, std::span<const int> labels);

// Batch of real-valued input frames (HWC), with optional ground-truth labels.
struct Dataset {
  Shape3 frame_shape{256, 11, 1};
  std::size_t count = 0;
  std::vector<float> values;  // count * frame_shape.size()
  std::vector<int> labels;    // empty or one per frame

  std::span<const float> frame(std::size_t i) const {
    return std::span<const float>(values).subspan(i * frame_shape.size(),
                                                  frame_shape.size());
  }
  bool has_labels() const noexcept { return !labels.empty(); }
};

Dataset dataset_from_tensor(const TensorFile& t);
TensorFile int16_tensor(std::span<const std::int16_t> samples, std::size_t frames,
                        Shape3 frame_shape);

// Reads frames and, when `labels_path` is non-empty, labels. Throws
// DatasetError if the label count differs from the frame count.
Dataset load_dataset(const std::filesystem::path& frames_path,
                     const std::filesystem::path& labels_path = {});

}  // namespace shiftadd
