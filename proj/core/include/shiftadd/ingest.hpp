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

// Sensing-stream preprocessing (accumulate-and-average over four samples,
// framing) and a synthetic three-class vibration dataset.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "shiftadd/tensor_io.hpp"

namespace shiftadd {

inline constexpr std::uint16_t kSampleMax = (1U << 14) - 1;

// Time-major, channel-minor 14-bit samples.
struct SampleStream {
  int channels = 11;
  std::vector<std::uint16_t> samples;

  std::size_t rows() const noexcept {
    return channels > 0 ? samples.size() / static_cast<std::size_t>(channels) : 0;
  }
  // Throws RangeError for samples above 14 bits or a ragged last row.
  void validate() const;
};

// Streaming average-of-four. Rows arrive in any chunking; complete groups of
// four are emitted as floor(sum / 4) == sum >> 2, the remainder is held.
class Averager {
 public:
  explicit Averager(int channels);

  // `rows` holds whole rows (multiple of the channel count).
  void push(std::span<const std::uint16_t> rows);
  // Averaged rows produced since the last call.
  std::vector<std::uint16_t> take();

  std::size_t consumed_rows() const noexcept { return consumed_; }
  std::size_t emitted_rows() const noexcept { return emitted_; }
  std::size_t buffered_rows() const noexcept { return pending_rows_; }

 private:
  int channels_;
  std::vector<std::uint32_t> sums_;
  std::size_t pending_rows_ = 0;
  std::size_t consumed_ = 0;
  std::size_t emitted_ = 0;
  std::vector<std::uint16_t> out_;
};

// Whole-stream form; an incomplete trailing group is dropped.
SampleStream average4(const SampleStream& stream);

struct Frame {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint16_t> values;  // rows * cols, row-major
};

// Windows of `rows` averaged rows every `hop` rows; partial tails dropped.
// hop <= 0 means hop = rows.
std::vector<Frame> frame(const SampleStream& averaged, int rows = 256, int hop = 0);

// Raw stream file: "DVSS" | u16 version | u16 channels | u64 rows | u16 LE
// samples, time-major channel-minor.
void write_stream(const std::filesystem::path& path, const SampleStream& stream);
SampleStream read_stream(const std::filesystem::path& path);

struct SynthConfig {
  int class_count = 3;
  std::size_t frames_per_class = 100;
  std::uint64_t seed = 42;
  int rows = 256;      // averaged rows per frame
  int channels = 11;
  bool keep_raw = false;  // also return the concatenated raw stream
};

struct SynthDataset {
  std::vector<Frame> frames;
  std::vector<int> labels;
  std::vector<int> rule_labels;  // energy/duty-cycle rule prediction
  double rule_accuracy = 1.0;    // fraction, 1.0 for an empty set
  SampleStream raw;              // filled when keep_raw is set
};

// Class 0: sustained harmonic; class 1: sparse decaying impulses; class 2:
// periodic burst trains. Frames are generated at 4x the frame rate and run
// through average4 + frame. Labels cycle 0, 1, ..., class_count - 1.
// Throws RangeError unless 1 <= class_count <= 3.
SynthDataset synth_dataset(const SynthConfig& config);
// Raw (pre-averaging) stream for one synthetic event.
SampleStream synth_event_stream(int label, int raw_rows, int channels,
                                std::uint64_t seed);

// Duty-cycle rule on the most active channel: fraction of rows deviating from
// the channel median by more than 30% of the peak deviation. >= 0.5 -> 0,
// < 0.1 -> 1, otherwise 2.
int rule_classify(const Frame& f);
double duty_cycle(const Frame& f);

Dataset to_dataset(const SynthDataset& ds);
Dataset to_dataset(std::span<const Frame> frames, std::vector<int> labels = {});
// int16 tensor [count, rows, cols]. Throws ShapeError on mixed frame sizes.
TensorFile frames_tensor(std::span<const Frame> frames);

}  // namespace shiftadd
