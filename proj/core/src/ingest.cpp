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

#include "shiftadd/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

#include "rng.hpp"
#include "shiftadd/errors.hpp"

namespace shiftadd {

void SampleStream::validate() const {
  if (channels < 1) throw RangeError("ingest", "channel count must be >= 1");
  if (samples.size() % static_cast<std::size_t>(channels) != 0) {
    throw RangeError("ingest", "sample count is not a whole number of rows");
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i] > kSampleMax) {
      throw RangeError("ingest", "sample " + std::to_string(i) + " = " +
                                     std::to_string(samples[i]) +
                                     " exceeds 14 bits");
    }
  }
}

Averager::Averager(int channels) : channels_(channels) {
  if (channels < 1) throw RangeError("ingest", "channel count must be >= 1");
  sums_.assign(static_cast<std::size_t>(channels), 0);
}

void Averager::push(std::span<const std::uint16_t> rows) {
  const auto ch = static_cast<std::size_t>(channels_);
  if (rows.size() % ch != 0) {
    throw RangeError("ingest", "pushed samples are not a whole number of rows");
  }
  for (std::size_t at = 0; at < rows.size(); at += ch) {
    for (std::size_t c = 0; c < ch; ++c) sums_[c] += rows[at + c];
    ++consumed_;
    if (++pending_rows_ == 4) {
      const std::size_t base = out_.size();
      out_.resize(base + ch);
      for (std::size_t c = 0; c < ch; ++c) {
        out_[base + c] = static_cast<std::uint16_t>(sums_[c] >> 2);
        sums_[c] = 0;
      }
      pending_rows_ = 0;
      ++emitted_;
    }
  }
}

std::vector<std::uint16_t> Averager::take() {
  std::vector<std::uint16_t> out;
  out.swap(out_);
  return out;
}

SampleStream average4(const SampleStream& stream) {
  stream.validate();
  Averager avg(stream.channels);
  avg.push(stream.samples);
  return SampleStream{stream.channels, avg.take()};
}

std::vector<Frame> frame(const SampleStream& averaged, int rows, int hop) {
  if (rows < 1) throw RangeError("ingest", "frame rows must be >= 1");
  if (hop <= 0) hop = rows;
  const auto ch = static_cast<std::size_t>(averaged.channels);
  const std::size_t total = averaged.rows();
  std::vector<Frame> frames;
  for (std::size_t start = 0; start + static_cast<std::size_t>(rows) <= total;
       start += static_cast<std::size_t>(hop)) {
    Frame f;
    f.rows = rows;
    f.cols = averaged.channels;
    const auto first = averaged.samples.begin() + static_cast<std::ptrdiff_t>(start * ch);
    f.values.assign(first, first + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(rows) * ch));
    frames.push_back(std::move(f));
  }
  return frames;
}

void write_stream(const std::filesystem::path& path, const SampleStream& stream) {
  stream.validate();
  std::vector<std::uint8_t> out = {'D', 'V', 'S', 'S', 1, 0,
                                   static_cast<std::uint8_t>(stream.channels & 0xFF),
                                   static_cast<std::uint8_t>(stream.channels >> 8)};
  const std::uint64_t rows = stream.rows();
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(rows >> (8 * b)));
  for (auto s : stream.samples) {
    out.push_back(static_cast<std::uint8_t>(s & 0xFF));
    out.push_back(static_cast<std::uint8_t>(s >> 8));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("ingest", "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("ingest", "short write to " + path.string());
}

SampleStream read_stream(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("ingest", "cannot open " + path.string());
  std::vector<std::uint8_t> in((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
  if (in.size() < 16 || std::memcmp(in.data(), "DVSS", 4) != 0) {
    throw FormatError("ingest", path.string() + ": missing DVSS magic");
  }
  const int version = in[4] | (in[5] << 8);
  if (version != 1) throw FormatError("ingest", path.string() + ": unsupported version");
  SampleStream s;
  s.channels = in[6] | (in[7] << 8);
  std::uint64_t rows = 0;
  for (int b = 0; b < 8; ++b) rows |= static_cast<std::uint64_t>(in[8 + b]) << (8 * b);
  const std::uint64_t count = rows * static_cast<std::uint64_t>(s.channels);
  if (in.size() - 16 != count * 2) {
    throw FormatError("ingest", path.string() + ": payload does not match header");
  }
  s.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    s.samples[i] = static_cast<std::uint16_t>(in[16 + 2 * i] | (in[17 + 2 * i] << 8));
  }
  s.validate();
  return s;
}

SampleStream synth_event_stream(int label, int raw_rows, int channels,
                                std::uint64_t seed) {
  if (label < 0 || label > 2) throw RangeError("ingest", "synthetic label must be 0..2");
  if (raw_rows < 1 || channels < 1) throw RangeError("ingest", "invalid stream size");
  detail::Rng rng(seed);
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const int center = channels >= 5 ? rng.uniform_int(2, channels - 3)
                                   : rng.uniform_int(0, channels - 1);
  std::vector<double> base(static_cast<std::size_t>(channels));
  for (auto& b : base) b = rng.uniform(6000.0, 8000.0);
  std::vector<double> signal(static_cast<std::size_t>(raw_rows), 0.0);
  switch (label) {
    case 0: {  // sustained harmonic
      const double amp = rng.uniform(1500.0, 2500.0);
      const double period = rng.uniform(24.0, 64.0);
      const double phase = rng.uniform(0.0, kTwoPi);
      for (int t = 0; t < raw_rows; ++t) {
        signal[static_cast<std::size_t>(t)] = amp * std::sin(kTwoPi * t / period + phase);
      }
      break;
    }
    case 1: {  // sparse decaying impulses
      const int impulses = rng.uniform_int(2, 4);
      for (int k = 0; k < impulses; ++k) {
        const int start = rng.uniform_int(0, std::max(raw_rows - 24, 0));
        const double amp = rng.uniform(3000.0, 5000.0);
        for (int t = start; t < raw_rows; ++t) {
          const double dt = t - start;
          signal[static_cast<std::size_t>(t)] +=
              amp * std::exp(-dt / 10.0) * std::cos(kTwoPi * dt / 8.0);
        }
      }
      break;
    }
    default: {  // periodic burst trains
      const double amp = rng.uniform(1500.0, 2500.0);
      const int period = rng.uniform_int(96, 160);
      const int length = period / 4;
      const int offset = rng.uniform_int(0, period - 1);
      for (int t = 0; t < raw_rows; ++t) {
        if ((t + offset) % period < length) {
          signal[static_cast<std::size_t>(t)] = amp * std::sin(kTwoPi * t / 12.0);
        }
      }
      break;
    }
  }
  SampleStream s;
  s.channels = channels;
  s.samples.resize(static_cast<std::size_t>(raw_rows) * static_cast<std::size_t>(channels));
  for (int t = 0; t < raw_rows; ++t) {
    for (int c = 0; c < channels; ++c) {
      const double d = c - center;
      const double gain = std::exp(-0.5 * d * d);
      const double v = base[static_cast<std::size_t>(c)] +
                       gain * signal[static_cast<std::size_t>(t)] + 60.0 * rng.normal();
      s.samples[static_cast<std::size_t>(t) * static_cast<std::size_t>(channels) +
                static_cast<std::size_t>(c)] =
          static_cast<std::uint16_t>(std::clamp(std::lround(v), 0L, static_cast<long>(kSampleMax)));
    }
  }
  return s;
}

double duty_cycle(const Frame& f) {
  if (f.rows < 1 || f.cols < 1) return 0.0;
  // Most active channel by variance.
  int best = 0;
  double best_var = -1.0;
  for (int c = 0; c < f.cols; ++c) {
    double mean = 0.0, sq = 0.0;
    for (int r = 0; r < f.rows; ++r) {
      const double v = f.values[static_cast<std::size_t>(r) * f.cols + c];
      mean += v;
      sq += v * v;
    }
    mean /= f.rows;
    const double var = sq / f.rows - mean * mean;
    if (var > best_var) {
      best_var = var;
      best = c;
    }
  }
  std::vector<double> col(static_cast<std::size_t>(f.rows));
  for (int r = 0; r < f.rows; ++r) {
    col[static_cast<std::size_t>(r)] = f.values[static_cast<std::size_t>(r) * f.cols + best];
  }
  std::vector<double> sorted = col;
  std::nth_element(sorted.begin(), sorted.begin() + f.rows / 2, sorted.end());
  const double median = sorted[static_cast<std::size_t>(f.rows / 2)];
  double peak = 0.0;
  for (auto& v : col) {
    v = std::abs(v - median);
    peak = std::max(peak, v);
  }
  if (peak <= 0.0) return 0.0;
  std::size_t active = 0;
  for (double v : col) active += v > 0.3 * peak ? 1 : 0;
  return static_cast<double>(active) / f.rows;
}

int rule_classify(const Frame& f) {
  const double duty = duty_cycle(f);
  if (duty >= 0.5) return 0;
  if (duty < 0.1) return 1;
  return 2;
}

SynthDataset synth_dataset(const SynthConfig& config) {
  if (config.class_count < 1 || config.class_count > 3) {
    throw RangeError("ingest", "class count must be in [1, 3], got " +
                                   std::to_string(config.class_count));
  }
  if (config.rows < 1 || config.channels < 1) {
    throw RangeError("ingest", "frame rows and channels must be >= 1");
  }
  SynthDataset ds;
  const std::size_t total = config.frames_per_class * static_cast<std::size_t>(config.class_count);
  detail::Rng seeds(config.seed);
  std::size_t correct = 0;
  ds.raw.channels = config.channels;
  for (std::size_t i = 0; i < total; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(config.class_count));
    const auto raw = synth_event_stream(label, 4 * config.rows, config.channels, seeds.next());
    auto frames = frame(average4(raw), config.rows);
    if (config.keep_raw) ds.raw.samples.insert(ds.raw.samples.end(), raw.samples.begin(), raw.samples.end());
    ds.frames.push_back(std::move(frames.front()));
    ds.labels.push_back(label);
    ds.rule_labels.push_back(rule_classify(ds.frames.back()));
    correct += ds.rule_labels.back() == label ? 1 : 0;
  }
  ds.rule_accuracy = total == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(total);
  return ds;
}

Dataset to_dataset(std::span<const Frame> frames, std::vector<int> labels) {
  Dataset out;
  out.count = frames.size();
  if (!frames.empty()) out.frame_shape = Shape3{frames.front().rows, frames.front().cols, 1};
  out.values.reserve(out.count * out.frame_shape.size());
  for (const auto& f : frames) {
    if (f.rows != out.frame_shape.rows || f.cols != out.frame_shape.cols) {
      throw ShapeError("ingest", "frames differ in size");
    }
    for (auto v : f.values) {
      out.values.push_back(std::ldexp(static_cast<float>(v), -kSampleFracBits));
    }
  }
  out.labels = std::move(labels);
  return out;
}

Dataset to_dataset(const SynthDataset& ds) { return to_dataset(ds.frames, ds.labels); }

TensorFile frames_tensor(std::span<const Frame> frames) {
  std::vector<std::int16_t> samples;
  Shape3 shape{0, 0, 1};
  if (!frames.empty()) shape = Shape3{frames.front().rows, frames.front().cols, 1};
  for (const auto& f : frames) {
    if (f.rows != shape.rows || f.cols != shape.cols) {
      throw ShapeError("ingest", "frames differ in size");
    }
    for (auto v : f.values) samples.push_back(static_cast<std::int16_t>(v));
  }
  return int16_tensor(samples, frames.size(), shape);
}

}  // namespace shiftadd
