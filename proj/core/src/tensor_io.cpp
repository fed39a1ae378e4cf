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

#include "shiftadd/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "shiftadd/errors.hpp"

namespace shiftadd {
namespace {

constexpr char kTensorMagic[4] = {'S', 'A', 'T', 'N'};
constexpr std::uint8_t kTensorVersion = 1;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(in[at + b]) << (8 * b);
  return v;
}

}  // namespace

std::size_t TensorFile::element_count() const noexcept {
  std::size_t n = dims.empty() ? 0 : 1;
  for (auto d : dims) n *= d;
  return n;
}

void write_tensor(const std::filesystem::path& path, const TensorFile& t) {
  const std::size_t n = t.element_count();
  const std::size_t have = t.dtype == DType::kInt16 ? t.i16.size() : t.f32.size();
  if (have != n) {
    throw DatasetError("tensor_io", "tensor payload has " + std::to_string(have) +
                                        " values, dims imply " + std::to_string(n));
  }
  std::vector<std::uint8_t> out(std::begin(kTensorMagic), std::end(kTensorMagic));
  out.push_back(kTensorVersion);
  out.push_back(static_cast<std::uint8_t>(t.dtype));
  put_u16(out, static_cast<std::uint16_t>(t.dims.size()));
  for (auto d : t.dims) put_u32(out, d);
  if (t.dtype == DType::kInt16) {
    for (auto v : t.i16) put_u16(out, static_cast<std::uint16_t>(v));
  } else {
    for (auto v : t.f32) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("tensor_io", "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("tensor_io", "short write to " + path.string());
}

TensorFile read_tensor(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("tensor_io", "cannot open " + path.string());
  std::vector<std::uint8_t> in((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
  if (in.size() < 8 || std::memcmp(in.data(), kTensorMagic, 4) != 0) {
    throw DatasetError("tensor_io", path.string() + ": missing SATN magic");
  }
  if (in[4] != kTensorVersion) {
    throw DatasetError("tensor_io", path.string() + ": unsupported version");
  }
  TensorFile t;
  if (in[5] > 1) throw DatasetError("tensor_io", path.string() + ": unknown dtype");
  t.dtype = static_cast<DType>(in[5]);
  const std::size_t ndim = static_cast<std::size_t>(in[6]) | (static_cast<std::size_t>(in[7]) << 8);
  std::size_t at = 8;
  if (in.size() < at + 4 * ndim) {
    throw DatasetError("tensor_io", path.string() + ": truncated dims");
  }
  for (std::size_t i = 0; i < ndim; ++i, at += 4) t.dims.push_back(get_u32(in, at));
  const std::size_t n = t.element_count();
  const std::size_t width = t.dtype == DType::kInt16 ? 2 : 4;
  if (in.size() - at != n * width) {
    throw DatasetError("tensor_io", path.string() + ": payload is " +
                                        std::to_string(in.size() - at) +
                                        " bytes, dims imply " +
                                        std::to_string(n * width));
  }
  if (t.dtype == DType::kInt16) {
    t.i16.resize(n);
    for (std::size_t i = 0; i < n; ++i, at += 2) {
      t.i16[i] = static_cast<std::int16_t>(in[at] | (in[at + 1] << 8));
    }
  } else {
    t.f32.resize(n);
    for (std::size_t i = 0; i < n; ++i, at += 4) {
      t.f32[i] = std::bit_cast<float>(get_u32(in, at));
    }
  }
  return t;
}

std::vector<int> read_labels(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("tensor_io", "cannot open " + path.string());
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream is(line);
    int v = 0;
    std::string rest;
    if (!(is >> v) || (is >> rest) || v < 0) {
      throw DatasetError("tensor_io", path.string() + ":" + std::to_string(lineno) +
                                          ": expected one non-negative integer");
    }
    labels.push_back(v);
  }
  return labels;
}

void write_labels(const std::filesystem::path& path, std::span<const int> labels) {
  std::ofstream f(path);
  if (!f) throw IoError("tensor_io", "cannot write " + path.string());
  for (int l : labels) f << l << '\n';
}

Dataset dataset_from_tensor(const TensorFile& t) {
  if (t.dims.size() != 3 && t.dims.size() != 4) {
    throw DatasetError("tensor_io", "frame batch must be 3-D or 4-D");
  }
  Dataset ds;
  ds.count = t.dims[0];
  ds.frame_shape = Shape3{static_cast<int>(t.dims[1]), static_cast<int>(t.dims[2]),
                          t.dims.size() == 4 ? static_cast<int>(t.dims[3]) : 1};
  const std::size_t n = t.element_count();
  ds.values.resize(n);
  if (t.dtype == DType::kInt16) {
    for (std::size_t i = 0; i < n; ++i) {
      ds.values[i] = std::ldexp(static_cast<float>(t.i16[i]), -kSampleFracBits);
    }
  } else {
    ds.values = t.f32;
  }
  return ds;
}

TensorFile int16_tensor(std::span<const std::int16_t> samples, std::size_t frames,
                        Shape3 frame_shape) {
  if (samples.size() != frames * frame_shape.size()) {
    throw DatasetError("tensor_io", "sample count does not match frames x shape");
  }
  TensorFile t;
  t.dtype = DType::kInt16;
  t.dims = {static_cast<std::uint32_t>(frames), static_cast<std::uint32_t>(frame_shape.rows),
            static_cast<std::uint32_t>(frame_shape.cols)};
  if (frame_shape.channels != 1) t.dims.push_back(static_cast<std::uint32_t>(frame_shape.channels));
  t.i16.assign(samples.begin(), samples.end());
  return t;
}

Dataset load_dataset(const std::filesystem::path& frames_path,
                     const std::filesystem::path& labels_path) {
  Dataset ds = dataset_from_tensor(read_tensor(frames_path));
  if (!labels_path.empty()) {
    ds.labels = read_labels(labels_path);
    if (ds.labels.size() != ds.count) {
      throw DatasetError("tensor_io", "label file has " +
                                          std::to_string(ds.labels.size()) +
                                          " labels for " + std::to_string(ds.count) +
                                          " frames");
    }
  }
  return ds;
}

}  // namespace shiftadd
