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

#include "shiftadd/archive.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "json_codec.hpp"
#include "shiftadd/errors.hpp"

namespace shiftadd {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<std::uint8_t> serialize_archive(const CompressedModel& cm) {
  ordered_json header;
  header["input_shape"] = detail::shape_to_json(cm.input_shape);
  ordered_json layers = ordered_json::array();
  for (const auto& l : cm.layers) layers.push_back(detail::layer_to_json(l));
  header["layers"] = std::move(layers);
  header["plan"] = detail::plan_to_json(cm.plan);
  ordered_json streams = ordered_json::array();
  for (const auto& c : cm.compressed) {
    ordered_json s;
    s["layer_index"] = c.layer_index;
    s["weight_count"] = c.weight_count;
    s["slots"] = c.slots;
    s["bit_count"] = c.stream.bit_count;
    s["byte_count"] = c.stream.bytes.size();
    s["bias"] = c.bias;
    streams.push_back(std::move(s));
  }
  header["streams"] = std::move(streams);
  const std::string text = header.dump();

  std::vector<std::uint8_t> out;
  out.insert(out.end(), std::begin(kArchiveMagic), std::end(kArchiveMagic));
  out.push_back(kArchiveVersion);
  const auto len = static_cast<std::uint32_t>(text.size());
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(len >> (8 * b)));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& c : cm.compressed) {
    out.insert(out.end(), c.stream.bytes.begin(), c.stream.bytes.end());
  }
  return out;
}

CompressedModel deserialize_archive(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kPrefix = 4 + 1 + 4;
  if (bytes.size() < kPrefix ||
      std::memcmp(bytes.data(), kArchiveMagic, sizeof(kArchiveMagic)) != 0) {
    throw FormatError("archive", "missing SAFM magic");
  }
  if (bytes[4] != kArchiveVersion) {
    throw FormatError("archive", "unsupported archive version " +
                                     std::to_string(bytes[4]));
  }
  std::uint32_t len = 0;
  for (int b = 0; b < 4; ++b) len |= static_cast<std::uint32_t>(bytes[5 + b]) << (8 * b);
  if (bytes.size() < kPrefix + len) {
    throw FormatError("archive", "truncated header");
  }
  CompressedModel cm;
  std::size_t offset = kPrefix + len;
  try {
    const json header = json::parse(bytes.begin() + kPrefix,
                                    bytes.begin() + static_cast<std::ptrdiff_t>(kPrefix + len));
    cm.input_shape = detail::shape_from_json(header.at("input_shape"));
    const auto& layers = header.at("layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      cm.layers.push_back(detail::layer_from_json(layers.at(i), i));
    }
    infer_shapes(cm.layers, cm.input_shape);
    cm.plan = detail::plan_from_json(header.at("plan"));

    std::vector<std::size_t> parametric;
    for (std::size_t i = 0; i < cm.layers.size(); ++i) {
      if (cm.layers[i].is_parametric()) parametric.push_back(i);
    }
    validate_plan(cm.plan, parametric.size());
    const auto& streams = header.at("streams");
    if (streams.size() != parametric.size()) {
      throw FormatError("archive", "stream table does not match parametric layers");
    }
    for (std::size_t k = 0; k < streams.size(); ++k) {
      const auto& s = streams.at(k);
      CompressedLayer c;
      c.layer_index = s.at("layer_index").get<std::size_t>();
      c.weight_count = s.at("weight_count").get<std::size_t>();
      c.slots = s.at("slots").get<int>();
      c.stream.bit_count = s.at("bit_count").get<std::size_t>();
      const auto byte_count = s.at("byte_count").get<std::size_t>();
      c.bias = s.at("bias").get<std::vector<std::int64_t>>();
      const auto& spec = cm.layers.at(parametric[k]);
      if (c.layer_index != parametric[k] || c.weight_count != spec.weight_count() ||
          c.slots != cm.plan.terms[k] || c.bias.size() != spec.bias_count() ||
          c.stream.bit_count != c.weight_count * static_cast<std::size_t>(c.slots) * 6 ||
          byte_count != (c.stream.bit_count + 7) / 8) {
        throw FormatError("archive", "stream " + std::to_string(k) +
                                         " header inconsistent with layer " +
                                         std::to_string(parametric[k]));
      }
      if (offset + byte_count > bytes.size()) {
        throw FormatError("archive", "stream " + std::to_string(k) + " truncated");
      }
      c.stream.bytes.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                            bytes.begin() + static_cast<std::ptrdiff_t>(offset + byte_count));
      offset += byte_count;
      cm.compressed.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw FormatError("archive", std::string("header: ") + e.what());
  }
  if (offset != bytes.size()) {
    throw FormatError("archive", std::to_string(bytes.size() - offset) +
                                     " trailing bytes");
  }
  return cm;
}

void save_archive(const CompressedModel& cm, const std::filesystem::path& path) {
  const auto bytes = serialize_archive(cm);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("archive", "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("archive", "short write to " + path.string());
}

CompressedModel load_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("archive", "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_archive(bytes);
}

}  // namespace shiftadd
