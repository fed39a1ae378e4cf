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

// Compressed-model container: "SAFM", a version byte, a length-prefixed JSON
// header (graph, plan, per-layer stream table and raw biases) and the
// concatenated per-layer record streams.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "shiftadd/netgraph.hpp"

namespace shiftadd {

inline constexpr char kArchiveMagic[4] = {'S', 'A', 'F', 'M'};
inline constexpr std::uint8_t kArchiveVersion = 1;

std::vector<std::uint8_t> serialize_archive(const CompressedModel& cm);
// Throws FormatError on bad magic, unsupported version, or any inconsistency
// between the header and the streams.
CompressedModel deserialize_archive(std::span<const std::uint8_t> bytes);

void save_archive(const CompressedModel& cm, const std::filesystem::path& path);
CompressedModel load_archive(const std::filesystem::path& path);

}  // namespace shiftadd
