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

// JSON mapping for IR types shared by the model manifest and the archive.

#include <nlohmann/json.hpp>

#include "shiftadd/netgraph.hpp"

namespace shiftadd::detail {

nlohmann::ordered_json layer_to_json(const LayerSpec& layer);
LayerSpec layer_from_json(const nlohmann::json& j, std::size_t index);

nlohmann::ordered_json shape_to_json(const Shape3& shape);
Shape3 shape_from_json(const nlohmann::json& j);

nlohmann::ordered_json format_to_json(const FixedPointFormat& fmt);
FixedPointFormat format_from_json(const nlohmann::json& j);

nlohmann::ordered_json plan_to_json(const CompressionPlan& plan);
CompressionPlan plan_from_json(const nlohmann::json& j);

}  // namespace shiftadd::detail
