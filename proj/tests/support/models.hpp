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

// Small constructed models and datasets for search and emulator tests.

#include <cstdint>

#include "shiftadd/netgraph.hpp"
#include "shiftadd/tensor_io.hpp"

namespace shiftadd::testing {

inline constexpr Shape3 kSmallInput{8, 4, 1};

// conv 1->3 3x3, relu, conv 3->3 3x3, relu, global avg pool, dense 3->3.
// Every weight is exactly representable in 16:12 and needs exactly two CSD
// terms. The dense rows are identical at one term (all ties, label 0) and
// pick the largest pooled feature at two. With `plant_pow2_layer`, the second
// conv holds only powers of two.
NetworkModel two_term_model(std::uint64_t seed, bool plant_pow2_layer = false);

// Frames with values on the 2^-10 grid in [-1, 1).
Dataset random_frames(Shape3 shape, std::size_t count, std::uint64_t seed);

}  // namespace shiftadd::testing
