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

// Small seeded 1-D event classifier used for demos, tests and benchmarks.

#include <cstdint>

#include "shiftadd/netgraph.hpp"

namespace shiftadd {

struct ToyConfig {
  std::uint64_t seed = 1;
  std::size_t calibration_frames_per_class = 100;
  int rows = 256;
  int channels = 11;
};

// 15 Conv2D + 1 Dense with batch norm, pooling and a softmax head. Batch-norm
// statistics and the dense head are fitted on a synthetic calibration set
// drawn with a seed derived from config.seed.
NetworkModel make_toy_model(const ToyConfig& config = {});

}  // namespace shiftadd
