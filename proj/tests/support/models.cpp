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

#include "models.hpp"

#include <cmath>

#include "gen.hpp"

namespace shiftadd::testing {

namespace {

double two_term_weight(Gen& g) {
  const int a = static_cast<int>(g.int_in(9, 12));
  const int b = a - static_cast<int>(g.int_in(2, 5));
  const std::int64_t raw = (std::int64_t{1} << a) + (g.coin() ? 1 : -1) * (std::int64_t{1} << b);
  return std::ldexp(static_cast<double>(g.coin() ? raw : -raw), -12);
}

double pow2_weight(Gen& g) {
  const int a = static_cast<int>(g.int_in(8, 12));
  return std::ldexp(g.coin() ? 1.0 : -1.0, a - 12);
}

}  // namespace

NetworkModel two_term_model(std::uint64_t seed, bool plant_pow2_layer) {
  Gen g(seed);
  NetworkModel m;
  m.input_shape = kSmallInput;
  m.layers = {conv2d(1, 3, 3, 3, 1, 1), relu(), conv2d(3, 3, 3, 3, 1, 1), relu(),
              global_avg_pool(), dense(3, 3)};
  m.params.resize(m.layers.size());
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const auto& l = m.layers[i];
    if (l.kind != LayerKind::kConv2D && l.kind != LayerKind::kDense) continue;
    auto& p = m.params[i];
    p.weights.resize(l.weight_count());
    p.bias.resize(l.bias_count());
    if (l.kind == LayerKind::kDense) {
      // 0.5 +/- 0.0625: every row collapses to 0.5 at one term, so only the
      // second term tells the classes apart.
      for (int o = 0; o < l.out_features; ++o) {
        for (int j = 0; j < l.in_features; ++j) {
          p.weights[static_cast<std::size_t>(o * l.in_features + j)] = o == j ? 0.5625 : 0.4375;
        }
      }
      continue;
    }
    const bool pow2 = plant_pow2_layer && i == 2;
    for (auto& w : p.weights) w = pow2 ? pow2_weight(g) : two_term_weight(g);
    for (auto& b : p.bias) b = std::ldexp(static_cast<double>(g.int_in(-64, 64)), -10);
  }
  m.validate();
  return m;
}

Dataset random_frames(Shape3 shape, std::size_t count, std::uint64_t seed) {
  Gen g(seed);
  Dataset d;
  d.frame_shape = shape;
  d.count = count;
  d.values.resize(count * shape.size());
  for (auto& v : d.values) v = std::ldexp(static_cast<float>(g.int_in(-1024, 1023)), -10);
  return d;
}

}  // namespace shiftadd::testing
