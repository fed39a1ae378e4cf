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

// Multiplier-free layer kernels. Templated on the activation scalar so tests
// can instantiate them with an instrumented type; the only operations applied
// to activation data are value-initialisation, +, - and <<.

#include <cstddef>
#include <span>
#include <vector>

#include "shiftadd/netgraph.hpp"
#include "shiftadd/sptcodec.hpp"

namespace shiftadd {

// One shift layer: slot k of every weight of a parametric layer.
struct ShiftStage {
  int slot_index = 0;
  std::vector<PackedRecord> records;  // one per weight, NOP when unused
};

enum class AddOrder { kTree, kChain };

namespace kernel {

// Sums partial[0..n) pairwise (tree) or left to right (chain).
template <class T>
T reduce(std::span<T> partial, AddOrder order) {
  if (partial.empty()) return T{};
  if (order == AddOrder::kChain) {
    T acc = partial[0];
    for (std::size_t i = 1; i < partial.size(); ++i) acc = acc + partial[i];
    return acc;
  }
  std::size_t n = partial.size();
  while (n > 1) {
    const std::size_t half = n / 2;
    for (std::size_t i = 0; i < half; ++i) {
      partial[i] = partial[2 * i] + partial[2 * i + 1];
    }
    if (n % 2 == 1) partial[half] = partial[n - 1];
    n = half + n % 2;
  }
  return partial[0];
}

// acc +/- (x << shift) for a live record; NOP contributes nothing.
template <class T>
inline void accumulate(T& acc, const T& x, PackedRecord rec) {
  if (rec.is_nop()) return;
  const SptTerm t = rec.term();
  const T shifted = x << t.shift;
  acc = t.sign < 0 ? acc - shifted : acc + shifted;
}

}  // namespace kernel

// Shift-add evaluation of a Conv2D or Dense layer. `input` is HWC with shape
// `in`; `out` receives the raw accumulators (before requantisation), HWC.
// Each shift stage k produces per-neuron partial sums; the element-wise add
// stages combine them in `order` and the global add contributes the bias.
template <class T>
void shiftadd_layer(std::span<const T> input, Shape3 in, const LayerSpec& layer,
                    std::span<const ShiftStage> stages, std::span<const T> bias,
                    std::span<T> out, AddOrder order = AddOrder::kTree) {
  const std::size_t slots = stages.size();
  std::vector<T> partial(slots);
  if (layer.kind == LayerKind::kDense) {
    const auto n_in = static_cast<std::size_t>(layer.in_features);
    for (std::size_t o = 0; o < static_cast<std::size_t>(layer.out_features); ++o) {
      for (auto& p : partial) p = T{};
      const std::size_t base = o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) {
        for (std::size_t k = 0; k < slots; ++k) {
          kernel::accumulate(partial[k], input[i], stages[k].records[base + i]);
        }
      }
      out[o] = kernel::reduce(std::span<T>(partial), order) + bias[o];
    }
    return;
  }
  const int out_rows = (in.rows + 2 * layer.pad_h - layer.kernel_h) / layer.stride_h + 1;
  const int out_cols = (in.cols + 2 * layer.pad_w - layer.kernel_w) / layer.stride_w + 1;
  const int oc_n = layer.out_channels;
  const int ic_n = layer.in_channels;

  // Live (non-NOP) records per output channel, decoded once per call and
  // split by sign so the inner loops do not branch on it.
  struct Live {
    int ky, kx, ic, slot, shift;
  };
  std::vector<std::vector<Live>> plus(static_cast<std::size_t>(oc_n));
  std::vector<std::vector<Live>> minus(static_cast<std::size_t>(oc_n));
  for (int oc = 0; oc < oc_n; ++oc) {
    for (int ic = 0; ic < ic_n; ++ic) {
      for (int ky = 0; ky < layer.kernel_h; ++ky) {
        for (int kx = 0; kx < layer.kernel_w; ++kx) {
          const std::size_t wi =
              ((static_cast<std::size_t>(oc) * ic_n + ic) * layer.kernel_h + ky) * layer.kernel_w + kx;
          for (std::size_t k = 0; k < slots; ++k) {
            const PackedRecord rec = stages[k].records[wi];
            if (rec.is_nop()) continue;
            const SptTerm t = rec.term();
            (t.sign < 0 ? minus : plus)[static_cast<std::size_t>(oc)].push_back(
                {ky, kx, ic, static_cast<int>(k), t.shift});
          }
        }
      }
    }
  }

  for (int r = 0; r < out_rows; ++r) {
    const int y0 = r * layer.stride_h - layer.pad_h;
    for (int c = 0; c < out_cols; ++c) {
      const int x0 = c * layer.stride_w - layer.pad_w;
      for (int oc = 0; oc < oc_n; ++oc) {
        for (auto& p : partial) p = T{};
        const bool interior = y0 >= 0 && x0 >= 0 && y0 + layer.kernel_h <= in.rows &&
                              x0 + layer.kernel_w <= in.cols;
        auto at = [&](const Live& t, bool& inside) -> const T& {
          const int y = y0 + t.ky;
          const int x = x0 + t.kx;
          inside = interior || (y >= 0 && y < in.rows && x >= 0 && x < in.cols);
          return input[inside ? (static_cast<std::size_t>(y) * in.cols + x) * ic_n + t.ic : 0];
        };
        bool inside = false;
        for (const Live& t : plus[static_cast<std::size_t>(oc)]) {
          const T& value = at(t, inside);
          if (!inside) continue;
          T& acc = partial[static_cast<std::size_t>(t.slot)];
          acc = acc + (value << t.shift);
        }
        for (const Live& t : minus[static_cast<std::size_t>(oc)]) {
          const T& value = at(t, inside);
          if (!inside) continue;
          T& acc = partial[static_cast<std::size_t>(t.slot)];
          acc = acc - (value << t.shift);
        }
        out[(static_cast<std::size_t>(r) * out_cols + c) * oc_n + oc] =
            kernel::reduce(std::span<T>(partial), order) + bias[oc];
      }
    }
  }
}

}  // namespace shiftadd
