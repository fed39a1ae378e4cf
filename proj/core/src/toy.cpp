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

#include "shiftadd/toy.hpp"

#include <algorithm>
#include <cmath>

#include "rng.hpp"
#include "shiftadd/emulator.hpp"
#include "shiftadd/ingest.hpp"

namespace shiftadd {

namespace {

std::vector<LayerSpec> toy_layers(int classes) {
  std::vector<LayerSpec> L;
  auto block = [&L](int in, int out, int kh, int kw, int ph, int pw) {
    L.push_back(conv2d(in, out, kh, kw, ph, pw));
    L.push_back(batch_norm(out));
    L.push_back(relu());
  };
  block(1, 4, 5, 3, 2, 1);
  block(4, 4, 3, 3, 1, 1);
  L.push_back(max_pool(2, 1, 2, 1));
  block(4, 6, 3, 3, 1, 1);
  block(6, 6, 3, 3, 1, 1);
  L.push_back(max_pool(2, 1, 2, 1));
  block(6, 8, 3, 3, 1, 1);
  block(8, 8, 3, 3, 1, 1);
  block(8, 8, 3, 3, 1, 1);
  L.push_back(max_pool(2, 1, 2, 1));
  block(8, 8, 3, 3, 1, 1);
  block(8, 8, 3, 3, 1, 1);
  block(8, 8, 3, 3, 1, 1);
  L.push_back(max_pool(2, 2, 2, 2));
  block(8, 8, 3, 3, 1, 1);
  block(8, 8, 3, 3, 1, 1);
  block(8, 8, 3, 3, 1, 1);
  L.push_back(max_pool(2, 1, 2, 1));
  block(8, 8, 3, 3, 1, 1);
  block(8, 8, 3, 3, 1, 1);
  L.push_back(global_avg_pool());
  L.push_back(dense(8, classes));
  L.push_back(softmax());
  for (std::size_t i = 0, conv = 0; i < L.size(); ++i) {
    if (L[i].kind == LayerKind::kConv2D) L[i].name = "conv" + std::to_string(++conv);
  }
  L[L.size() - 2].name = "fc";
  return L;
}


// Multinomial logistic regression on standardized features, folded back into
// raw-feature weights and rescaled so the largest weight magnitude is 2.
void fit_head(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
              int classes, LayerParams& p) {
  const std::size_t n = x.size();
  const std::size_t d = x.front().size();
  const auto k = static_cast<std::size_t>(classes);
  std::vector<double> mu(d, 0.0), sd(d, 0.0);
  for (const auto& r : x) {
    for (std::size_t j = 0; j < d; ++j) mu[j] += r[j];
  }
  for (auto& v : mu) v /= static_cast<double>(n);
  for (const auto& r : x) {
    for (std::size_t j = 0; j < d; ++j) sd[j] += (r[j] - mu[j]) * (r[j] - mu[j]);
  }
  for (auto& v : sd) v = std::sqrt(v / static_cast<double>(n)) + 1e-6;

  std::vector<double> w(k * d, 0.0), b(k, 0.0), gw(k * d), gb(k), z(k);
  constexpr double kRate = 0.5;
  constexpr double kDecay = 1e-3;
  for (int it = 0; it < 3000; ++it) {
    std::fill(gw.begin(), gw.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double zmax = -1e300;
      for (std::size_t c = 0; c < k; ++c) {
        z[c] = b[c];
        for (std::size_t j = 0; j < d; ++j) z[c] += w[c * d + j] * (x[i][j] - mu[j]) / sd[j];
        zmax = std::max(zmax, z[c]);
      }
      double total = 0.0;
      for (auto& v : z) total += (v = std::exp(v - zmax));
      for (std::size_t c = 0; c < k; ++c) {
        const double g = z[c] / total - (static_cast<std::size_t>(y[i]) == c ? 1.0 : 0.0);
        gb[c] += g;
        for (std::size_t j = 0; j < d; ++j) gw[c * d + j] += g * (x[i][j] - mu[j]) / sd[j];
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      b[c] -= kRate * gb[c] / static_cast<double>(n);
      for (std::size_t j = 0; j < d; ++j) {
        auto& v = w[c * d + j];
        v -= kRate * (gw[c * d + j] / static_cast<double>(n) + kDecay * v);
      }
    }
  }

  p.weights.assign(k * d, 0.0);
  p.bias.assign(k, 0.0);
  double peak = 1e-12;
  for (std::size_t c = 0; c < k; ++c) {
    p.bias[c] = b[c];
    for (std::size_t j = 0; j < d; ++j) {
      p.weights[c * d + j] = w[c * d + j] / sd[j];
      p.bias[c] -= w[c * d + j] * mu[j] / sd[j];
      peak = std::max(peak, std::abs(p.weights[c * d + j]));
    }
  }
  const double scale = 2.0 / peak;
  for (auto& v : p.weights) v *= scale;
  for (auto& v : p.bias) v *= scale;
}

}  // namespace

NetworkModel make_toy_model(const ToyConfig& config) {
  constexpr int kClasses = 3;
  constexpr double kFoldedWeightLimit = 4.0;
  constexpr double kMix = 0.4;
  NetworkModel m;
  m.input_shape = Shape3{config.rows, config.channels, 1};
  m.layers = toy_layers(kClasses);
  m.params.resize(m.layers.size());

  detail::Rng rng(config.seed);
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const LayerSpec& l = m.layers[i];
    if (l.kind != LayerKind::kConv2D) continue;
    auto& w = m.params[i].weights;
    w.resize(l.weight_count());
    const double sd = std::sqrt(2.0 / static_cast<double>(l.fan_in()));
    for (auto& v : w) v = sd * rng.normal();
    if (l.in_channels > 1) {
      // Identity-dominant kernels keep per-frame energy visible to the head.
      const auto kh = static_cast<std::size_t>(l.kernel_h);
      const auto kw = static_cast<std::size_t>(l.kernel_w);
      const auto in = static_cast<std::size_t>(l.in_channels);
      for (std::size_t o = 0; o < static_cast<std::size_t>(l.out_channels); ++o) {
        for (std::size_t q = 0; q < in * kh * kw; ++q) w[o * in * kh * kw + q] *= kMix;
        const std::size_t c = o % in;
        w[((o * in + c) * kh + kh / 2) * kw + kw / 2] += 1.0;
      }
    }
    if (l.in_channels == 1) {
      // Smoothed first and second differences in both polarities.
      const double d1[5] = {-1, -2, 0, 2, 1};
      const double d2[5] = {1, 0, -2, 0, 1};
      const double col[3] = {0.5, 1.0, 0.5};
      for (std::size_t o = 0; o < 4; ++o) {
        for (std::size_t r = 0; r < 5; ++r) for (std::size_t c = 0; c < 3; ++c)
          w[o * 15 + r * 3 + c] = (o % 2 ? -1.0 : 1.0) * (o < 2 ? d1[r] : d2[r]) * col[c];
      }
    }
    m.params[i].bias.assign(l.bias_count(), 0.0);
  }

  SynthConfig sc;
  sc.class_count = kClasses;
  sc.frames_per_class = config.calibration_frames_per_class;
  sc.seed = config.seed ^ 0x9E3779B97F4A7C15ULL;
  sc.rows = config.rows;
  sc.channels = config.channels;
  const Dataset calib = to_dataset(synth_dataset(sc));

  const std::size_t n = calib.count;
  std::vector<std::vector<double>> acts(n);
  for (std::size_t f = 0; f < n; ++f) {
    const auto frame = calib.frame(f);
    acts[f].assign(frame.begin(), frame.end());
  }
  Shape3 shape = m.input_shape;
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    LayerSpec& l = m.layers[i];
    LayerParams& p = m.params[i];
    if (l.kind == LayerKind::kBatchNorm) {
      const auto c = static_cast<std::size_t>(l.channels);
      std::vector<double> sum(c, 0.0), sq(c, 0.0);
      std::size_t count = 0;
      for (const auto& a : acts) {
        for (std::size_t j = 0; j < a.size(); ++j) {
          sum[j % c] += a[j];
          sq[j % c] += a[j] * a[j];
        }
        count += a.size() / c;
      }
      p.gamma.assign(c, 1.0);
      p.beta.assign(c, 0.0);
      p.mean.resize(c);
      p.variance.resize(c);
      const auto& w = m.params[i - 1].weights;
      const std::size_t per_out = w.size() / c;
      for (std::size_t j = 0; j < c; ++j) {
        p.mean[j] = sum[j] / static_cast<double>(count);
        p.variance[j] = std::max(sq[j] / static_cast<double>(count) - p.mean[j] * p.mean[j], 1e-6);
        // Keep folded weights well inside the default weight format.
        double peak = 1e-12;
        for (std::size_t q = 0; q < per_out; ++q) peak = std::max(peak, std::abs(w[j * per_out + q]));
        const double sd = std::sqrt(p.variance[j] + l.epsilon);
        p.gamma[j] = std::min(1.0, kFoldedWeightLimit * sd / peak);
      }
    } else if (l.kind == LayerKind::kDense) {
      fit_head(acts, calib.labels, kClasses, p);
    }
    for (auto& a : acts) a = layer_forward_float(a, shape, l, p);
    shape = output_shape(l, shape, i);
  }
  m.validate();
  return m;
}

}  // namespace shiftadd
