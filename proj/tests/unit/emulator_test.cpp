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

#include <cmath>
#include <cstdio>

#include <gtest/gtest.h>

#include "gen.hpp"
#include "models.hpp"
#include "oracles.hpp"
#include "shiftadd/emulator.hpp"
#include "shiftadd/errors.hpp"
#include "shiftadd/ingest.hpp"
#include "shiftadd/parallel.hpp"
#include "shiftadd/shiftadd_kernel.hpp"

namespace shiftadd {
namespace {

using testing::CountedInt;
using testing::Gen;

LayerParams params_of(std::vector<double> w, std::vector<double> b) {
  LayerParams p;
  p.weights = std::move(w);
  p.bias = std::move(b);
  return p;
}

NetworkModel toy() {
  static const NetworkModel m = fold_batchnorm(
      load_model(std::filesystem::path(SHIFTADD_ASSETS_DIR) / "toy" / "model.json"));
  return m;
}

Dataset toy_frames(std::size_t per_class, std::uint64_t seed) {
  SynthConfig c;
  c.frames_per_class = per_class;
  c.seed = seed;
  return to_dataset(synth_dataset(c));
}

// One layer's worth of random compressed data.
struct Case {
  LayerSpec layer;
  Shape3 in;
  FixedPointFormat wf;
  int slots = 1;
  std::vector<std::int64_t> input;
  std::vector<std::int64_t> bias;
  std::vector<std::int64_t> reconstructed;
  CompressedLayer compressed;
};

Case random_case(Gen& g) {
  Case c;
  c.layer = g.layer(c.in);
  c.wf = g.format(2, 20);
  const FixedPointFormat af = g.format(2, 20);
  c.slots = static_cast<int>(g.int_in(1, c.wf.max_terms()));
  c.input = g.raws(c.in.size(), af);
  c.bias = g.raws(c.layer.bias_count(), FixedPointFormat(30, 0));
  std::vector<SptWeight> w;
  for (std::size_t i = 0; i < c.layer.weight_count(); ++i) {
    // Bias towards sparse and extreme patterns now and then.
    std::int64_t q = g.int_in(c.wf.raw_min(), c.wf.raw_max());
    if (g.int_in(0, 9) == 0) q = g.coin() ? c.wf.raw_min() : 0;
    w.push_back(decompose(q, c.wf, c.slots));
    c.reconstructed.push_back(reconstruct(w.back()));
  }
  c.compressed.weight_count = w.size();
  c.compressed.slots = c.slots;
  c.compressed.stream = pack_records(w, c.slots);
  c.compressed.bias = c.bias;
  return c;
}

TEST(FloatConv, Examples) {
  const auto l = conv2d(1, 1, 1, 1);
  EXPECT_EQ(conv_forward_float(std::vector<double>{3}, {1, 1, 1}, l, params_of({2}, {0})),
            std::vector<double>{6});
  std::vector<double> x(12);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i) - 4.5;
  std::vector<double> ident(9, 0.0);
  ident[4] = 1;
  EXPECT_EQ(conv_forward_float(x, {4, 3, 1}, conv2d(1, 1, 3, 3, 1, 1), params_of(ident, {0})), x);
}

TEST(FloatConv, MatchesNaiveOracle) {
  Gen g(3);
  for (int t = 0; t < 50; ++t) {
    Shape3 in{5, 5, 2};
    const auto l = conv2d(2, 3, 3, 3, static_cast<int>(g.int_in(0, 1)), static_cast<int>(g.int_in(0, 1)),
                          static_cast<int>(g.int_in(1, 2)), 1);
    std::vector<double> x(in.size()), w(l.weight_count()), b(3);
    for (auto& v : x) v = g.real_in(-2, 2);
    for (auto& v : w) v = g.real_in(-2, 2);
    for (auto& v : b) v = g.real_in(-2, 2);
    const auto got = conv_forward_float(x, in, l, params_of(w, b));
    const auto want = testing::naive_conv_float(x, in, l, w, b);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) ASSERT_NEAR(got[i], want[i], 1e-6);
  }
}

TEST(IntConv, Examples) {
  const auto l = conv2d(1, 2, 3, 3, 1, 1);
  const std::vector<std::int64_t> zero(12, 0), w(18, 7), b{5, -9};
  const auto out = conv_forward_int(zero, {3, 4, 1}, l, w, b);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], b[i % 2]);
  EXPECT_EQ(conv_forward_int(std::vector<std::int64_t>{3}, {1, 1, 1}, conv2d(1, 1, 1, 1),
                             std::vector<std::int64_t>{2}, std::vector<std::int64_t>{0}),
            std::vector<std::int64_t>{6});
}

TEST(IntConv, MatchesWideOracle) {
  Gen g(4);
  for (int t = 0; t < 300; ++t) {
    Shape3 in;
    const auto l = g.layer(in);
    const FixedPointFormat wf = g.format(2, 24), af = g.format(2, 24);
    const auto x = g.raws(in.size(), af);
    const auto w = g.raws(l.weight_count(), wf);
    const auto b = g.raws(l.bias_count(), FixedPointFormat(32, 0));
    const auto got = conv_forward_int(x, in, l, w, b);
    const auto want = testing::naive_conv_int(x, in, l, w, b);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) ASSERT_TRUE(static_cast<__int128>(got[i]) == want[i]);
  }
}

TEST(ShiftAdd, AllNopGivesBias) {
  const auto l = conv2d(2, 2, 3, 1, 1, 0);
  std::vector<ShiftStage> stages(2);
  for (int k = 0; k < 2; ++k) {
    stages[k].slot_index = k;
    stages[k].records.assign(l.weight_count(), PackedRecord::nop());
  }
  const std::vector<std::int64_t> x(10, 123), b{-4, 17};
  const auto out = shiftadd_forward(x, {5, 1, 2}, l, stages, b);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], b[i % 2]);
}

TEST(ShiftAdd, OneByOneExample) {
  const FixedPointFormat f(8, 0);
  const std::vector<SptWeight> w{decompose(117, f, 4)};
  CompressedLayer c;
  c.weight_count = 1;
  c.slots = 4;
  c.stream = pack_records(w, 4);
  const auto out = shiftadd_forward(std::vector<std::int64_t>{3}, {1, 1, 1}, conv2d(1, 1, 1, 1),
                                    decode_stages(c), std::vector<std::int64_t>{0});
  EXPECT_EQ(out, std::vector<std::int64_t>{351});
}

TEST(ShiftAdd, EquivalentToIntConvOnReconstructedWeights) {
  Gen g(2024);
  std::size_t outputs = 0;
  for (int t = 0; t < 1000; ++t) {
    const Case c = random_case(g);
    const auto stages = decode_stages(c.compressed);
    const auto got = shiftadd_forward(c.input, c.in, c.layer, stages, c.bias);
    const auto ref = conv_forward_int(c.input, c.in, c.layer, c.reconstructed, c.bias);
    ASSERT_EQ(got, ref) << "case " << t;
    const auto wide = testing::naive_conv_int(c.input, c.in, c.layer, c.reconstructed, c.bias);
    for (std::size_t i = 0; i < got.size(); ++i) ASSERT_TRUE(static_cast<__int128>(got[i]) == wide[i]);
    outputs += got.size();
  }
  EXPECT_GT(outputs, 1000u);
}

TEST(ShiftAdd, ChainAndTreeAgree) {
  Gen g(55);
  for (int t = 0; t < 200; ++t) {
    const Case c = random_case(g);
    const auto stages = decode_stages(c.compressed);
    ASSERT_EQ(shiftadd_forward(c.input, c.in, c.layer, stages, c.bias, AddOrder::kTree),
              shiftadd_forward(c.input, c.in, c.layer, stages, c.bias, AddOrder::kChain));
  }
}

TEST(ShiftAdd, UsesOnlyShiftsAndAdds) {
  Gen g(99);
  for (int t = 0; t < 200; ++t) {
    const Case c = random_case(g);
    const auto stages = decode_stages(c.compressed);
    std::vector<CountedInt> x, b;
    for (auto v : c.input) x.push_back({v});
    for (auto v : c.bias) b.push_back({v});
    const Shape3 out_shape = output_shape(c.layer, c.in);
    std::vector<CountedInt> out(out_shape.size());
    CountedInt::tally() = {};
    shiftadd_layer<CountedInt>(x, c.in, c.layer, stages, b, out,
                               t % 2 == 0 ? AddOrder::kTree : AddOrder::kChain);
    const auto tally = CountedInt::tally();

    // Expected counts: one shift and one add or subtract per live term that
    // lands inside the input, plus slots adds per output for the reduction
    // and bias.
    std::int64_t live = 0, negative = 0;
    const auto ref = conv_forward_int(c.input, c.in, c.layer, c.reconstructed, c.bias);
    for (std::size_t i = 0; i < out.size(); ++i) ASSERT_EQ(out[i].v, ref[i]);
    const int oh = out_shape.rows, ow = out_shape.cols;
    for (int y = 0; y < oh; ++y)
      for (int xx = 0; xx < ow; ++xx)
        for (int o = 0; o < out_shape.channels; ++o) {
          for (std::size_t k = 0; k < stages.size(); ++k) {
            if (c.layer.kind == LayerKind::kDense) {
              for (int i = 0; i < c.layer.in_features; ++i) {
                const auto r = stages[k].records[static_cast<std::size_t>(o * c.layer.in_features + i)];
                if (r.is_nop()) continue;
                ++live;
                negative += r.term().sign < 0;
              }
              continue;
            }
            for (int i = 0; i < c.layer.in_channels; ++i)
              for (int ky = 0; ky < c.layer.kernel_h; ++ky)
                for (int kx = 0; kx < c.layer.kernel_w; ++kx) {
                  const int sy = y * c.layer.stride_h + ky - c.layer.pad_h;
                  const int sx = xx * c.layer.stride_w + kx - c.layer.pad_w;
                  if (sy < 0 || sx < 0 || sy >= c.in.rows || sx >= c.in.cols) continue;
                  const auto r = stages[k].records[static_cast<std::size_t>(
                      ((o * c.layer.in_channels + i) * c.layer.kernel_h + ky) * c.layer.kernel_w + kx)];
                  if (r.is_nop()) continue;
                  ++live;
                  negative += r.term().sign < 0;
                }
          }
        }
    const auto n_out = static_cast<std::int64_t>(out.size());
    ASSERT_EQ(tally.shifts, live);
    ASSERT_EQ(tally.subs, negative);
    ASSERT_EQ(tally.adds, live - negative + n_out * static_cast<std::int64_t>(stages.size()));
  }
}

TEST(ShiftAdd, RejectsMismatchedStages) {
  const auto l = conv2d(1, 1, 3, 3);
  std::vector<ShiftStage> stages(1);
  stages[0].records.assign(8, PackedRecord::nop());
  EXPECT_THROW(shiftadd_forward(std::vector<std::int64_t>(9), {3, 3, 1}, l, stages,
                                std::vector<std::int64_t>{0}),
               ShapeError);
  CompressedLayer c;
  c.weight_count = 4;
  c.slots = 2;
  c.stream.bit_count = 10;
  c.stream.bytes.assign(2, 0);
  EXPECT_THROW(decode_stages(c), FormatError);
}

TEST(Forward, ArgmaxTiesGoLow) {
  EXPECT_EQ(argmax(std::span<const int>(std::vector<int>{1, 5, 5, 2})), 1);
  EXPECT_EQ(argmax(std::span<const int>(std::vector<int>{})), -1);
}

TEST(Forward, ReluInAccumulatorDomainThenRequantize) {
  // conv 1x1, weight 1.5 (raw 6 at 8:2), activation 8:2; input 3.0 (raw 12)
  // accumulator 72 at 4 fractional bits = 4.5 -> raw 18; input -1 -> 0.
  NetworkModel m;
  m.input_shape = {2, 1, 1};
  m.layers = {conv2d(1, 1, 1, 1), relu(), conv2d(1, 1, 1, 1)};
  m.params = {params_of({1.5}, {0}), {}, params_of({1.0}, {0})};
  const QuantizedModel q = quantize_model(m, {8, 2}, {8, 2});
  const IntResult r = forward_int(q, std::vector<float>{3.0F, -1.0F});
  EXPECT_EQ(r.scores, (std::vector<std::int64_t>{18 * 4, 0}));
  EXPECT_EQ(r.score_frac_bits, 4);
  EXPECT_EQ(r.label, 0);
  // 15 * 3 saturates the 8:2 activation format at 31.75.
  m.params[0] = params_of({15.0}, {0});
  const IntResult s = forward_int(quantize_model(m, {8, 2}, {8, 2}), std::vector<float>{3.0F, -1.0F});
  EXPECT_EQ(s.scores[0], 127 * 4);
  EXPECT_EQ(s.saturations, 1u);
}

TEST(Forward, FullBudgetMatchesIntegerReference) {
  const NetworkModel m = toy();
  const CompressionPlan plan = CompressionPlan::uniform(m.parametric_layers().size(), 9);
  const CompressedModel cm = compress_model(m, plan);
  const QuantizedModel q = quantize_model(m, plan.weight_format, plan.activation_format);
  ASSERT_EQ(reconstructed_model(cm).parametric.size(), q.parametric.size());
  const ShiftAddEngine engine(cm);
  const Dataset frames = testing::random_frames(m.input_shape, 100, 17);
  std::vector<int> same(frames.count, 0);
  parallel_for(frames.count, 4, [&](std::size_t i) {
    same[i] = engine.forward(frames.frame(i)) == forward_int(q, frames.frame(i));
  });
  for (std::size_t i = 0; i < frames.count; ++i) EXPECT_TRUE(same[i]) << "frame " << i;
}

TEST(Forward, ZeroFrameFollowsBiases) {
  const NetworkModel m = toy();
  const std::vector<float> zero(m.input_shape.size(), 0.0F);
  const int want = forward_float(m, zero).label;
  const CompressionPlan plan = CompressionPlan::uniform(m.parametric_layers().size(), 2);
  EXPECT_EQ(forward(compress_model(m, plan), zero).label, want);
  EXPECT_EQ(forward_int(quantize_model(m, plan.weight_format, plan.activation_format), zero).label,
            want);
}

TEST(Forward, BatchOrderDoesNotMatter) {
  const NetworkModel m = testing::two_term_model(21);
  const CompressedModel cm = compress_model(m, CompressionPlan::uniform(3, 2));
  const ShiftAddEngine engine(cm);
  const Dataset frames = testing::random_frames(m.input_shape, 40, 5);
  std::vector<IntResult> serial(frames.count), parallel(frames.count), reversed(frames.count);
  for (std::size_t i = 0; i < frames.count; ++i) serial[i] = engine.forward(frames.frame(i));
  parallel_for(frames.count, 3, [&](std::size_t i) { parallel[i] = engine.forward(frames.frame(i)); });
  for (std::size_t i = frames.count; i-- > 0;) reversed[i] = forward(cm, frames.frame(i));
  EXPECT_EQ(serial, parallel);
  EXPECT_EQ(serial, reversed);
  EXPECT_EQ(engine.forward(frames.frame(0)), engine.forward(frames.frame(0)));
  EXPECT_THROW(engine.forward(std::vector<float>(3)), ShapeError);
}

TEST(Forward, WideFormatAgreesWithFloat) {
  const NetworkModel m = toy();
  const QuantizedModel q = quantize_model(m, {24, 16}, {24, 16});
  const Dataset frames = toy_frames(50, 7);
  std::vector<int> agree(frames.count, 0);
  parallel_for(frames.count, 4, [&](std::size_t i) {
    agree[i] = forward_int(q, frames.frame(i)).label == forward_float(m, frames.frame(i)).label;
  });
  const double rate = 100.0 * static_cast<double>(std::count(agree.begin(), agree.end(), 1)) /
                      static_cast<double>(frames.count);
  std::printf("24:16 integer vs float argmax agreement: %.2f%%\n", rate);
  if (rate < 99.0) std::printf("note: below the 99%% expectation\n");
  EXPECT_GE(rate, 98.0);
}

}  // namespace
}  // namespace shiftadd
