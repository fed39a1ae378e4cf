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
#include <fstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "gen.hpp"
#include "models.hpp"
#include "shiftadd/emulator.hpp"
#include "shiftadd/errors.hpp"
#include "shiftadd/netgraph.hpp"
#include "tempdir.hpp"

#ifndef SHIFTADD_ASSETS_DIR
#error "SHIFTADD_ASSETS_DIR must be defined"
#endif

namespace shiftadd {
namespace {

using testing::Gen;
using testing::TempDir;

void write_blob(const std::filesystem::path& p, const std::vector<float>& v) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(float)));
}

const char* kOneByOne = R"({
  "format": "shiftadd-model", "version": 1, "input_shape": [1, 1, 1],
  "layers": [{"kind": "conv2d", "in_channels": 1, "out_channels": 1, "kernel": [1, 1]}]
})";

TEST(LoadModel, SingleConv) {
  TempDir dir;
  testing::write_text(dir / "m.json", kOneByOne);
  write_blob(dir / "m.bin", {0.5F, -0.25F});
  const NetworkModel m = load_model(dir / "m.json", dir / "m.bin");
  EXPECT_EQ(m.parameter_count(), 2u);
  EXPECT_EQ(m.weight_count(), 1u);
  EXPECT_EQ(m.params[0].weights, std::vector<double>{0.5});
  EXPECT_EQ(m.params[0].bias, std::vector<double>{-0.25});
}

TEST(LoadModel, TruncatedBlobNamesLayer) {
  TempDir dir;
  testing::write_text(dir / "m.json", R"({
    "input_shape": [4, 4, 1],
    "layers": [{"kind": "relu"},
               {"kind": "conv2d", "in_channels": 1, "out_channels": 1, "kernel": [3, 3]}]
  })");
  write_blob(dir / "m.bin", std::vector<float>(8, 1.0F));
  try {
    load_model(dir / "m.json", dir / "m.bin");
    FAIL() << "expected a truncated-blob error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated blob"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos);
  }
}

TEST(LoadModel, Rejections) {
  TempDir dir;
  write_blob(dir / "m.bin", {1.0F, 0.0F});
  testing::write_text(dir / "kind.json",
                      R"({"input_shape": [1,1,1], "layers": [{"kind": "lstm"}]})");
  EXPECT_THROW(load_model(dir / "kind.json", dir / "m.bin"), FormatError);
  testing::write_text(dir / "shape.json", R"({"input_shape": [1,1,2],
    "layers": [{"kind": "conv2d", "in_channels": 1, "out_channels": 1, "kernel": [1, 1]}]})");
  try {
    load_model(dir / "shape.json", dir / "m.bin");
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 0"), std::string::npos);
  }
  testing::write_text(dir / "m.json", kOneByOne);
  write_blob(dir / "long.bin", {1.0F, 0.0F, 3.0F});
  EXPECT_THROW(load_model(dir / "m.json", dir / "long.bin"), FormatError);
  EXPECT_THROW(load_model(dir / "missing.json", dir / "m.bin"), IoError);
  testing::write_text(dir / "bad.json", "{not json");
  EXPECT_THROW(load_model(dir / "bad.json", dir / "m.bin"), FormatError);
}

TEST(LoadModel, ToyParameterCountFromShapes) {
  const std::filesystem::path manifest = std::filesystem::path(SHIFTADD_ASSETS_DIR) / "toy" / "model.json";
  const auto j = nlohmann::json::parse(testing::read_text(manifest));
  std::size_t expect = 0;
  int convs = 0;
  int denses = 0;
  for (const auto& l : j.at("layers")) {
    const std::string kind = l.at("kind");
    if (kind == "conv2d") {
      ++convs;
      const std::size_t o = l.at("out_channels");
      const std::size_t i = l.at("in_channels");
      const std::size_t kh = l.at("kernel")[0];
      const std::size_t kw = l.at("kernel")[1];
      expect += o * i * kh * kw + o;
    } else if (kind == "dense") {
      ++denses;
      const std::size_t o = l.at("out_features");
      const std::size_t i = l.at("in_features");
      expect += o * i + o;
    } else if (kind == "batchnorm") {
      expect += 4 * l.at("channels").get<std::size_t>();
    }
  }
  EXPECT_EQ(convs, 15);
  EXPECT_EQ(denses, 1);
  EXPECT_EQ(expect, j.at("total_params").get<std::size_t>());
  const NetworkModel m = load_model(manifest);
  EXPECT_EQ(m.parameter_count(), expect);
  EXPECT_EQ(m.parametric_layers().size(), 16u);
}

TEST(SaveModel, RoundTrip) {
  TempDir dir;
  const NetworkModel m = testing::two_term_model(3);
  save_model(m, dir / "m.json", dir / "m.bin");
  const NetworkModel back = load_model(dir / "m.json");
  EXPECT_EQ(back.layers, m.layers);
  EXPECT_EQ(back.input_shape, m.input_shape);
  EXPECT_EQ(back.params, m.params);  // all values are exact in float32
}

TEST(Shapes, InferAndReject) {
  const std::vector<LayerSpec> layers{conv2d(1, 2, 3, 3, 1, 1), relu(), max_pool(2, 2, 2, 2),
                                      global_avg_pool(), dense(2, 3), softmax()};
  const auto shapes = infer_shapes(layers, Shape3{8, 4, 1});
  ASSERT_EQ(shapes.size(), layers.size() + 1);
  EXPECT_EQ(shapes[1], (Shape3{8, 4, 2}));
  EXPECT_EQ(shapes[3], (Shape3{4, 2, 2}));
  EXPECT_EQ(shapes[4], (Shape3{1, 1, 2}));
  EXPECT_EQ(shapes.back(), (Shape3{1, 1, 3}));
  EXPECT_THROW(infer_shapes({dense(5, 1)}, Shape3{2, 2, 1}), ShapeError);
  EXPECT_THROW(infer_shapes({conv2d(1, 1, 5, 1)}, Shape3{4, 1, 1}), ShapeError);
  EXPECT_THROW(infer_shapes({conv2d(1, 1, 0, 1)}, Shape3{4, 1, 1}), ShapeError);
  EXPECT_THROW(layer_kind_from_string("lstm"), FormatError);
}

NetworkModel conv_bn(double w, double b, double gamma, double beta, double mean, double var,
                     double eps) {
  NetworkModel m;
  m.input_shape = Shape3{1, 1, 1};
  m.layers = {conv2d(1, 1, 1, 1), batch_norm(1, eps)};
  m.params.resize(2);
  m.params[0].weights = {w};
  m.params[0].bias = {b};
  m.params[1].gamma = {gamma};
  m.params[1].beta = {beta};
  m.params[1].mean = {mean};
  m.params[1].variance = {var};
  return m;
}

TEST(FoldBatchnorm, Identity) {
  const NetworkModel plain = testing::two_term_model(5);
  const NetworkModel folded = fold_batchnorm(plain);
  EXPECT_EQ(folded.layers, plain.layers);
  EXPECT_EQ(folded.params, plain.params);

  const NetworkModel f = fold_batchnorm(conv_bn(2, 0, 1, 0, 0, 1, 0));
  ASSERT_EQ(f.layers.size(), 1u);
  EXPECT_EQ(f.params[0].weights, std::vector<double>{2.0});
  EXPECT_EQ(f.params[0].bias, std::vector<double>{0.0});
}

TEST(FoldBatchnorm, UnsupportedPosition) {
  NetworkModel m;
  m.input_shape = Shape3{2, 2, 1};
  m.layers = {relu(), batch_norm(1)};
  m.params.resize(2);
  m.params[1] = LayerParams{{}, {}, {1}, {0}, {0}, {1}};
  EXPECT_THROW(fold_batchnorm(m), FormatError);
}

TEST(FoldBatchnorm, MatchesUnfoldedOnRandomInputs) {
  Gen g(404);
  NetworkModel m;
  m.input_shape = Shape3{6, 5, 2};
  m.layers = {conv2d(2, 3, 3, 3, 1, 1), batch_norm(3, 1e-3), relu(), global_avg_pool(),
              dense(3, 2), batch_norm(2)};
  m.params.resize(m.layers.size());
  m.params[0].weights.assign(54, 0.0);
  for (auto& w : m.params[0].weights) w = g.real_in(-1, 1);
  m.params[0].bias = {g.real_in(-1, 1), g.real_in(-1, 1), g.real_in(-1, 1)};
  m.params[4].weights.assign(6, 0.0);
  for (auto& w : m.params[4].weights) w = g.real_in(-1, 1);
  m.params[4].bias = {0.1, -0.2};
  for (std::size_t li : {std::size_t{1}, std::size_t{5}}) {
    const auto c = static_cast<std::size_t>(m.layers[li].channels);
    auto& p = m.params[li];
    for (std::size_t k = 0; k < c; ++k) {
      p.gamma.push_back(g.real_in(0.2, 2));
      p.beta.push_back(g.real_in(-1, 1));
      p.mean.push_back(g.real_in(-1, 1));
      p.variance.push_back(g.real_in(0.1, 3));
    }
  }
  m.validate();
  const NetworkModel folded = fold_batchnorm(m);
  EXPECT_EQ(folded.layers.size(), m.layers.size() - 2);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    std::vector<float> frame(m.input_shape.size());
    for (auto& v : frame) v = static_cast<float>(g.real_in(-1, 1));
    const auto a = forward_float(m, frame).scores;
    const auto b = forward_float(folded, frame).scores;
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(std::abs(a[i]), 1e-3));
    }
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Plan, JsonAndValidation) {
  CompressionPlan p = CompressionPlan::uniform(3, 2);
  p.terms[1] = 5;
  EXPECT_EQ(CompressionPlan::from_json(p.to_json()), p);
  EXPECT_NO_THROW(validate_plan(p, 3));
  EXPECT_THROW(validate_plan(p, 4), CapacityError);
  p.terms[0] = 0;
  EXPECT_THROW(validate_plan(p, 3), CapacityError);
  p.terms[0] = p.weight_format.max_terms() + 1;
  EXPECT_THROW(validate_plan(p, 3), CapacityError);
  EXPECT_THROW(CompressionPlan::from_json("{"), FormatError);
}

TEST(Plan, Headroom) {
  const std::vector<LayerSpec> layers{conv2d(4, 4, 3, 3), relu(), dense(4, 2)};
  EXPECT_NO_THROW(check_headroom(layers, CompressionPlan::uniform(2, 1)));
  // 32 + 24 + bit_width(36) = 62 fits, 32 + 28 + 6 = 66 does not.
  EXPECT_NO_THROW(check_headroom(layers, CompressionPlan::uniform(2, 1, {32, 8}, {24, 8})));
  EXPECT_THROW(check_headroom(layers, CompressionPlan::uniform(2, 1, {32, 8}, {28, 8})),
               HeadroomError);
}

NetworkModel with_weights(NetworkModel m, double value) {
  for (auto& p : m.params) {
    for (auto& w : p.weights) w = value;
  }
  return m;
}

TEST(CompressModel, AllZeroIsAllNop) {
  const NetworkModel m = with_weights(testing::two_term_model(1), 0.0);
  const CompressedModel cm = compress_model(m, CompressionPlan::uniform(3, 3));
  for (const auto& c : cm.compressed) {
    for (std::size_t i = 0; i < c.weight_count * 3; ++i) {
      ASSERT_TRUE(read_record(c.stream, i).is_nop());
    }
  }
  for (const auto& w : reconstructed_weights(cm)) {
    for (auto v : w) ASSERT_EQ(v, 0);
  }
}

TEST(CompressModel, PowersOfTwoExactAtOneTerm) {
  Gen g(6);
  NetworkModel m = testing::two_term_model(2);
  for (auto& p : m.params) {
    for (auto& w : p.weights) w = (g.coin() ? 1 : -1) * std::ldexp(1.0, static_cast<int>(g.int_in(-12, 2)));
  }
  const CompressionPlan plan = CompressionPlan::uniform(3, 1);
  const CompressedModel cm = compress_model(m, plan);
  const QuantizedModel q = quantize_model(m, plan.weight_format, plan.activation_format);
  const auto rec = reconstructed_weights(cm);
  for (std::size_t l = 0; l < rec.size(); ++l) EXPECT_EQ(rec[l], q.parametric[l].weights);
}

TEST(CompressModel, FullBudgetExactAndTruncatedMatchesCodec) {
  Gen g(9);
  NetworkModel m = testing::two_term_model(4);
  for (auto& p : m.params) {
    for (auto& w : p.weights) w = g.real_in(-7.9, 7.9);
  }
  const FixedPointFormat wf(16, 12);
  const QuantizedModel q = quantize_model(m, wf, {16, 10});
  const auto full = reconstructed_weights(
      compress_model(m, CompressionPlan::uniform(3, wf.max_terms())));
  for (std::size_t l = 0; l < full.size(); ++l) EXPECT_EQ(full[l], q.parametric[l].weights);

  CompressionPlan mixed = CompressionPlan::uniform(3, 1);
  mixed.terms = {2, 1, 4};
  const CompressedModel cm = compress_model(m, mixed);
  const auto rec = reconstructed_weights(cm);
  for (std::size_t l = 0; l < rec.size(); ++l) {
    ASSERT_EQ(rec[l].size(), q.parametric[l].weights.size());
    for (std::size_t i = 0; i < rec[l].size(); ++i) {
      ASSERT_EQ(rec[l][i], reconstruct(decompose(q.parametric[l].weights[i], wf, mixed.terms[l])));
    }
  }
  EXPECT_EQ(reconstructed_model(cm).parametric.size(), 3u);
  EXPECT_EQ(cm.layers, m.layers);
  EXPECT_EQ(cm.input_shape, m.input_shape);
}

TEST(CompressModel, DeterministicAcrossJobs) {
  const NetworkModel m = testing::two_term_model(11);
  const CompressionPlan plan = CompressionPlan::uniform(3, 2);
  EXPECT_EQ(compress_model(m, plan, 1), compress_model(m, plan, 1));
  EXPECT_EQ(compress_model(m, plan, 1), compress_model(m, plan, 4));
}

TEST(CompressModel, RejectsBadPlansAndUnfolded) {
  const NetworkModel m = testing::two_term_model(1);
  EXPECT_THROW(compress_model(m, CompressionPlan::uniform(2, 2)), CapacityError);
  EXPECT_THROW(compress_model(conv_bn(1, 0, 1, 0, 0, 1, 0), CompressionPlan::uniform(1, 1)),
               FormatError);
}

}  // namespace
}  // namespace shiftadd
