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

#include <cstring>

#include <gtest/gtest.h>

#include "models.hpp"
#include "shiftadd/archive.hpp"
#include "shiftadd/errors.hpp"
#include "tempdir.hpp"

namespace shiftadd {
namespace {

CompressedModel sample(int n = 2) {
  CompressionPlan plan = CompressionPlan::uniform(3, n);
  plan.terms[1] = 1;
  return compress_model(testing::two_term_model(8), plan);
}

TEST(Archive, Layout) {
  const auto bytes = serialize_archive(sample());
  ASSERT_GT(bytes.size(), 9u);
  EXPECT_EQ(std::memcmp(bytes.data(), "SAFM", 4), 0);
  EXPECT_EQ(bytes[4], kArchiveVersion);
  std::uint32_t len = 0;
  for (int b = 0; b < 4; ++b) len |= static_cast<std::uint32_t>(bytes[5 + b]) << (8 * b);
  EXPECT_EQ(bytes[9], '{');
  EXPECT_EQ(bytes[9 + len - 1], '}');
  std::size_t stream_bytes = 0;
  for (const auto& c : sample().compressed) stream_bytes += c.stream.bytes.size();
  EXPECT_EQ(bytes.size(), 9 + len + stream_bytes);
}

TEST(Archive, RoundTripAndDeterminism) {
  const CompressedModel cm = sample();
  EXPECT_EQ(deserialize_archive(serialize_archive(cm)), cm);
  EXPECT_EQ(serialize_archive(cm), serialize_archive(sample()));
  testing::TempDir dir;
  save_archive(cm, dir / "a.safm");
  EXPECT_EQ(load_archive(dir / "a.safm"), cm);
  EXPECT_THROW(load_archive(dir / "missing.safm"), IoError);
}

TEST(Archive, RejectsCorruption) {
  const auto good = serialize_archive(sample());
  auto bad = good;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_archive(bad), FormatError);
  bad = good;
  bad[4] = 99;
  EXPECT_THROW(deserialize_archive(bad), FormatError);
  bad = good;
  bad.pop_back();
  EXPECT_THROW(deserialize_archive(bad), FormatError);
  bad = good;
  bad.push_back(0);
  EXPECT_THROW(deserialize_archive(bad), FormatError);
  bad.assign(good.begin(), good.begin() + 20);
  EXPECT_THROW(deserialize_archive(bad), FormatError);
  EXPECT_THROW(deserialize_archive(std::vector<std::uint8_t>{}), FormatError);
}

TEST(Archive, CorruptStreamSurfacesOnReconstruct) {
  CompressedModel cm = sample(3);
  // First weight: NOP, then a live record.
  auto& s = cm.compressed[0].stream;
  s.bytes[0] = 0xFC;
  s.bytes[1] = static_cast<std::uint8_t>((s.bytes[1] & 0x0F) | 0x10);
  const CompressedModel back = deserialize_archive(serialize_archive(cm));
  EXPECT_THROW(reconstructed_weights(back), FormatError);
}

}  // namespace
}  // namespace shiftadd
