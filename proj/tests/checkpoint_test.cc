// Copyright 2026 The rdcseg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.h"
#include "rdcseg/checkpoint.h"

namespace rdcseg {
namespace {

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("rdcseg_ckpt_" + name);
  std::filesystem::remove_all(p);
  return p;
}

TEST(CheckpointTest, TensorLayoutIsLittleEndianHeaderThenFloats) {
  Tensor t(Shape{1, 2, 1, 1}, {1.0, -2.5});
  std::ostringstream os;
  write_tensor(os, t);
  const std::string b = os.str();
  ASSERT_EQ(b.size(), 16u + 8u);
  const unsigned char expect_header[16] = {1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0};
  for (int i = 0; i < 16; ++i) EXPECT_EQ(static_cast<unsigned char>(b[i]), expect_header[i]);
  // 1.0f = 0x3f800000, -2.5f = 0xc0200000.
  const unsigned char expect_values[8] = {0, 0, 0x80, 0x3f, 0, 0, 0x20, 0xc0};
  for (int i = 0; i < 8; ++i) EXPECT_EQ(static_cast<unsigned char>(b[16 + i]), expect_values[i]);
}

TEST(CheckpointTest, RoundTripNarrowsToFloat) {
  std::mt19937_64 rng(1);
  const Tensor t = oracle::random_tensor({2, 3, 4, 5}, rng);
  std::stringstream ss;
  write_tensor(ss, t);
  const Tensor back = read_tensor(ss);
  ASSERT_EQ(back.shape(), t.shape());
  for (std::size_t i = 0; i < t.numel(); ++i) {
    EXPECT_EQ(back[i], static_cast<double>(static_cast<float>(t[i])));
  }
}

TEST(CheckpointTest, TruncatedTensorRejected) {
  std::ostringstream os;
  write_tensor(os, Tensor(Shape{1, 1, 2, 2}, 1.0));
  std::istringstream is(os.str().substr(0, 20));
  EXPECT_THROW(read_tensor(is), std::invalid_argument);
}

TEST(CheckpointTest, ManifestRoundTrip) {
  const auto dir = scratch("manifest");
  std::mt19937_64 rng(2);
  const Tensor a = oracle::random_tensor({1, 3, 1, 1}, rng);
  const Tensor b = oracle::random_tensor({2, 1, 3, 3}, rng);
  save_checkpoint(dir, {{"layer.bias", &a}, {"layer.weight", &b}});
  std::ifstream m(dir / kCheckpointManifest);
  std::string line;
  std::getline(m, line);
  EXPECT_EQ(line, "layer.bias\tlayer.bias.bin\t1 3 1 1");
  const auto loaded = load_checkpoint(dir);
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_EQ(loaded[0].name, "layer.bias");
  EXPECT_EQ(loaded[1].name, "layer.weight");
  EXPECT_EQ(loaded[1].tensor.shape(), b.shape());
  std::filesystem::remove_all(dir);
}

TEST(CheckpointTest, ManifestShapeDisagreementRejected) {
  const auto dir = scratch("mismatch");
  const Tensor a(Shape{1, 2, 1, 1});
  save_checkpoint(dir, {{"x", &a}});
  {
    std::ofstream m(dir / kCheckpointManifest);
    m << "x\tx.bin\t1 3 1 1\n";
  }
  EXPECT_THROW(load_checkpoint(dir), std::invalid_argument);
  std::filesystem::remove_all(dir);
}

TEST(CheckpointTest, ScalarHelpersAreLittleEndian) {
  std::ostringstream os;
  write_u32_le(os, 0x01020304u);
  write_f64_le(os, 1.0);
  const std::string b = os.str();
  EXPECT_EQ(static_cast<unsigned char>(b[0]), 4);
  EXPECT_EQ(static_cast<unsigned char>(b[3]), 1);
  EXPECT_EQ(static_cast<unsigned char>(b[11]), 0x3f);
  EXPECT_EQ(static_cast<unsigned char>(b[10]), 0xf0);
  std::istringstream is(b);
  EXPECT_EQ(read_u32_le(is), 0x01020304u);
  EXPECT_EQ(read_f64_le(is), 1.0);
}

}  // namespace
}  // namespace rdcseg
