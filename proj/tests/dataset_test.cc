// Copyright 2026 The IPMC Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ipmc/dataset.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <set>

#include "gtest/gtest.h"
#include "ipmc/csv.h"
#include "ipmc/errors.h"
#include "test_util.h"

namespace ipmc {
namespace {

SyntheticConfig Small() {
  SyntheticConfig s;
  s.classes = 3;
  s.per_class = 20;
  s.latent_dim = 4;
  s.views = 3;
  s.view_dim = 6;
  s.nuisance_rank = 2;
  s.seed = 11;
  return s;
}

TEST(SyntheticTest, ZeroNoiseRendersDeterministically) {
  SyntheticConfig s = Small();
  s.noise_scale = 0.0;
  std::mt19937_64 maps(1);
  SyntheticModel model(s, maps);
  std::mt19937_64 r1(5), r2(99);
  const std::vector<double> z = {0.3, -1.0, 2.0, 0.5};
  for (int v = 0; v < s.views; ++v) {
    EXPECT_EQ(model.Render(v, z, r1), model.Render(v, z, r2));
  }
  s.noise_scale = 1.0;
  std::mt19937_64 maps2(1);
  SyntheticModel noisy(s, maps2);
  EXPECT_NE(noisy.Render(0, z, r1), noisy.Render(0, z, r2));
}

TEST(SyntheticTest, SameSeedIsBitIdentical) {
  EXPECT_EQ(GenerateSynthetic(Small()), GenerateSynthetic(Small()));
  SyntheticConfig other = Small();
  other.seed = 12;
  EXPECT_NE(GenerateSynthetic(Small()), GenerateSynthetic(other));
}

TEST(SyntheticTest, ShapesLabelsAndStratifiedSplit) {
  SyntheticConfig s = Small();
  s.test_fraction = 0.25;
  MultiViewDataset d = GenerateSynthetic(s);
  EXPECT_NO_THROW(d.Validate());
  EXPECT_EQ(d.samples(), 60);
  EXPECT_EQ(d.view_count(), 3);
  EXPECT_EQ(d.view_dims(), (std::vector<int>{6, 6, 6}));
  std::vector<int> test_per_class(3, 0), per_class(3, 0);
  for (int i = 0; i < d.samples(); ++i) {
    ++per_class[d.labels[i]];
    if (d.test[i]) ++test_per_class[d.labels[i]];
    for (int v = 0; v < 3; ++v) {
      for (double x : d.views[v].row(i)) EXPECT_GE(x, 0.0);
    }
  }
  EXPECT_EQ(per_class, (std::vector<int>{20, 20, 20}));
  EXPECT_EQ(test_per_class, (std::vector<int>{5, 5, 5}));
}

// Nearest class mean (estimated on train rows) on raw view 0, with the
// view nuisance small next to the within-class spread.
TEST(SyntheticTest, SeparatedClassesAreLinearlyRecoverable) {
  SyntheticConfig s;
  s.class_separation = 5.0;
  s.noise_scale = 0.25;
  s.seed = 3;
  MultiViewDataset d = GenerateSynthetic(s);
  const Matrix &x = d.views[0];
  std::vector<std::vector<double>> mean(s.classes, std::vector<double>(x.cols(), 0.0));
  std::vector<int> count(s.classes, 0);
  for (int i = 0; i < d.samples(); ++i) {
    if (d.test[i]) continue;
    ++count[d.labels[i]];
    for (int c = 0; c < x.cols(); ++c) mean[d.labels[i]][c] += x(i, c);
  }
  for (int k = 0; k < s.classes; ++k) {
    for (double &v : mean[k]) v /= count[k];
  }
  int correct = 0, total = 0;
  for (int i = 0; i < d.samples(); ++i) {
    if (!d.test[i]) continue;
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < s.classes; ++k) {
      double dist = 0.0;
      for (int c = 0; c < x.cols(); ++c) dist += (x(i, c) - mean[k][c]) * (x(i, c) - mean[k][c]);
      if (dist < best_d) best_d = dist, best = k;
    }
    correct += best == d.labels[i];
    ++total;
  }
  EXPECT_GT(static_cast<double>(correct) / total, 0.95);
}

TEST(SyntheticTest, InvalidConfigRejected) {
  SyntheticConfig s = Small();
  s.classes = 1;
  EXPECT_THROW(GenerateSynthetic(s), ConfigError);
  s = Small();
  s.views = 1;
  EXPECT_THROW(GenerateSynthetic(s), ConfigError);
  s = Small();
  s.test_fraction = 1.0;
  EXPECT_THROW(GenerateSynthetic(s), ConfigError);
}

TEST(TrainingSplitTest, HoldsOnlyTrainingRows) {
  MultiViewDataset d = GenerateSynthetic(Small());
  TrainingViews tv = TrainingSplit(d);
  std::vector<int> train = SplitIndices(d, false);
  EXPECT_EQ(tv.source_index, train);
  for (int v = 0; v < d.view_count(); ++v) {
    EXPECT_EQ(tv.views[v], SelectRows(d.views[v], train));
  }
  const int order[] = {2, 0};
  TrainingViews two = SelectViews(tv, order);
  ASSERT_EQ(two.view_count(), 2);
  EXPECT_EQ(two.views[0], tv.views[2]);
  EXPECT_EQ(two.views[1], tv.views[0]);
  const int bad[] = {3};
  EXPECT_THROW(SelectViews(tv, bad), IndexError);
}

// ---- Channels ---------------------------------------------------------

Matrix Pixel(double r, double g, double b) { return Matrix(1, 3, std::vector<double>{r, g, b}); }

TEST(ChannelTest, GrayAndPrimaryPixels) {
  ChannelViews gray = DecomposeChannels(Pixel(0.4, 0.4, 0.4));
  EXPECT_NEAR(gray.luminance[0], 0.4, 1e-12);
  EXPECT_NEAR(gray.chroma[0], 0.5, 1e-12);
  EXPECT_NEAR(gray.chroma[1], 0.5, 1e-12);

  ChannelViews red = DecomposeChannels(Pixel(1, 0, 0));
  EXPECT_NEAR(red.luminance[0], 0.299, 1e-12);
  EXPECT_NEAR(red.chroma[0], (0.0 - 0.299) / 1.772 + 0.5, 1e-12);
  EXPECT_NEAR(red.chroma[1], (1.0 - 0.299) / 1.402 + 0.5, 1e-12);
}

TEST(ChannelTest, ChannelsStayInUnitRangeAndReconstruct) {
  std::mt19937_64 rng(8);
  Matrix rgb = testing::RandomMatrix(20, 3 * 9, 0.0, 1.0, rng);
  // Corners of the cube are the extremes of every channel.
  for (int c = 0; c < 8; ++c) {
    rgb(0, 3 * c) = c & 1;
    rgb(0, 3 * c + 1) = (c >> 1) & 1;
    rgb(0, 3 * c + 2) = (c >> 2) & 1;
  }
  ChannelViews ch = DecomposeChannels(rgb);
  EXPECT_EQ(ch.luminance.cols(), 9);
  EXPECT_EQ(ch.chroma.cols(), 18);
  for (double v : ch.luminance.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  for (double v : ch.chroma.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  Matrix back = ReconstructRgb(ch.luminance, ch.chroma);
  ASSERT_TRUE(back.SameShape(rgb));
  for (size_t i = 0; i < rgb.size(); ++i) EXPECT_NEAR(back[i], rgb[i], 1e-12);
}

TEST(ChannelTest, OutOfRangePixelRejected) {
  EXPECT_THROW(DecomposeChannels(Pixel(1.2, 0, 0)), DomainError);
  EXPECT_THROW(DecomposeChannels(Pixel(0, -0.1, 0)), DomainError);
  EXPECT_THROW(DecomposeChannels(Pixel(0, std::nan(""), 0)), DomainError);
  EXPECT_THROW(DecomposeChannels(Matrix(1, 4, 0.5)), ShapeError);
}

TEST(ChannelTest, GeneratedDatasetHasThreeConsistentViews) {
  ImageConfig c;
  c.classes = 3;
  c.per_class = 10;
  c.side = 4;
  MultiViewDataset d = GenerateChannelDataset(c);
  ASSERT_EQ(d.view_count(), 3);
  EXPECT_EQ(d.view_dims(), (std::vector<int>{48, 16, 32}));
  ChannelViews ch = DecomposeChannels(d.views[0]);
  EXPECT_EQ(ch.luminance, d.views[1]);
  EXPECT_EQ(ch.chroma, d.views[2]);
  EXPECT_EQ(GenerateChannelDataset(c), d);
}

// ---- Binary format ----------------------------------------------------

class DatasetFileTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("ipmc_dataset_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::string Path(const std::string &name) const { return (dir_ / name).string(); }
  std::filesystem::path dir_;
};

TEST_F(DatasetFileTest, WriteReadWriteIsByteIdentical) {
  MultiViewDataset d = GenerateSynthetic(Small());
  WriteDataset(d, Path("a.bin"));
  MultiViewDataset back = ReadDataset(Path("a.bin"));
  EXPECT_EQ(back, d);
  EXPECT_EQ(SerializeDataset(back), SerializeDataset(d));
}

TEST_F(DatasetFileTest, MissingFileIsIoError) {
  EXPECT_THROW(ReadDataset(Path("absent.bin")), IoError);
}

TEST(DatasetFormatTest, CorruptionDetected) {
  std::vector<uint8_t> bytes = SerializeDataset(GenerateSynthetic(Small()));
  std::vector<uint8_t> magic = bytes;
  magic[3] = '?';
  EXPECT_THROW(DeserializeDataset(magic), FormatError);
  std::vector<uint8_t> version = bytes;
  version[8] = 42;
  EXPECT_THROW(DeserializeDataset(version), FormatError);
  std::vector<uint8_t> truncated(bytes.begin(), bytes.end() - 1);
  EXPECT_THROW(DeserializeDataset(truncated), FormatError);
  std::vector<uint8_t> trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(DeserializeDataset(trailing), FormatError);
  EXPECT_THROW(DeserializeDataset(std::vector<uint8_t>{}), FormatError);
}

TEST(DatasetFormatTest, InvalidDatasetsNotWritten) {
  MultiViewDataset empty;
  EXPECT_THROW(SerializeDataset(empty), Error);
  MultiViewDataset ragged = GenerateSynthetic(Small());
  ragged.labels.pop_back();
  EXPECT_THROW(SerializeDataset(ragged), ShapeError);
}

// ---- CSV --------------------------------------------------------------

TEST(CsvTest, QuotingAndParsing) {
  CsvWriter w;
  w.Row({"plain", "with,comma", "with \"quote\"", "line\nbreak", ""});
  w.Row({"1", "2"});
  EXPECT_EQ(w.text(),
            "plain,\"with,comma\",\"with \"\"quote\"\"\",\"line\nbreak\",\r\n1,2\r\n");
  auto rows = ParseCsv(w.text());
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"plain", "with,comma", "with \"quote\"",
                                               "line\nbreak", ""}));
  EXPECT_EQ(rows[1], (std::vector<std::string>{"1", "2"}));
  EXPECT_EQ(ParseCsv("a,b\nc,d\n").size(), 2u);
  EXPECT_THROW(ParseCsv("a,\"open\n"), FormatError);
}

TEST(CsvTest, RealsRoundTripExactly) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    EXPECT_EQ(std::stod(FormatReal(v)), v);
  }
  EXPECT_EQ(FormatReal(0.5), "0.5");
  EXPECT_EQ(std::stod(FormatReal(0.1)), 0.1);
}

}  // namespace
}  // namespace ipmc
