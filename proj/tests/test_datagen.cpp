#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "camlab/datagen.hpp"
#include "camlab/errors.hpp"
#include "camlab/imageio.hpp"

using namespace camlab;
namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("camlab_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}
}  // namespace

TEST(Synthetic, DeterministicAndSized) {
  SyntheticSpec s;
  const auto a = generate_synthetic(s), b = generate_synthetic(s);
  EXPECT_EQ(a.train.size(), 1351u);
  EXPECT_EQ(a.val.size(), 35u);
  EXPECT_EQ(a.test.size(), 35u);
  EXPECT_EQ(a.train.images, b.train.images);
  EXPECT_EQ(a.test.masks, b.test.masks);
  EXPECT_EQ(a.train.labels, b.train.labels);
}

TEST(Synthetic, SplitsDiffer) {
  SyntheticSpec s;
  s.train_per_class = s.val_per_class = s.test_per_class = 3;
  const auto d = generate_synthetic(s);
  for (std::size_t i = 0; i < d.train.size(); ++i) {
    EXPECT_NE(d.train.images[i], d.val.images[i]);
    EXPECT_NE(d.train.images[i], d.test.images[i]);
  }
}

TEST(Synthetic, LabelsBalancedAndMasksValid) {
  for (std::size_t C : {2u, 7u, 15u, 16u, 100u}) {
    SyntheticSpec s;
    s.num_classes = C;
    s.test_per_class = 2;
    const auto d = generate_split(s, Split::Test);
    ASSERT_EQ(d.size(), 2 * C);
    std::vector<std::size_t> count(C);
    for (std::size_t i = 0; i < d.size(); ++i) {
      ++count[d.labels[i]];
      EXPECT_EQ(d.images[i].shape(), (Shape{1, 28, 28}));
      EXPECT_GE(d.images[i].min(), 0.0);
      EXPECT_LE(d.images[i].max(), 1.0);
      EXPECT_EQ(d.masks[i].shape(), (Shape{7, 7}));
      EXPECT_GT(d.masks[i].sum(), 0.0);
      EXPECT_GE(d.masks[i].min(), 0.0);
      EXPECT_LE(d.masks[i].max(), 1.0);
    }
    for (auto c : count) EXPECT_EQ(c, 2u);
  }
}

TEST(Synthetic, NoiseFreeRepeatsUpToJitter) {
  SyntheticSpec s;
  s.noise_std = 0.0;
  s.jitter = 0;
  s.train_per_class = 4;
  const auto d = generate_split(s, Split::Train);
  // Same glyph, same place; only the intensity draw differs, so the support matches.
  for (std::size_t i = 7; i < d.size(); ++i) {
    const auto& a = d.images[i % 7];
    const auto& b = d.images[i];
    for (std::size_t p = 0; p < a.size(); ++p) EXPECT_EQ(a[p] > 0, b[p] > 0);
    EXPECT_EQ(d.masks[i], d.masks[i % 7]);
  }
}

TEST(Synthetic, CapacityAndValidation) {
  SyntheticSpec s;
  s.num_classes = glyph_class_capacity() + 1;
  EXPECT_THROW(generate_synthetic(s), ConfigError);
  s.num_classes = 1;
  EXPECT_THROW(generate_synthetic(s), ConfigError);
  EXPECT_EQ(glyph_class_capacity(), 105u);
}

TEST(Datagen, SaveLoadRoundTrip) {
  SyntheticSpec s;
  s.test_per_class = 2;
  const auto d = generate_split(s, Split::Test);
  const auto dir = scratch("roundtrip");
  save_dataset(d, dir);
  const auto back = load_dataset(dir);
  ASSERT_EQ(back.size(), d.size());
  EXPECT_EQ(back.labels, d.labels);
  EXPECT_EQ(back.num_classes, d.num_classes);
  EXPECT_EQ(back.split, d.split);
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t p = 0; p < d.images[i].size(); ++p) {
      EXPECT_NEAR(back.images[i][p], d.images[i][p], 1.0 / 65535.0);
      if (p < 49) EXPECT_NEAR(back.masks[i][p], d.masks[i][p], 1.0 / 65535.0);
    }
  fs::remove_all(dir);
}

TEST(LoadFolder, EmptyResizeAndErrors) {
  const auto dir = scratch("folder");
  EXPECT_TRUE(load_folder(dir, 28).empty());

  SyntheticSpec s;
  s.test_per_class = 1;
  const auto d = generate_split(s, Split::Test);
  for (std::size_t i = 0; i < 3; ++i)
    write_pgm(dir / (std::to_string(d.labels[i]) + "_" + std::to_string(i) + ".pgm"), d.images[i].reshaped({28, 28}));
  auto loaded = load_folder(dir, 28);
  ASSERT_EQ(loaded.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(loaded.labels[i], d.labels[i]);
    for (std::size_t p = 0; p < 28 * 28; ++p) EXPECT_NEAR(loaded.images[i][p], d.images[i][p], 1.0 / 255.0);
  }
  write_pgm(dir / "1_big.pgm", Tensor({40, 33}, 0.5));
  loaded = load_folder(dir, 28);
  EXPECT_EQ(loaded.images.back().shape(), (Shape{1, 28, 28}));

  std::ofstream(dir / "2_x.png") << "x";
  EXPECT_THROW(load_folder(dir, 28), FormatError);
  fs::remove(dir / "2_x.png");
  write_pgm(dir / "cat_1.pgm", Tensor({4, 4}, 0.5));
  EXPECT_THROW(load_folder(dir, 28), FormatError);
  fs::remove_all(dir);
}

TEST(ImageIo, PnmRoundTripAndErrors) {
  const auto dir = scratch("pnm");
  Tensor rgb({3, 2, 3});
  for (std::size_t i = 0; i < rgb.size(); ++i) rgb[i] = double(i) / 17.0;
  write_ppm(dir / "a.ppm", rgb);
  const auto back = read_pnm(dir / "a.ppm");
  ASSERT_EQ(back.shape(), rgb.shape());
  for (std::size_t i = 0; i < rgb.size(); ++i) EXPECT_NEAR(back[i], rgb[i], 0.5 / 255.0);
  std::ofstream(dir / "bad.pgm") << "P9\n1 1\n255\n";
  EXPECT_THROW(read_pnm(dir / "bad.pgm"), FormatError);
  std::ofstream(dir / "short.pgm", std::ios::binary) << "P5\n4 4\n255\nab";
  EXPECT_THROW(read_pnm(dir / "short.pgm"), FormatError);
  EXPECT_THROW(read_pnm(dir / "missing.pgm"), IoError);
  fs::remove_all(dir);
}

TEST(TakePerClass, EvenSubsample) {
  SyntheticSpec s;
  s.train_per_class = 10;
  const auto d = generate_split(s, Split::Train);
  const auto t = take_per_class(d, 3);
  ASSERT_EQ(t.size(), 21u);
  std::vector<std::size_t> count(7);
  for (auto l : t.labels) ++count[l];
  for (auto c : count) EXPECT_EQ(c, 3u);
}
