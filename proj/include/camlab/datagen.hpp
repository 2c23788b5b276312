#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "camlab/tensor.hpp"

namespace camlab {

enum class Split { Train, Val, Test };

std::string to_string(Split split);
Split parse_split(const std::string& name);

/// Labelled single-channel images, optionally with a ground-truth salience
/// mask per image at CAM resolution.
struct Dataset {
  std::vector<Tensor> images;  // [1,H,W] in [0,1]
  std::vector<std::size_t> labels;
  std::vector<Tensor> masks;  // [u,v]; empty when unavailable
  Split split = Split::Train;
  std::size_t num_classes = 0;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
  bool has_masks() const { return !masks.empty(); }
};

/// Number of distinct glyph shapes available for class construction.
inline constexpr std::size_t kGlyphShapes = 15;
/// Side length of one glyph bitmap, in pixels.
inline constexpr std::size_t kGlyphSize = 7;

/// Synthetic glyph task. Classes up to kGlyphShapes show one glyph of a
/// class-specific shape; larger class counts show an unordered pair of
/// distinct shapes placed in two different image quadrants.
struct SyntheticSpec {
  std::size_t num_classes = 7;
  std::size_t train_per_class = 193;
  std::size_t val_per_class = 5;
  std::size_t test_per_class = 5;
  std::size_t image_size = 28;
  std::size_t cam_grid = 7;
  /// Maximum glyph displacement from its anchor, in pixels.
  std::size_t jitter = 3;
  double noise_std = 0.05;
  std::uint64_t seed = 17;

  void validate() const;
};

/// Largest class count the glyph vocabulary supports.
std::size_t glyph_class_capacity();

struct SyntheticSplits {
  Dataset train;
  Dataset val;
  Dataset test;
};

SyntheticSplits generate_synthetic(const SyntheticSpec& spec);
Dataset generate_split(const SyntheticSpec& spec, Split split);

/// Loads `<label>_<index>.pgm|.ppm|.pnm` files (color is averaged to gray),
/// resized bilinearly to size x size.
Dataset load_folder(const std::filesystem::path& dir, std::size_t size, std::size_t num_classes = 0);

/// Writes images (16-bit PGM), masks, and a manifest.txt index.
void save_dataset(const Dataset& data, const std::filesystem::path& dir);
/// Reads a directory written by save_dataset.
Dataset load_dataset(const std::filesystem::path& dir);

/// Evenly subsample `per_class` items per label, in original order.
Dataset take_per_class(const Dataset& data, std::size_t per_class);

}  // namespace camlab
