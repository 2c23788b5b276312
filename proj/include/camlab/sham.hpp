#pragma once

#include <cstddef>
#include <string>

#include "camlab/tensor.hpp"

namespace camlab {

/// Entropy-targeted border salience over a CAM grid.
struct ShamSpec {
  std::size_t rows = 7;
  std::size_t cols = 7;
  /// Target entropy in nats.
  double target_entropy = 3.35;

  void validate() const;
};

struct ShamMask {
  Tensor grid;  // [rows, cols] of 0/1
  std::size_t ones = 0;
  double entropy = 0.0;
};

/// Entropy (nats) of a non-negative map read as a distribution over cells.
double cam_entropy(const Tensor& map);

/// Ring depth of (r, c): distance to the nearest grid edge.
std::size_t ring_depth(std::size_t r, std::size_t c, std::size_t rows, std::size_t cols);

/// Cells in fill order: outer ring first; within a ring, the ring's corners
/// first, then the remaining cells in raster order.
std::vector<std::size_t> sham_fill_order(std::size_t rows, std::size_t cols);

/// Number of lit cells for a target entropy: the largest n with ln(n) <= H*.
std::size_t sham_count(const ShamSpec& spec);

ShamMask generate_sham(const ShamSpec& spec);

/// Nearest-neighbour upsample of `mask` to the image size, blended over a
/// single-channel image as (1 - alpha) * image + alpha * mask.
Tensor overlay(const Tensor& mask, const Tensor& image, std::size_t height, std::size_t width, double alpha = 0.5);

/// Plain-text grid: one row per line, cells as 0/1 separated by spaces.
std::string sham_to_text(const Tensor& grid);
Tensor sham_from_text(const std::string& text);

}  // namespace camlab
