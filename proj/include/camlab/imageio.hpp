#pragma once

#include <cstddef>
#include <filesystem>

#include "camlab/tensor.hpp"

namespace camlab {

/// Reads a binary or ASCII portable graymap/pixmap (P2, P3, P5, P6).
/// Returns [channels, H, W] scaled to [0, 1].
Tensor read_pnm(const std::filesystem::path& path);

/// Writes a binary graymap from [H,W] or [1,H,W] values in [0,1] (clamped).
/// maxval 255 gives 8-bit samples, up to 65535 gives 16-bit samples.
void write_pgm(const std::filesystem::path& path, const Tensor& gray, unsigned maxval = 255);

/// Writes a binary pixmap from [3,H,W] values in [0,1].
void write_ppm(const std::filesystem::path& path, const Tensor& rgb);

/// Corner-aligned bilinear resize of a [H,W] grid, either direction.
Tensor resize_bilinear(const Tensor& grid, std::size_t height, std::size_t width);

}  // namespace camlab
