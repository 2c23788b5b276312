#include "camlab/sham.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "camlab/errors.hpp"

namespace camlab {

void ShamSpec::validate() const {
  if (rows == 0 || cols == 0) throw ConfigError("sham: empty grid");
  if (!std::isfinite(target_entropy) || target_entropy < 0.0) throw ConfigError("sham: target entropy must be >= 0");
  const double cap = std::log(double(rows * cols));
  if (target_entropy > cap + 1e-12)
    throw ConfigError("sham: target entropy " + std::to_string(target_entropy) + " exceeds ln(" +
                      std::to_string(rows * cols) + ") = " + std::to_string(cap));
}

double cam_entropy(const Tensor& map) {
  double total = 0.0;
  for (double v : map.data()) {
    if (v < 0.0 || !std::isfinite(v)) throw NumericError("cam_entropy: map has negative or non-finite cells");
    total += v;
  }
  if (!(total > 0.0)) throw NumericError("cam_entropy: all-zero map");
  double h = 0.0;
  for (double v : map.data()) {
    if (v == 0.0) continue;
    const double p = v / total;
    h -= p * std::log(p);
  }
  return h;
}

std::size_t ring_depth(std::size_t r, std::size_t c, std::size_t rows, std::size_t cols) {
  return std::min({r, c, rows - 1 - r, cols - 1 - c});
}

std::vector<std::size_t> sham_fill_order(std::size_t rows, std::size_t cols) {
  struct Key {
    std::size_t depth;
    int corner;  // 0 for ring corners
    std::size_t raster;
  };
  std::vector<Key> keys;
  keys.reserve(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t d = ring_depth(r, c, rows, cols);
      const bool corner = (r == d || r == rows - 1 - d) && (c == d || c == cols - 1 - d);
      keys.push_back({d, corner ? 0 : 1, r * cols + c});
    }
  std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
    return std::tie(a.depth, a.corner, a.raster) < std::tie(b.depth, b.corner, b.raster);
  });
  std::vector<std::size_t> order;
  order.reserve(keys.size());
  for (const auto& k : keys) order.push_back(k.raster);
  return order;
}

std::size_t sham_count(const ShamSpec& spec) {
  spec.validate();
  // Tolerance keeps exact targets such as ln(8) from flooring to 7.
  const double n = std::floor(std::exp(spec.target_entropy) * (1.0 + 1e-12));
  return std::clamp<std::size_t>(std::size_t(n), 1, spec.rows * spec.cols);
}

ShamMask generate_sham(const ShamSpec& spec) {
  const std::size_t n = sham_count(spec);
  ShamMask m;
  m.grid = Tensor({spec.rows, spec.cols});
  const auto order = sham_fill_order(spec.rows, spec.cols);
  for (std::size_t i = 0; i < n; ++i) m.grid[order[i]] = 1.0;
  m.ones = n;
  m.entropy = cam_entropy(m.grid);
  return m;
}

Tensor overlay(const Tensor& mask, const Tensor& image, std::size_t height, std::size_t width, double alpha) {
  if (mask.rank() != 2) throw ShapeError("overlay: mask must be [u,v], got " + shape_str(mask.shape()));
  if (image.size() != height * width)
    throw ShapeError("overlay: image " + shape_str(image.shape()) + " is not " + std::to_string(height) + "x" +
                     std::to_string(width));
  const std::size_t u = mask.dim(0), v = mask.dim(1);
  Tensor out({height, width});
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const double m = mask.at(y * u / height, x * v / width);
      out.at(y, x) = (1.0 - alpha) * image[y * width + x] + alpha * m;
    }
  return out;
}

std::string sham_to_text(const Tensor& grid) {
  std::ostringstream os;
  for (std::size_t r = 0; r < grid.dim(0); ++r) {
    for (std::size_t c = 0; c < grid.dim(1); ++c) {
      if (c) os << ' ';
      os << (grid.at(r, c) != 0.0 ? 1 : 0);
    }
    os << '\n';
  }
  return os.str();
}

Tensor sham_from_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::vector<double> cells;
  std::size_t rows = 0, cols = 0;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::size_t n = 0;
    int v;
    while (ls >> v) {
      if (v != 0 && v != 1) throw FormatError("sham: cells must be 0 or 1");
      cells.push_back(v);
      ++n;
    }
    if (n == 0) continue;
    if (cols && n != cols) throw FormatError("sham: ragged grid");
    cols = n;
    ++rows;
  }
  if (rows == 0) throw FormatError("sham: empty grid");
  return Tensor({rows, cols}, std::move(cells));
}

}  // namespace camlab
