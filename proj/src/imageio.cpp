#include "camlab/imageio.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "camlab/errors.hpp"

namespace camlab {

namespace {

class PnmReader {
 public:
  explicit PnmReader(std::vector<unsigned char> bytes) : bytes_(std::move(bytes)) {}

  // Header token, skipping whitespace and '#' comments.
  std::size_t number() {
    skip_space();
    std::size_t v = 0;
    bool any = false;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      any = true;
      if (v > (1u << 30)) throw FormatError("pnm: header value too large");
    }
    if (!any) throw FormatError("pnm: expected a number in header");
    return v;
  }

  void single_whitespace() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw FormatError("pnm: malformed header");
    ++pos_;
  }

  unsigned sample(bool wide) {
    if (wide) {
      if (pos_ + 2 > bytes_.size()) throw FormatError("pnm: truncated pixel data");
      const unsigned v = (unsigned(bytes_[pos_]) << 8) | bytes_[pos_ + 1];
      pos_ += 2;
      return v;
    }
    if (pos_ + 1 > bytes_.size()) throw FormatError("pnm: truncated pixel data");
    return bytes_[pos_++];
  }

  char byte() {
    if (pos_ >= bytes_.size()) throw FormatError("pnm: truncated file");
    return char(bytes_[pos_++]);
  }

 private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

unsigned quantize(double v, unsigned maxval) {
  const double c = std::clamp(v, 0.0, 1.0);
  return unsigned(std::lround(c * double(maxval)));
}

}  // namespace

Tensor read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  PnmReader r(std::move(bytes));
  if (r.byte() != 'P') throw FormatError("pnm: bad magic in " + path.string());
  const char kind = r.byte();
  if (kind != '2' && kind != '3' && kind != '5' && kind != '6')
    throw FormatError(std::string("pnm: unsupported variant P") + kind + " in " + path.string());
  const std::size_t width = r.number();
  const std::size_t height = r.number();
  const std::size_t maxval = r.number();
  if (width == 0 || height == 0) throw FormatError("pnm: empty image " + path.string());
  if (maxval == 0 || maxval > 65535) throw FormatError("pnm: bad maxval in " + path.string());
  const std::size_t channels = (kind == '3' || kind == '6') ? 3 : 1;
  const bool binary = kind == '5' || kind == '6';
  if (binary) r.single_whitespace();

  Tensor out({channels, height, width});
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t v = binary ? r.sample(maxval > 255) : r.number();
        if (v > maxval) throw FormatError("pnm: sample exceeds maxval in " + path.string());
        out[(c * height + y) * width + x] = double(v) / double(maxval);
      }
  return out;
}

void write_pgm(const std::filesystem::path& path, const Tensor& gray, unsigned maxval) {
  if (maxval == 0 || maxval > 65535) throw std::invalid_argument("write_pgm: maxval out of range");
  std::size_t h, w;
  if (gray.rank() == 2) {
    h = gray.dim(0);
    w = gray.dim(1);
  } else if (gray.rank() == 3 && gray.dim(0) == 1) {
    h = gray.dim(1);
    w = gray.dim(2);
  } else {
    throw ShapeError("write_pgm: expected [H,W] or [1,H,W], got " + shape_str(gray.shape()));
  }
  auto out = open_out(path);
  out << "P5\n" << w << ' ' << h << '\n' << maxval << '\n';
  std::string buf;
  buf.reserve(h * w * 2);
  for (double v : gray.data()) {
    const unsigned q = quantize(v, maxval);
    if (maxval > 255) buf.push_back(char(q >> 8));
    buf.push_back(char(q & 0xff));
  }
  out.write(buf.data(), std::streamsize(buf.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void write_ppm(const std::filesystem::path& path, const Tensor& rgb) {
  if (rgb.rank() != 3 || rgb.dim(0) != 3) throw ShapeError("write_ppm: expected [3,H,W], got " + shape_str(rgb.shape()));
  const std::size_t h = rgb.dim(1), w = rgb.dim(2);
  auto out = open_out(path);
  out << "P6\n" << w << ' ' << h << "\n255\n";
  std::string buf;
  buf.reserve(h * w * 3);
  for (std::size_t i = 0; i < h * w; ++i)
    for (std::size_t c = 0; c < 3; ++c) buf.push_back(char(quantize(rgb[c * h * w + i], 255)));
  out.write(buf.data(), std::streamsize(buf.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Tensor resize_bilinear(const Tensor& grid, std::size_t height, std::size_t width) {
  if (grid.rank() != 2) throw ShapeError("resize_bilinear: expected [H,W], got " + shape_str(grid.shape()));
  const std::size_t u = grid.dim(0), v = grid.dim(1);
  Tensor out({height, width});
  const double sy = height > 1 ? double(u - 1) / double(height - 1) : 0.0;
  const double sx = width > 1 ? double(v - 1) / double(width - 1) : 0.0;
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = double(y) * sy;
    const std::size_t y0 = std::min(std::size_t(fy), u - 1);
    const std::size_t y1 = std::min(y0 + 1, u - 1);
    const double ty = fy - double(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = double(x) * sx;
      const std::size_t x0 = std::min(std::size_t(fx), v - 1);
      const std::size_t x1 = std::min(x0 + 1, v - 1);
      const double tx = fx - double(x0);
      const double top = grid.at(y0, x0) * (1.0 - tx) + grid.at(y0, x1) * tx;
      const double bot = grid.at(y1, x0) * (1.0 - tx) + grid.at(y1, x1) * tx;
      out.at(y, x) = top * (1.0 - ty) + bot * ty;
    }
  }
  return out;
}

}  // namespace camlab
