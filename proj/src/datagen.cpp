#include "camlab/datagen.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "camlab/errors.hpp"
#include "camlab/imageio.hpp"
#include "camlab/rng.hpp"

namespace camlab {

namespace {

using Glyph = std::array<const char*, kGlyphSize>;

// clang-format off
constexpr std::array<Glyph, kGlyphShapes> kGlyphs = {{
    {".......", ".#####.", ".#####.", ".#####.", ".#####.", ".#####.", "......."},  // filled square
    {"#######", "#.....#", "#.....#", "#.....#", "#.....#", "#.....#", "#######"},  // hollow square
    {"...#...", "...#...", "...#...", "#######", "...#...", "...#...", "...#..."},  // plus
    {"#.....#", ".#...#.", "..#.#..", "...#...", "..#.#..", ".#...#.", "#.....#"},  // cross
    {".......", ".......", "#######", "#######", "#######", ".......", "......."},  // horizontal bar
    {"..###..", "..###..", "..###..", "..###..", "..###..", "..###..", "..###.."},  // vertical bar
    {"##.....", "###....", ".###...", "..###..", "...###.", "....###", ".....##"},  // falling diagonal
    {".....##", "....###", "...###.", "..###..", ".###...", "###....", "##....."},  // rising diagonal
    {"..###..", ".#...#.", "#.....#", "#.....#", "#.....#", ".#...#.", "..###.."},  // ring
    {".......", ".......", "..###..", "..###..", "..###..", ".......", "......."},  // dot
    {"#######", "#######", "..###..", "..###..", "..###..", "..###..", "..###.."},  // tee
    {"##.....", "##.....", "##.....", "##.....", "##.....", "#######", "#######"},  // ell
    {"...#...", "..###..", "..###..", ".#####.", ".#####.", "#######", "#######"},  // triangle
    {"...#...", "..#.#..", ".#...#.", "#.....#", ".#...#.", "..#.#..", "...#..."},  // diamond
    {"##...##", "##...##", "##...##", "#######", "##...##", "##...##", "##...##"},  // aitch
}};
// clang-format on

std::uint64_t image_seed(std::uint64_t seed, Split split, std::size_t index) {
  return splitmix64(splitmix64(seed ^ (0x51ed2701u * (std::uint64_t(split) + 1))) + index);
}

std::pair<std::size_t, std::size_t> pair_for_class(std::size_t cls) {
  for (std::size_t a = 0; a < kGlyphShapes; ++a)
    for (std::size_t b = a + 1; b < kGlyphShapes; ++b) {
      if (cls == 0) return {a, b};
      --cls;
    }
  throw ConfigError("datagen: class index exceeds glyph pair capacity");
}

struct Canvas {
  Tensor pixels;
  std::vector<char> support;
  std::size_t size;
};

void stamp(Canvas& c, std::size_t shape, std::size_t top, std::size_t left, double intensity) {
  const auto& g = kGlyphs[shape];
  for (std::size_t r = 0; r < kGlyphSize; ++r)
    for (std::size_t q = 0; q < kGlyphSize; ++q)
      if (g[r][q] == '#') {
        const std::size_t idx = (top + r) * c.size + left + q;
        c.pixels[idx] = intensity;
        c.support[idx] = 1;
      }
}

std::size_t jittered(std::size_t anchor_top_left, std::size_t jitter, std::size_t lo, std::size_t hi,
                     std::mt19937_64& rng) {
  std::uniform_int_distribution<long> d(-long(jitter), long(jitter));
  const long pos = long(anchor_top_left) + d(rng);
  return std::size_t(std::clamp(pos, long(lo), long(hi)));
}

}  // namespace

std::string to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  throw FormatError("unknown split '" + name + "'");
}

std::size_t glyph_class_capacity() { return kGlyphShapes * (kGlyphShapes - 1) / 2; }

void SyntheticSpec::validate() const {
  if (num_classes < 2) throw ConfigError("datagen: need at least two classes");
  if (num_classes > glyph_class_capacity())
    throw ConfigError("datagen: " + std::to_string(num_classes) + " classes exceed glyph capacity " +
                      std::to_string(glyph_class_capacity()));
  if (cam_grid == 0 || image_size % cam_grid != 0)
    throw ConfigError("datagen: image size must be a multiple of the CAM grid");
  if (image_size < 2 * kGlyphSize + 2) throw ConfigError("datagen: image too small for glyph pairs");
  if (noise_std < 0.0) throw ConfigError("datagen: noise std must be >= 0");
}

Dataset generate_split(const SyntheticSpec& spec, Split split) {
  spec.validate();
  const std::size_t per_class = split == Split::Train ? spec.train_per_class
                                : split == Split::Val ? spec.val_per_class
                                                      : spec.test_per_class;
  const std::size_t S = spec.image_size, G = spec.cam_grid, cell = S / G;
  const bool pairs = spec.num_classes > kGlyphShapes;
  const std::size_t n = per_class * spec.num_classes;

  Dataset out;
  out.split = split;
  out.num_classes = spec.num_classes;
  out.images.reserve(n);
  out.labels.reserve(n);
  out.masks.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % spec.num_classes;
    std::mt19937_64 rng(image_seed(spec.seed, split, i));
    std::uniform_real_distribution<double> intensity(0.75, 1.0);
    Canvas c{Tensor({S, S}), std::vector<char>(S * S, 0), S};
    const std::size_t hi = S - kGlyphSize;

    if (!pairs) {
      const std::size_t anchor = (S - kGlyphSize) / 2;
      const std::size_t top = jittered(anchor, spec.jitter, 0, hi, rng);
      const std::size_t left = jittered(anchor, spec.jitter, 0, hi, rng);
      stamp(c, label, top, left, intensity(rng));
    } else {
      const auto [a, b] = pair_for_class(label);
      std::array<std::size_t, 4> quadrants{0, 1, 2, 3};
      std::shuffle(quadrants.begin(), quadrants.end(), rng);
      const std::size_t half = S / 2;
      const std::size_t room = (half - kGlyphSize) / 2;
      const std::size_t jit = std::min(spec.jitter, room);
      const std::size_t shapes[2] = {a, b};
      for (std::size_t g = 0; g < 2; ++g) {
        const std::size_t qy = quadrants[g] / 2, qx = quadrants[g] % 2;
        const std::size_t top = jittered(qy * half + room, jit, qy * half, qy * half + half - kGlyphSize, rng);
        const std::size_t left = jittered(qx * half + room, jit, qx * half, qx * half + half - kGlyphSize, rng);
        stamp(c, shapes[g], top, left, intensity(rng));
      }
    }

    if (spec.noise_std > 0.0) {
      std::normal_distribution<double> noise(0.0, spec.noise_std);
      for (auto& v : c.pixels.data()) v = std::clamp(v + noise(rng), 0.0, 1.0);
    }

    Tensor mask({G, G});
    for (std::size_t y = 0; y < S; ++y)
      for (std::size_t x = 0; x < S; ++x)
        if (c.support[y * S + x]) mask.at(y / cell, x / cell) = 1.0;

    out.images.push_back(c.pixels.reshaped({1, S, S}));
    out.labels.push_back(label);
    out.masks.push_back(std::move(mask));
  }
  return out;
}

SyntheticSplits generate_synthetic(const SyntheticSpec& spec) {
  return {generate_split(spec, Split::Train), generate_split(spec, Split::Val), generate_split(spec, Split::Test)};
}

Dataset load_folder(const std::filesystem::path& dir, std::size_t size, std::size_t num_classes) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("load_folder: not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  Dataset out;
  std::size_t max_label = 0;
  for (const auto& f : files) {
    const auto ext = f.extension().string();
    if (ext != ".pgm" && ext != ".ppm" && ext != ".pnm")
      throw FormatError("load_folder: unknown extension '" + ext + "' for " + f.string());
    const auto stem = f.stem().string();
    const auto sep = stem.find('_');
    std::size_t label = 0;
    try {
      std::size_t used = 0;
      label = std::stoul(stem.substr(0, sep), &used);
      if (sep == std::string::npos || used != sep) throw std::invalid_argument("bad");
    } catch (const std::exception&) {
      throw FormatError("load_folder: cannot parse label from '" + f.filename().string() + "'");
    }
    const Tensor img = read_pnm(f);
    const std::size_t ch = img.dim(0), h = img.dim(1), w = img.dim(2);
    Tensor gray({h, w});
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t i = 0; i < h * w; ++i) gray[i] += img[c * h * w + i] / double(ch);
    Tensor resized = (h == size && w == size) ? gray : resize_bilinear(gray, size, size);
    out.images.push_back(resized.reshaped({1, size, size}));
    out.labels.push_back(label);
    max_label = std::max(max_label, label);
  }
  out.num_classes = num_classes ? num_classes : (out.empty() ? 0 : max_label + 1);
  for (auto l : out.labels)
    if (l >= out.num_classes) throw FormatError("load_folder: label " + std::to_string(l) + " out of range");
  return out;
}

void save_dataset(const Dataset& data, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  if (data.has_masks()) fs::create_directories(dir / "masks");
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) throw IoError("cannot write " + (dir / "manifest.txt").string());
  manifest << "# camlab dataset manifest\n";
  manifest << "split " << to_string(data.split) << "\n";
  manifest << "classes " << data.num_classes << "\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "%zu_%05zu.pgm", data.labels[i], i);
    write_pgm(dir / "images" / name, data.images[i], 65535);
    manifest << "images/" << name << ' ' << data.labels[i];
    if (data.has_masks()) {
      write_pgm(dir / "masks" / name, data.masks[i], 65535);
      manifest << " masks/" << name;
    }
    manifest << "\n";
  }
  if (!manifest) throw IoError("write failed for manifest in " + dir.string());
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.txt");
  if (!in) throw IoError("cannot read " + (dir / "manifest.txt").string());
  Dataset out;
  std::string line;
  bool have_classes = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string first;
    ls >> first;
    if (first == "split") {
      std::string s;
      ls >> s;
      out.split = parse_split(s);
    } else if (first == "classes") {
      if (!(ls >> out.num_classes)) throw FormatError("manifest: bad class count");
      have_classes = true;
    } else {
      std::size_t label;
      if (!(ls >> label)) throw FormatError("manifest: bad entry '" + line + "'");
      Tensor img = read_pnm(dir / first);
      if (img.dim(0) != 1) throw FormatError("manifest: expected grayscale image " + first);
      out.images.push_back(std::move(img));
      out.labels.push_back(label);
      std::string mask;
      if (ls >> mask) {
        Tensor m = read_pnm(dir / mask);
        out.masks.push_back(m.reshaped({m.dim(1), m.dim(2)}));
      }
    }
  }
  if (!have_classes) throw FormatError("manifest: missing class count");
  if (!out.masks.empty() && out.masks.size() != out.images.size())
    throw FormatError("manifest: masks present for only some images");
  for (auto l : out.labels)
    if (l >= out.num_classes) throw FormatError("manifest: label " + std::to_string(l) + " out of range");
  return out;
}

Dataset take_per_class(const Dataset& data, std::size_t per_class) {
  Dataset out;
  out.split = data.split;
  out.num_classes = data.num_classes;
  std::vector<std::size_t> taken(data.num_classes, 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto l = data.labels[i];
    if (taken[l] >= per_class) continue;
    ++taken[l];
    out.images.push_back(data.images[i]);
    out.labels.push_back(l);
    if (data.has_masks()) out.masks.push_back(data.masks[i]);
  }
  return out;
}

}  // namespace camlab
