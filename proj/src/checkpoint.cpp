#include "camlab/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "camlab/errors.hpp"

namespace camlab {

namespace {

using json = nlohmann::json;

constexpr char kMagic[7] = {'C', 'A', 'M', 'L', 'A', 'B', '1'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

json config_json(const ModelConfig& c) {
  return {{"input_height", c.input_height}, {"input_width", c.input_width}, {"channels", c.channels},
          {"conv_widths", c.conv_widths},   {"cam_height", c.cam_height},   {"cam_width", c.cam_width},
          {"num_classes", c.num_classes},   {"seed", c.seed}};
}

ModelConfig config_of(const json& j) {
  ModelConfig c;
  c.input_height = j.at("input_height").get<std::size_t>();
  c.input_width = j.at("input_width").get<std::size_t>();
  c.channels = j.at("channels").get<std::size_t>();
  c.conv_widths = j.at("conv_widths").get<std::vector<std::size_t>>();
  c.cam_height = j.at("cam_height").get<std::size_t>();
  c.cam_width = j.at("cam_width").get<std::size_t>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is, const std::string& what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("checkpoint: truncated " + what);
  return v;
}

}  // namespace

std::string config_to_json(const ModelConfig& config) { return config_json(config).dump(); }

ModelConfig config_from_json(const std::string& text) {
  try {
    return config_of(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const Metadata& metadata) {
  json header;
  header["config"] = config_json(model.config());
  header["metadata"] = metadata;
  json dir = json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : model.params()) {
    dir.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size() * sizeof(double);
  }
  header["tensors"] = dir;
  header["payload_bytes"] = offset;
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("checkpoint: cannot open " + path.string() + " for writing");
  os.write(kMagic, sizeof kMagic);
  put(os, kVersion);
  put(os, std::uint64_t(text.size()));
  os.write(text.data(), std::streamsize(text.size()));
  for (const auto& [name, t] : model.params()) {
    const auto d = t.data();
    os.write(reinterpret_cast<const char*>(d.data()), std::streamsize(d.size() * sizeof(double)));
  }
  if (!os) throw IoError("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open " + path.string());
  char magic[sizeof kMagic];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw FormatError("checkpoint: bad magic in " + path.string());
  const auto version = get<std::uint32_t>(is, "version");
  if (version != kVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  const auto len = get<std::uint64_t>(is, "header length");
  if (len > (std::uint64_t(1) << 30)) throw FormatError("checkpoint: implausible header length");
  std::string text(len, '\0');
  if (!is.read(text.data(), std::streamsize(len))) throw FormatError("checkpoint: truncated header");

  ModelConfig config;
  Metadata metadata;
  std::vector<std::pair<std::string, Shape>> entries;
  try {
    const json header = json::parse(text);
    config = config_of(header.at("config"));
    metadata = header.at("metadata").get<Metadata>();
    std::size_t expect = 0;
    for (const auto& e : header.at("tensors")) {
      if (e.at("offset").get<std::size_t>() != expect) throw FormatError("checkpoint: non-contiguous tensor directory");
      Shape s = e.at("shape").get<Shape>();
      expect += numel(s) * sizeof(double);
      entries.emplace_back(e.at("name").get<std::string>(), std::move(s));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: bad header: ") + e.what());
  }

  std::vector<NamedTensor> params;
  for (auto& [name, shape] : entries) {
    std::vector<double> values(numel(shape));
    if (!is.read(reinterpret_cast<char*>(values.data()), std::streamsize(values.size() * sizeof(double))))
      throw FormatError("checkpoint: truncated payload for " + name);
    params.emplace_back(name, Tensor(shape, std::move(values)));
  }
  try {
    return {Model(config, std::move(params)), std::move(metadata)};
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace camlab
