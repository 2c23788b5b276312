#include "camlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "camlab/errors.hpp"

namespace camlab {

void ModelConfig::validate() const {
  if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
  if (conv_widths.empty()) throw ConfigError("model: at least one conv block required");
  if (channels == 0 || input_height == 0 || input_width == 0) throw ConfigError("model: empty input");
  for (auto w : conv_widths)
    if (w == 0) throw ConfigError("model: conv width must be positive");
  std::size_t h = input_height, w = input_width;
  for (std::size_t b = 0; b + 1 < conv_widths.size(); ++b) {
    if (h % 2 || w % 2)
      throw ConfigError("model: input " + std::to_string(input_height) + "x" + std::to_string(input_width) +
                        " does not halve cleanly through " + std::to_string(conv_widths.size()) + " blocks");
    h /= 2;
    w /= 2;
  }
  if (h != cam_height || w != cam_width)
    throw ConfigError("model: final conv grid " + std::to_string(h) + "x" + std::to_string(w) +
                      " does not match CAM grid " + std::to_string(cam_height) + "x" + std::to_string(cam_width));
}

Model::Model(ModelConfig config, std::vector<NamedTensor> params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  const std::size_t expected = 2 * config_.conv_widths.size() + 2;
  if (params_.size() != expected)
    throw ConfigError("model: expected " + std::to_string(expected) + " parameter tensors, got " +
                      std::to_string(params_.size()));
  std::size_t in_ch = config_.channels;
  for (std::size_t b = 0; b < config_.conv_widths.size(); ++b) {
    const std::size_t out_ch = config_.conv_widths[b];
    if (params_[2 * b].second.shape() != Shape{out_ch, in_ch, 3, 3} || params_[2 * b + 1].second.shape() != Shape{out_ch})
      throw ShapeError("model: conv block " + std::to_string(b) + " parameters have the wrong shape");
    in_ch = out_ch;
  }
  const auto& hw = params_[params_.size() - 2].second;
  const auto& hb = params_.back().second;
  if (hw.shape() != Shape{config_.num_classes, in_ch} || hb.shape() != Shape{config_.num_classes})
    throw ShapeError("model: head parameters have the wrong shape");
}

const Tensor& Model::param(std::string_view name) const {
  for (const auto& [n, t] : params_)
    if (n == name) return t;
  throw std::out_of_range("model: no parameter named " + std::string(name));
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

std::vector<Var> Model::bind(Tape& tape, bool trainable) const {
  std::vector<Var> out;
  out.reserve(params_.size());
  for (const auto& [name, t] : params_) out.push_back(tape.leaf(t, trainable));
  return out;
}

Var Model::features(Tape& tape, const std::vector<Var>& bound, Var image) const {
  const auto& in = tape.value(image);
  if (in.shape() != config_.input_shape())
    throw ShapeError("forward: image " + shape_str(in.shape()) + " vs configured input " +
                     shape_str(config_.input_shape()));
  Var x = image;
  const std::size_t blocks = config_.conv_widths.size();
  for (std::size_t b = 0; b < blocks; ++b) {
    if (b > 0) x = tape.max_pool2d(x, 2);
    x = tape.relu(tape.conv2d(x, bound[2 * b], bound[2 * b + 1], {.stride = 1, .padding = 1}));
  }
  return x;
}

Var Model::head(Tape& tape, const std::vector<Var>& bound, Var activations) const {
  Var pooled = tape.global_avg_pool(activations);
  return tape.dense(pooled, bound[bound.size() - 2], bound.back());
}

Model build(const ModelConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  auto he = [&rng](Shape shape, std::size_t fan_in) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / double(fan_in)));
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = dist(rng);
    return t;
  };
  std::vector<NamedTensor> params;
  std::size_t in_ch = config.channels;
  for (std::size_t b = 0; b < config.conv_widths.size(); ++b) {
    const std::size_t out_ch = config.conv_widths[b];
    const std::string prefix = "conv" + std::to_string(b + 1);
    params.emplace_back(prefix + ".weight", he({out_ch, in_ch, 3, 3}, in_ch * 9));
    params.emplace_back(prefix + ".bias", Tensor({out_ch}));
    in_ch = out_ch;
  }
  params.emplace_back("head.weight", he({config.num_classes, in_ch}, in_ch));
  params.emplace_back("head.bias", Tensor({config.num_classes}));
  return Model(config, std::move(params));
}

ForwardPass forward_with_activations(const Model& model, const Tensor& image) {
  ForwardPass fp;
  auto bound = model.bind(fp.tape, false);
  fp.image = fp.tape.constant(image);
  fp.activations = model.features(fp.tape, bound, fp.image);
  fp.logits = model.head(fp.tape, bound, fp.activations);
  return fp;
}

Tensor predict_logits(const Model& model, const Tensor& image) {
  auto fp = forward_with_activations(model, image);
  return fp.logit_values();
}

std::size_t predict(const Model& model, const Tensor& image) {
  const auto logits = predict_logits(model, image);
  const auto d = logits.data();
  return std::size_t(std::max_element(d.begin(), d.end()) - d.begin());
}

}  // namespace camlab
