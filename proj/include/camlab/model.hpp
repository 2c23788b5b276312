#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "camlab/tape.hpp"
#include "camlab/tensor.hpp"

namespace camlab {

/// Architecture of the toy classifier: `conv_widths.size()` blocks of
/// 3x3 conv (zero padding 1) + ReLU, 2x2 max pooling between blocks,
/// global average pooling, and a dense head over `num_classes` logits.
struct ModelConfig {
  std::size_t input_height = 28;
  std::size_t input_width = 28;
  std::size_t channels = 1;
  std::vector<std::size_t> conv_widths{8, 16, 32};
  std::size_t cam_height = 7;
  std::size_t cam_width = 7;
  std::size_t num_classes = 7;
  std::uint64_t seed = 17;

  /// Throws ConfigError when the spatial arithmetic or class count is invalid.
  void validate() const;
  std::size_t feature_channels() const { return conv_widths.back(); }
  Shape input_shape() const { return {channels, input_height, input_width}; }

  bool operator==(const ModelConfig&) const = default;
};

using NamedTensor = std::pair<std::string, Tensor>;

class Model {
 public:
  Model() = default;
  Model(ModelConfig config, std::vector<NamedTensor> params);

  const ModelConfig& config() const { return config_; }
  const std::vector<NamedTensor>& params() const { return params_; }
  std::vector<NamedTensor>& params() { return params_; }
  const Tensor& param(std::string_view name) const;
  std::size_t parameter_count() const;

  /// Registers every parameter on `tape`, in params() order.
  std::vector<Var> bind(Tape& tape, bool trainable) const;
  /// Final-conv activation stack A[K,u,v].
  Var features(Tape& tape, const std::vector<Var>& bound, Var image) const;
  /// Logits [C] from an activation stack.
  Var head(Tape& tape, const std::vector<Var>& bound, Var activations) const;

  bool operator==(const Model&) const = default;

 private:
  ModelConfig config_;
  std::vector<NamedTensor> params_;
};

/// He-initialised model; deterministic in config.seed.
Model build(const ModelConfig& config);

struct ForwardPass {
  Tape tape;
  Var image;
  Var activations;
  Var logits;

  const Tensor& logit_values() const { return tape.value(logits); }
  const Tensor& activation_values() const { return tape.value(activations); }
};

/// Forward pass with parameters recorded as constants; the tape is kept so
/// gradients with respect to the activations can be taken afterwards.
ForwardPass forward_with_activations(const Model& model, const Tensor& image);

/// Logits only.
Tensor predict_logits(const Model& model, const Tensor& image);
std::size_t predict(const Model& model, const Tensor& image);

}  // namespace camlab
