#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "camlab/datagen.hpp"
#include "camlab/model.hpp"

namespace camlab {

/// Where the salience target of each training sample comes from.
enum class SalienceSource { None, Sham, Mask };

std::string to_string(SalienceSource s);
SalienceSource parse_salience_source(const std::string& name);

struct TrainConfig {
  double learning_rate = 0.002;
  std::size_t epochs = 50;
  double ce_weight = 1.0;
  double sal_weight = 1.0;
  std::size_t batch_size = 1;
  SalienceSource salience = SalienceSource::None;
  std::uint64_t seed = 17;
  std::size_t threads = 1;

  void validate() const;
};

struct LossParts {
  double total = 0.0;
  double ce = 0.0;
  double sal = 0.0;
};

struct SampleGradient {
  std::vector<Tensor> grads;  // aligned with Model::params()
  LossParts loss;
  bool correct = false;
};

/// Loss of one sample: ce_weight * CE + sal_weight * MSE(normalized
/// true-class GradCAM, salience target). A null target drops the MSE term.
SampleGradient sample_gradient(const Model& model, const Tensor& image, std::size_t label,
                               const Tensor* salience_target, double ce_weight, double sal_weight);

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  double ce = 0.0;
  double sal = 0.0;
  double accuracy = 0.0;  // on the fly, before each update
};

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
};

/// Plain SGD over shuffled mini-batches (mean of per-sample gradients).
/// `sham` is required when tc.salience == Sham; dataset masks when Mask.
TrainResult train(const Model& model, const Dataset& data, const TrainConfig& tc,
                  const Tensor* sham = nullptr);

/// tc.epochs of combined-loss training with `sham` as every sample's target.
TrainResult finetune_sham(const Model& model, const Dataset& data, const Tensor& sham, TrainConfig tc);

}  // namespace camlab
