#include "camlab/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "camlab/cam.hpp"
#include "camlab/errors.hpp"
#include "camlab/parallel.hpp"

namespace camlab {

std::string to_string(SalienceSource s) {
  switch (s) {
    case SalienceSource::None: return "none";
    case SalienceSource::Sham: return "sham";
    case SalienceSource::Mask: return "mask";
  }
  return "?";
}

SalienceSource parse_salience_source(const std::string& name) {
  if (name == "none") return SalienceSource::None;
  if (name == "sham") return SalienceSource::Sham;
  if (name == "mask") return SalienceSource::Mask;
  throw ConfigError("unknown salience source '" + name + "' (expected none|sham|mask)");
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("train: learning rate must be >= 0");
  if (ce_weight < 0.0 || sal_weight < 0.0) throw ConfigError("train: loss weights must be >= 0");
  if (ce_weight == 0.0 && sal_weight == 0.0) throw ConfigError("train: loss weights cannot both be zero");
  if (batch_size == 0) throw ConfigError("train: batch size must be positive");
}

SampleGradient sample_gradient(const Model& model, const Tensor& image, std::size_t label,
                               const Tensor* salience_target, double ce_weight, double sal_weight) {
  if (label >= model.config().num_classes)
    throw std::out_of_range("train: label " + std::to_string(label) + " out of range");
  Tape tape;
  const auto params = model.bind(tape, true);
  Var x = tape.constant(image);
  Var acts = model.features(tape, params, x);
  Var logits = model.head(tape, params, acts);

  Var ce = tape.scale(tape.select(tape.log_softmax(logits), {label}), -1.0);
  Var total = tape.scale(ce, ce_weight);
  SampleGradient out;
  out.loss.ce = tape.value(ce).item();

  if (salience_target && sal_weight > 0.0) {
    const Tensor& target = *salience_target;
    const auto& a = tape.value(acts);
    if (target.shape() != Shape{a.dim(1), a.dim(2)})
      throw ShapeError("train: salience target " + shape_str(target.shape()) + " vs CAM grid " +
                       shape_str({a.dim(1), a.dim(2)}));
    Var cam = gradcam_graph(tape, acts, tape.select(logits, {label}));
    Var diff = tape.sub(tape.minmax_normalize(cam), tape.constant(target));
    Var mse = tape.scale(tape.sum(tape.mul(diff, diff)), 1.0 / double(target.size()));
    out.loss.sal = tape.value(mse).item();
    total = tape.add(total, tape.scale(mse, sal_weight));
  }
  out.loss.total = tape.value(total).item();

  const auto& lv = tape.value(logits).values();
  out.correct = std::size_t(std::max_element(lv.begin(), lv.end()) - lv.begin()) == label;

  auto grads = tape.backward(total);
  out.grads.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    out.grads.push_back(grads.has(params[i]) ? grads.of(params[i]) : Tensor(tape.value(params[i]).shape()));
  return out;
}

TrainResult train(const Model& model, const Dataset& data, const TrainConfig& tc, const Tensor* sham) {
  tc.validate();
  if (data.empty()) throw ConfigError("train: empty dataset");
  for (auto l : data.labels)
    if (l >= model.config().num_classes) throw ConfigError("train: label " + std::to_string(l) + " out of range");
  if (tc.salience == SalienceSource::Sham && !sham) throw ConfigError("train: SHAM salience requested without a mask");
  if (tc.salience == SalienceSource::Mask && !data.has_masks())
    throw ConfigError("train: mask salience requested but the dataset has no masks");

  TrainResult result{model, {}};
  auto& params = result.model.params();
  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);

  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(tc.seed * 1000003u + epoch);
    std::shuffle(order.begin(), order.end(), rng);

    EpochLog log;
    log.epoch = epoch + 1;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += tc.batch_size) {
      const std::size_t bs = std::min(tc.batch_size, n - start);
      std::vector<SampleGradient> per(bs);
      parallel_for(bs, tc.threads, [&](std::size_t b) {
        const std::size_t i = order[start + b];
        const Tensor* target = tc.salience == SalienceSource::Sham   ? sham
                               : tc.salience == SalienceSource::Mask ? &data.masks[i]
                                                                     : nullptr;
        per[b] = sample_gradient(result.model, data.images[i], data.labels[i], target, tc.ce_weight,
                                 target ? tc.sal_weight : 0.0);
      });
      const double step = tc.learning_rate / double(bs);
      for (std::size_t b = 0; b < bs; ++b) {
        log.loss += per[b].loss.total;
        log.ce += per[b].loss.ce;
        log.sal += per[b].loss.sal;
        correct += per[b].correct;
      }
      if (step == 0.0) continue;
      for (std::size_t p = 0; p < params.size(); ++p) {
        auto dst = params[p].second.data();
        for (std::size_t b = 0; b < bs; ++b) {
          const auto g = per[b].grads[p].data();
          for (std::size_t k = 0; k < dst.size(); ++k) dst[k] -= step * g[k];
        }
      }
    }
    log.loss /= double(n);
    log.ce /= double(n);
    log.sal /= double(n);
    log.accuracy = double(correct) / double(n);
    for (const auto& [name, t] : params)
      if (!t.all_finite()) throw NumericError("train: parameter " + name + " became non-finite");
    result.log.push_back(log);
  }
  return result;
}

TrainResult finetune_sham(const Model& model, const Dataset& data, const Tensor& sham, TrainConfig tc) {
  const auto& cfg = model.config();
  if (sham.shape() != Shape{cfg.cam_height, cfg.cam_width})
    throw ShapeError("finetune_sham: mask " + shape_str(sham.shape()) + " does not match CAM grid");
  tc.salience = SalienceSource::Sham;
  return train(model, data, tc, &sham);
}

}  // namespace camlab
