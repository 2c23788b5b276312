#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "camlab/model.hpp"
#include "camlab/tape.hpp"
#include "camlab/tensor.hpp"

namespace camlab {

/// Baseline over the competing logits.
enum class Aggregator { Mean, Max, Lse };

inline constexpr Aggregator kAggregators[] = {Aggregator::Mean, Aggregator::Max, Aggregator::Lse};

std::string_view to_string(Aggregator agg);
Aggregator parse_aggregator(std::string_view name);

/// What a CAM backpropagates: one logit, or the logit minus a baseline of
/// its competitors.
struct TargetSpec {
  enum class Kind { SingleLogit, Contrastive };
  Kind kind = Kind::SingleLogit;
  std::size_t cls = 0;
  Aggregator agg = Aggregator::Mean;

  static TargetSpec single(std::size_t c) { return {Kind::SingleLogit, c, Aggregator::Mean}; }
  static TargetSpec contrastive(std::size_t c, Aggregator a) { return {Kind::Contrastive, c, a}; }
  bool operator==(const TargetSpec&) const = default;
};

/// Logits with a designated class; competitors are every other entry.
class LogitVector {
 public:
  LogitVector(std::vector<double> values, std::size_t cls);
  LogitVector(const Tensor& values, std::size_t cls);

  std::size_t num_classes() const { return values_.size(); }
  std::size_t cls() const { return cls_; }
  double target() const { return values_[cls_]; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double> competitors() const;

 private:
  std::vector<double> values_;
  std::size_t cls_;
};

/// Mean, max, or log-mean-exp of the competing logits.
double beta(const LogitVector& logits, Aggregator agg);
/// y^c - beta(competitors).
double delta(const LogitVector& logits, Aggregator agg);
/// log(mean(exp(ys))), centered on the mean when the spread is small so the
/// result never drops below the arithmetic mean through rounding.
double log_mean_exp(const std::vector<double>& ys);

/// (softmax(y)[0], sigmoid(y1 - y2)) for a pair of logits.
std::pair<double, double> softmax_sigmoid_identity(double y1, double y2);

/// Records the scalar target on `tape` from a logits node.
Var target_node(Tape& tape, Var logits, const TargetSpec& target);

// --- Maps ------------------------------------------------------------------

struct SaliencyMap {
  Tensor raw;         // [u,v]
  Tensor normalized;  // [u,v], in [0,1]
  std::string method;
  std::optional<TargetSpec> target;
};

/// (x - min) / (max - min); a constant input maps to zeros.
Tensor normalize_minmax(const Tensor& raw);
/// Corner-aligned bilinear resize of a [u,v] grid to [H,W].
Tensor upsample_bilinear(const Tensor& map, std::size_t height, std::size_t width);

/// Activation stack A[K,u,v] and d target / dA from one forward/backward.
struct CamInputs {
  Tensor activations;
  Tensor gradients;
  Tensor logits;
};

CamInputs capture(const Model& model, const Tensor& image, const TargetSpec& target);

struct ChannelWeights {
  Tensor channel;                      // [K]
  std::optional<Tensor> per_location;  // [K,u,v] (++ methods)
};

ChannelWeights gradcam_weights(const Tensor& gradients);
ChannelWeights gradcam_pp_weights(const Tensor& activations, const Tensor& gradients);
ChannelWeights xgradcam_weights(const Tensor& activations, const Tensor& gradients);

/// ReLU(sum_k w_k A_k).
Tensor weighted_channel_sum(const Tensor& activations, const Tensor& weights);

Tensor gradcam_raw(const Tensor& activations, const Tensor& gradients);
Tensor gradcam_pp_raw(const Tensor& activations, const Tensor& gradients);
Tensor hirescam_raw(const Tensor& activations, const Tensor& gradients);
Tensor xgradcam_raw(const Tensor& activations, const Tensor& gradients);
/// Projection of the activations on their leading right singular vector,
/// signed to have non-negative mean.
Tensor eigencam_raw(const Tensor& activations);

SaliencyMap gradcam(const Model& model, const Tensor& image, const TargetSpec& target);
SaliencyMap gradcam_pp(const Model& model, const Tensor& image, const TargetSpec& target);
SaliencyMap hirescam(const Model& model, const Tensor& image, const TargetSpec& target);
SaliencyMap xgradcam(const Model& model, const Tensor& image, const TargetSpec& target);
SaliencyMap eigencam(const Model& model, const Tensor& image);
SaliencyMap scorecam(const Model& model, const Tensor& image, const TargetSpec& target);

/// GradCAM of `target` recorded on the tape so it can be trained through.
/// Returns the ReLU-gated raw map [u,v].
Var gradcam_graph(Tape& tape, Var activations, Var target);

// --- Method registry -------------------------------------------------------

enum class CamFamily { GradCam, GradCamPP, HiResCam, XGradCam, EigenCam, ScoreCam };

struct MethodId {
  CamFamily family = CamFamily::GradCam;
  std::optional<Aggregator> agg;  // set for the Diff variants

  std::string name() const;
  bool operator==(const MethodId&) const = default;
};

MethodId parse_method(std::string_view name);
/// The twelve evaluated methods, in report order.
std::vector<MethodId> all_methods();
SaliencyMap run_method(const Model& model, const Tensor& image, const MethodId& method, std::size_t cls);

}  // namespace camlab
