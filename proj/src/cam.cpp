#include "camlab/cam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "camlab/errors.hpp"
#include "camlab/imageio.hpp"

namespace camlab {

std::string_view to_string(Aggregator agg) {
  switch (agg) {
    case Aggregator::Mean: return "Mean";
    case Aggregator::Max: return "Max";
    case Aggregator::Lse: return "LSE";
  }
  return "?";
}

Aggregator parse_aggregator(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  if (s == "mean") return Aggregator::Mean;
  if (s == "max") return Aggregator::Max;
  if (s == "lse") return Aggregator::Lse;
  throw ConfigError("unknown aggregator '" + std::string(name) + "'");
}

LogitVector::LogitVector(std::vector<double> values, std::size_t cls) : values_(std::move(values)), cls_(cls) {
  if (values_.size() < 2) throw std::invalid_argument("logits: need at least two classes");
  if (cls_ >= values_.size())
    throw std::out_of_range("logits: class " + std::to_string(cls_) + " out of range for " +
                            std::to_string(values_.size()) + " classes");
}

LogitVector::LogitVector(const Tensor& values, std::size_t cls) : LogitVector(values.values(), cls) {}

std::vector<double> LogitVector::competitors() const {
  std::vector<double> out;
  out.reserve(values_.size() - 1);
  for (std::size_t j = 0; j < values_.size(); ++j)
    if (j != cls_) out.push_back(values_[j]);
  return out;
}

double beta(const LogitVector& logits, Aggregator agg) {
  const auto comp = logits.competitors();
  const double n = double(comp.size());
  switch (agg) {
    case Aggregator::Mean:
      return std::accumulate(comp.begin(), comp.end(), 0.0) / n;
    case Aggregator::Max:
      return *std::max_element(comp.begin(), comp.end());
    case Aggregator::Lse:
      return log_mean_exp(comp);
  }
  throw std::logic_error("beta: bad aggregator");
}

double log_mean_exp(const std::vector<double>& ys) {
  const double n = double(ys.size());
  const double m = *std::max_element(ys.begin(), ys.end());
  const double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  if (m - mean < 1.0) {
    double s = 0.0;
    for (double y : ys) s += std::expm1(y - mean);
    return std::min(m, mean + std::log1p(std::max(s, 0.0) / n));
  }
  double s = 0.0;
  for (double y : ys) s += std::exp(y - m);
  return m + std::log(s / n);
}

double delta(const LogitVector& logits, Aggregator agg) { return logits.target() - beta(logits, agg); }

std::pair<double, double> softmax_sigmoid_identity(double y1, double y2) {
  const double m = std::max(y1, y2);
  const double e1 = std::exp(y1 - m), e2 = std::exp(y2 - m);
  const double soft = e1 / (e1 + e2);
  const double d = y1 - y2;
  // Evaluate the sigmoid on whichever side keeps exp() from overflowing.
  const double sig = d >= 0.0 ? 1.0 / (1.0 + std::exp(-d)) : std::exp(d) / (1.0 + std::exp(d));
  return {soft, sig};
}

Var target_node(Tape& tape, Var logits, const TargetSpec& target) {
  const auto& y = tape.value(logits);
  const std::size_t C = y.size();
  if (target.cls >= C)
    throw std::out_of_range("target: class " + std::to_string(target.cls) + " out of range for " +
                            std::to_string(C) + " logits");
  Var yc = tape.select(logits, {target.cls});
  if (target.kind == TargetSpec::Kind::SingleLogit) return yc;
  if (C < 2) throw std::invalid_argument("target: contrastive target needs at least two classes");

  std::vector<std::size_t> others;
  for (std::size_t j = 0; j < C; ++j)
    if (j != target.cls) others.push_back(j);
  const double inv = 1.0 / double(others.size());
  Var comp = tape.select(logits, others);
  Var base;
  switch (target.agg) {
    case Aggregator::Mean:
      base = tape.scale(tape.sum(comp), inv);
      break;
    case Aggregator::Max:
      base = tape.max_over(comp, 0);
      break;
    case Aggregator::Lse: {
      // The shift is a constant: log-mean-exp is shift-equivariant, so the
      // gradient is unaffected.
      Var shift = tape.constant(Tensor::scalar(tape.value(comp).max()));
      Var shifted = tape.sub(comp, tape.broadcast_to(shift, {others.size()}));
      base = tape.add(tape.log(tape.scale(tape.sum(tape.exp(shifted)), inv)), shift);
      break;
    }
  }
  return tape.sub(yc, base);
}

// ---------------------------------------------------------------------------

Tensor normalize_minmax(const Tensor& raw) {
  Tensor out(raw.shape());
  const double lo = raw.min(), hi = raw.max();
  if (!(hi > lo)) return out;
  const double range = hi - lo;
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - lo) / range;
  return out;
}

Tensor upsample_bilinear(const Tensor& map, std::size_t height, std::size_t width) {
  if (map.rank() != 2) throw ShapeError("upsample_bilinear: expected [u,v], got " + shape_str(map.shape()));
  if (height < map.dim(0) || width < map.dim(1))
    throw ShapeError("upsample_bilinear: target " + std::to_string(height) + "x" + std::to_string(width) +
                     " smaller than " + shape_str(map.shape()));
  return resize_bilinear(map, height, width);
}

CamInputs capture(const Model& model, const Tensor& image, const TargetSpec& target) {
  auto fp = forward_with_activations(model, image);
  Var t = target_node(fp.tape, fp.logits, target);
  const Var wrt[] = {fp.activations};
  auto grads = fp.tape.backward(t, wrt);
  return {fp.activation_values(), grads.of(fp.activations), fp.logit_values()};
}

namespace {

void expect_stack(const Tensor& a, const Tensor& g) {
  if (a.rank() != 3) throw ShapeError("cam: activations must be [K,u,v], got " + shape_str(a.shape()));
  if (a.shape() != g.shape()) throw ShapeError("cam: gradient " + shape_str(g.shape()) + " vs activations " + shape_str(a.shape()));
}

SaliencyMap finish(Tensor raw, std::string method, std::optional<TargetSpec> target) {
  SaliencyMap m;
  m.normalized = normalize_minmax(raw);
  m.raw = std::move(raw);
  m.method = std::move(method);
  m.target = target;
  return m;
}

std::string family_name(CamFamily f) {
  switch (f) {
    case CamFamily::GradCam: return "GradCAM";
    case CamFamily::GradCamPP: return "GradCAM++";
    case CamFamily::HiResCam: return "HiResCAM";
    case CamFamily::XGradCam: return "XGradCAM";
    case CamFamily::EigenCam: return "EigenCAM";
    case CamFamily::ScoreCam: return "ScoreCAM";
  }
  return "?";
}

std::string target_method_name(CamFamily f, const TargetSpec& t) {
  if (t.kind == TargetSpec::Kind::SingleLogit) return family_name(f);
  return std::string(to_string(t.agg)) + "Diff" + family_name(f);
}

}  // namespace

ChannelWeights gradcam_weights(const Tensor& gradients) {
  if (gradients.rank() != 3) throw ShapeError("gradcam: gradient must be [K,u,v], got " + shape_str(gradients.shape()));
  const std::size_t K = gradients.dim(0), Z = gradients.dim(1) * gradients.dim(2);
  Tensor alpha({K});
  for (std::size_t k = 0; k < K; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < Z; ++i) s += gradients[k * Z + i];
    alpha[k] = s / double(Z);
  }
  return {std::move(alpha), std::nullopt};
}

ChannelWeights gradcam_pp_weights(const Tensor& activations, const Tensor& gradients) {
  expect_stack(activations, gradients);
  const std::size_t K = activations.dim(0), Z = activations.dim(1) * activations.dim(2);
  Tensor w({K});
  Tensor coeff(activations.shape());
  for (std::size_t k = 0; k < K; ++k) {
    double sum_a = 0.0;
    for (std::size_t i = 0; i < Z; ++i) sum_a += activations[k * Z + i];
    double wk = 0.0;
    for (std::size_t i = 0; i < Z; ++i) {
      const double g = gradients[k * Z + i];
      const double g2 = g * g;
      const double denom = 2.0 * g2 + sum_a * g2 * g;
      const double a = std::abs(denom) < 1e-12 ? 0.0 : g2 / denom;
      coeff[k * Z + i] = a;
      wk += a * std::max(g, 0.0);
    }
    w[k] = wk;
  }
  return {std::move(w), std::move(coeff)};
}

ChannelWeights xgradcam_weights(const Tensor& activations, const Tensor& gradients) {
  expect_stack(activations, gradients);
  const std::size_t K = activations.dim(0), Z = activations.dim(1) * activations.dim(2);
  Tensor w({K});
  for (std::size_t k = 0; k < K; ++k) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < Z; ++i) {
      num += activations[k * Z + i] * gradients[k * Z + i];
      den += activations[k * Z + i];
    }
    w[k] = num / (den + 1e-8);
  }
  return {std::move(w), std::nullopt};
}

Tensor weighted_channel_sum(const Tensor& activations, const Tensor& weights) {
  if (activations.rank() != 3 || weights.size() != activations.dim(0))
    throw ShapeError("cam: weights " + shape_str(weights.shape()) + " vs activations " + shape_str(activations.shape()));
  const std::size_t K = activations.dim(0), u = activations.dim(1), v = activations.dim(2);
  Tensor out({u, v});
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t i = 0; i < u * v; ++i) out[i] += weights[k] * activations[k * u * v + i];
  for (auto& x : out.data()) x = std::max(x, 0.0);
  return out;
}

Tensor gradcam_raw(const Tensor& activations, const Tensor& gradients) {
  expect_stack(activations, gradients);
  return weighted_channel_sum(activations, gradcam_weights(gradients).channel);
}

Tensor gradcam_pp_raw(const Tensor& activations, const Tensor& gradients) {
  return weighted_channel_sum(activations, gradcam_pp_weights(activations, gradients).channel);
}

Tensor hirescam_raw(const Tensor& activations, const Tensor& gradients) {
  expect_stack(activations, gradients);
  const std::size_t K = activations.dim(0), u = activations.dim(1), v = activations.dim(2);
  Tensor out({u, v});
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t i = 0; i < u * v; ++i) out[i] += gradients[k * u * v + i] * activations[k * u * v + i];
  for (auto& x : out.data()) x = std::max(x, 0.0);
  return out;
}

Tensor xgradcam_raw(const Tensor& activations, const Tensor& gradients) {
  return weighted_channel_sum(activations, xgradcam_weights(activations, gradients).channel);
}

Tensor eigencam_raw(const Tensor& activations) {
  if (activations.rank() != 3) throw ShapeError("eigencam: activations must be [K,u,v], got " + shape_str(activations.shape()));
  const std::size_t K = activations.dim(0), u = activations.dim(1), v = activations.dim(2), P = u * v;
  // Gram matrix of the K x P activation matrix; its leading eigenvector u1
  // gives the leading right singular direction as M^T u1.
  std::vector<double> gram(K * K, 0.0);
  for (std::size_t a = 0; a < K; ++a)
    for (std::size_t b = a; b < K; ++b) {
      double s = 0.0;
      for (std::size_t p = 0; p < P; ++p) s += activations[a * P + p] * activations[b * P + p];
      gram[a * K + b] = gram[b * K + a] = s;
    }
  std::vector<double> vec(K), next(K);
  for (std::size_t k = 0; k < K; ++k) vec[k] = std::sqrt(gram[k * K + k]) + 1e-3 * double(k + 1);
  auto normalize = [](std::vector<double>& x) {
    double n = 0.0;
    for (double e : x) n += e * e;
    n = std::sqrt(n);
    if (n > 0.0)
      for (double& e : x) e /= n;
    return n;
  };
  normalize(vec);
  for (int it = 0; it < 10000; ++it) {
    for (std::size_t a = 0; a < K; ++a) {
      double s = 0.0;
      for (std::size_t b = 0; b < K; ++b) s += gram[a * K + b] * vec[b];
      next[a] = s;
    }
    if (normalize(next) == 0.0) return Tensor({u, v});
    double diff = 0.0;
    for (std::size_t k = 0; k < K; ++k) diff = std::max(diff, std::abs(next[k] - vec[k]));
    vec.swap(next);
    if (diff < 1e-15) break;
  }
  Tensor out({u, v});
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t p = 0; p < P; ++p) out[p] += vec[k] * activations[k * P + p];
  if (out.sum() < 0.0)
    for (auto& x : out.data()) x = -x;
  return out;
}

SaliencyMap gradcam(const Model& model, const Tensor& image, const TargetSpec& target) {
  const auto in = capture(model, image, target);
  return finish(gradcam_raw(in.activations, in.gradients), target_method_name(CamFamily::GradCam, target), target);
}

SaliencyMap gradcam_pp(const Model& model, const Tensor& image, const TargetSpec& target) {
  const auto in = capture(model, image, target);
  return finish(gradcam_pp_raw(in.activations, in.gradients), target_method_name(CamFamily::GradCamPP, target), target);
}

SaliencyMap hirescam(const Model& model, const Tensor& image, const TargetSpec& target) {
  const auto in = capture(model, image, target);
  return finish(hirescam_raw(in.activations, in.gradients), target_method_name(CamFamily::HiResCam, target), target);
}

SaliencyMap xgradcam(const Model& model, const Tensor& image, const TargetSpec& target) {
  const auto in = capture(model, image, target);
  return finish(xgradcam_raw(in.activations, in.gradients), target_method_name(CamFamily::XGradCam, target), target);
}

SaliencyMap eigencam(const Model& model, const Tensor& image) {
  auto fp = forward_with_activations(model, image);
  return finish(eigencam_raw(fp.activation_values()), "EigenCAM", std::nullopt);
}

SaliencyMap scorecam(const Model& model, const Tensor& image, const TargetSpec& target) {
  const auto base = forward_with_activations(model, image);
  const Tensor& acts = base.activation_values();
  if (target.cls >= model.config().num_classes)
    throw std::out_of_range("scorecam: class " + std::to_string(target.cls) + " out of range");
  const std::size_t K = acts.dim(0), u = acts.dim(1), v = acts.dim(2);
  const std::size_t ch = image.dim(0), H = image.dim(1), W = image.dim(2);

  std::vector<double> scores(K);
  Tensor plane({u, v});
  for (std::size_t k = 0; k < K; ++k) {
    std::copy_n(acts.data().begin() + std::ptrdiff_t(k * u * v), u * v, plane.data().begin());
    const Tensor mask = normalize_minmax(upsample_bilinear(plane, H, W));
    Tensor masked = image;
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t i = 0; i < H * W; ++i) masked[c * H * W + i] *= mask[i];
    auto fp = forward_with_activations(model, masked);
    scores[k] = fp.tape.value(target_node(fp.tape, fp.logits, target)).item();
  }
  const double m = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double& s : scores) z += (s = std::exp(s - m));
  Tensor weights({K});
  for (std::size_t k = 0; k < K; ++k) weights[k] = scores[k] / z;
  return finish(weighted_channel_sum(acts, weights), target_method_name(CamFamily::ScoreCam, target), target);
}

Var gradcam_graph(Tape& tape, Var activations, Var target) {
  const Shape shape = tape.value(activations).shape();
  if (shape.size() != 3) throw ShapeError("gradcam_graph: activations must be [K,u,v], got " + shape_str(shape));
  const Var wrt[] = {activations};
  Var g = tape.grad_graph(target, wrt)[0];
  const double Z = double(shape[1] * shape[2]);
  Var alpha = tape.scale(tape.sum_over(g, {1, 2}), 1.0 / Z);
  Var weighted = tape.mul(tape.broadcast_to(alpha, shape), activations);
  return tape.relu(tape.sum_over(weighted, {0}));
}

// ---------------------------------------------------------------------------

std::string MethodId::name() const {
  if (!agg) return family_name(family);
  return std::string(to_string(*agg)) + "Diff" + family_name(family);
}

std::vector<MethodId> all_methods() {
  return {
      {CamFamily::GradCam, std::nullopt},
      {CamFamily::EigenCam, std::nullopt},
      {CamFamily::HiResCam, std::nullopt},
      {CamFamily::XGradCam, std::nullopt},
      {CamFamily::ScoreCam, std::nullopt},
      {CamFamily::GradCam, Aggregator::Mean},
      {CamFamily::GradCam, Aggregator::Max},
      {CamFamily::GradCam, Aggregator::Lse},
      {CamFamily::GradCamPP, std::nullopt},
      {CamFamily::GradCamPP, Aggregator::Mean},
      {CamFamily::GradCamPP, Aggregator::Max},
      {CamFamily::GradCamPP, Aggregator::Lse},
  };
}

MethodId parse_method(std::string_view name) {
  for (const auto& m : all_methods())
    if (m.name() == name) return m;
  throw ConfigError("unknown CAM method '" + std::string(name) + "'");
}

SaliencyMap run_method(const Model& model, const Tensor& image, const MethodId& method, std::size_t cls) {
  const TargetSpec target = method.agg ? TargetSpec::contrastive(cls, *method.agg) : TargetSpec::single(cls);
  switch (method.family) {
    case CamFamily::GradCam: return gradcam(model, image, target);
    case CamFamily::GradCamPP: return gradcam_pp(model, image, target);
    case CamFamily::HiResCam: return hirescam(model, image, target);
    case CamFamily::XGradCam: return xgradcam(model, image, target);
    case CamFamily::EigenCam: return eigencam(model, image);
    case CamFamily::ScoreCam: return scorecam(model, image, target);
  }
  throw std::logic_error("run_method: bad family");
}

}  // namespace camlab
