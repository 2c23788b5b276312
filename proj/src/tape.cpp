#include "camlab/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "camlab/errors.hpp"

namespace camlab {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Conv2d: return "conv2d";
    case OpKind::Dense: return "dense";
    case OpKind::Matmul: return "matmul";
    case OpKind::Transpose: return "transpose";
    case OpKind::Relu: return "relu";
    case OpKind::MaxPool2d: return "max_pool2d";
    case OpKind::GlobalAvgPool: return "global_avg_pool";
    case OpKind::Softmax: return "softmax";
    case OpKind::LogSoftmax: return "log_softmax";
    case OpKind::Exp: return "exp";
    case OpKind::Log: return "log";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Scale: return "scale";
    case OpKind::Mul: return "mul";
    case OpKind::SumOver: return "sum_over";
    case OpKind::MaxOver: return "max_over";
    case OpKind::Reshape: return "reshape";
    case OpKind::BroadcastTo: return "broadcast_to";
    case OpKind::Select: return "select";
    case OpKind::Scatter: return "scatter";
    case OpKind::MinMaxNormalize: return "minmax_normalize";
  }
  return "?";
}

const Tensor& GradientBundle::of(Var v) const {
  if (!has(v)) throw std::out_of_range("gradient bundle: no gradient for node " + std::to_string(v.id));
  return *grads_[v.id];
}

namespace {

[[noreturn]] void mismatch(OpKind op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op_name(op)) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

void expect_rank(OpKind op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank)
    throw ShapeError(std::string(op_name(op)) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(t.shape()));
}

TapeNode make(OpKind kind, std::vector<std::size_t> inputs, Tensor value) {
  TapeNode n;
  n.kind = kind;
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  return n;
}

void accumulate(std::optional<Tensor>& slot, Tensor contribution) {
  if (!slot) {
    slot = std::move(contribution);
    return;
  }
  auto dst = slot->data();
  auto src = contribution.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

struct ConvGeom {
  std::size_t cin, h, w, cout, kh, kw, ho, wo, stride, pad;
  std::size_t rows() const { return cin * kh * kw; }
  std::size_t cols() const { return ho * wo; }
};

ConvGeom conv_geom(const Tensor& x, const Tensor& w, Conv2dOptions opt) {
  ConvGeom g{};
  g.cin = x.dim(0);
  g.h = x.dim(1);
  g.w = x.dim(2);
  g.cout = w.dim(0);
  g.kh = w.dim(2);
  g.kw = w.dim(3);
  g.stride = opt.stride;
  g.pad = opt.padding;
  g.ho = (g.h + 2 * g.pad - g.kh) / g.stride + 1;
  g.wo = (g.w + 2 * g.pad - g.kw) / g.stride + 1;
  return g;
}

std::vector<double> im2col(const Tensor& x, const ConvGeom& g) {
  std::vector<double> col(g.rows() * g.cols(), 0.0);
  const auto xs = x.data();
  for (std::size_t ci = 0; ci < g.cin; ++ci)
    for (std::size_t ki = 0; ki < g.kh; ++ki)
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        double* row = col.data() + ((ci * g.kh + ki) * g.kw + kj) * g.cols();
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const std::ptrdiff_t iy = std::ptrdiff_t(oy * g.stride + ki) - std::ptrdiff_t(g.pad);
          if (iy < 0 || iy >= std::ptrdiff_t(g.h)) continue;
          const double* src = xs.data() + (ci * g.h + std::size_t(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const std::ptrdiff_t ix = std::ptrdiff_t(ox * g.stride + kj) - std::ptrdiff_t(g.pad);
            if (ix < 0 || ix >= std::ptrdiff_t(g.w)) continue;
            row[oy * g.wo + ox] = src[ix];
          }
        }
      }
  return col;
}

Tensor col2im(const std::vector<double>& dcol, const ConvGeom& g) {
  Tensor dx({g.cin, g.h, g.w});
  auto xs = dx.data();
  for (std::size_t ci = 0; ci < g.cin; ++ci)
    for (std::size_t ki = 0; ki < g.kh; ++ki)
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const double* row = dcol.data() + ((ci * g.kh + ki) * g.kw + kj) * g.cols();
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const std::ptrdiff_t iy = std::ptrdiff_t(oy * g.stride + ki) - std::ptrdiff_t(g.pad);
          if (iy < 0 || iy >= std::ptrdiff_t(g.h)) continue;
          double* dst = xs.data() + (ci * g.h + std::size_t(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const std::ptrdiff_t ix = std::ptrdiff_t(ox * g.stride + kj) - std::ptrdiff_t(g.pad);
            if (ix < 0 || ix >= std::ptrdiff_t(g.w)) continue;
            dst[ix] += row[oy * g.wo + ox];
          }
        }
      }
  return dx;
}

// Maps every input flat index to its output flat index after removing `axes`.
std::vector<std::size_t> reduction_map(const Shape& shape, const std::vector<std::size_t>& axes,
                                       Shape& out_shape) {
  std::vector<char> drop(shape.size(), 0);
  for (auto a : axes) drop[a] = 1;
  out_shape.clear();
  for (std::size_t d = 0; d < shape.size(); ++d)
    if (!drop[d]) out_shape.push_back(shape[d]);
  if (out_shape.empty()) out_shape.push_back(1);

  std::vector<std::size_t> out_stride(shape.size(), 0);
  std::size_t s = 1;
  for (std::size_t d = shape.size(); d-- > 0;) {
    if (drop[d]) continue;
    out_stride[d] = s;
    s *= shape[d];
  }
  const std::size_t n = numel(shape);
  std::vector<std::size_t> map(n);
  std::vector<std::size_t> idx(shape.size(), 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t o = 0;
    for (std::size_t d = 0; d < shape.size(); ++d) o += idx[d] * out_stride[d];
    map[flat] = o;
    for (std::size_t d = shape.size(); d-- > 0;) {
      if (++idx[d] < shape[d]) break;
      idx[d] = 0;
    }
  }
  return map;
}

}  // namespace

Var Tape::push(TapeNode node) {
  for (auto in : node.inputs)
    if (nodes_[in].requires_grad) node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  auto n = make(OpKind::Leaf, {}, std::move(value));
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

Var Tape::conv2d(Var xv, Var wv, Var bv, Conv2dOptions opt) {
  const auto& x = at(xv).value;
  const auto& w = at(wv).value;
  const auto& b = at(bv).value;
  expect_rank(OpKind::Conv2d, x, 3);
  expect_rank(OpKind::Conv2d, w, 4);
  if (w.dim(1) != x.dim(0)) mismatch(OpKind::Conv2d, x.shape(), w.shape());
  if (b.size() != w.dim(0)) mismatch(OpKind::Conv2d, w.shape(), b.shape());
  if (opt.stride == 0) throw ShapeError("conv2d: stride must be positive");
  if (w.dim(2) > x.dim(1) + 2 * opt.padding || w.dim(3) > x.dim(2) + 2 * opt.padding)
    mismatch(OpKind::Conv2d, x.shape(), w.shape());

  const auto g = conv_geom(x, w, opt);
  auto cols = im2col(x, g);
  Tensor out({g.cout, g.ho, g.wo});
  auto os = out.data();
  const auto ws = w.data();
  const std::size_t R = g.rows(), P = g.cols();
  for (std::size_t co = 0; co < g.cout; ++co) {
    double* orow = os.data() + co * P;
    std::fill(orow, orow + P, b[co]);
    for (std::size_t r = 0; r < R; ++r) {
      const double wr = ws[co * R + r];
      const double* crow = cols.data() + r * P;
      for (std::size_t p = 0; p < P; ++p) orow[p] += wr * crow[p];
    }
  }
  auto n = make(OpKind::Conv2d, {xv.id, wv.id, bv.id}, std::move(out));
  n.conv = opt;
  n.cols = std::move(cols);
  return push(std::move(n));
}

Var Tape::dense(Var xv, Var wv, Var bv) {
  const auto& x = at(xv).value;
  const auto& w = at(wv).value;
  const auto& b = at(bv).value;
  expect_rank(OpKind::Dense, x, 1);
  expect_rank(OpKind::Dense, w, 2);
  if (w.dim(1) != x.dim(0)) mismatch(OpKind::Dense, w.shape(), x.shape());
  if (b.size() != w.dim(0)) mismatch(OpKind::Dense, w.shape(), b.shape());
  const std::size_t m = w.dim(0), k = w.dim(1);
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    double acc = b[i];
    for (std::size_t j = 0; j < k; ++j) acc += w[i * k + j] * x[j];
    out[i] = acc;
  }
  return push(make(OpKind::Dense, {xv.id, wv.id, bv.id}, std::move(out)));
}

Var Tape::matmul(Var av, Var bv) {
  const auto& a = at(av).value;
  const auto& b = at(bv).value;
  expect_rank(OpKind::Matmul, a, 2);
  expect_rank(OpKind::Matmul, b, 2);
  if (a.dim(1) != b.dim(0)) mismatch(OpKind::Matmul, a.shape(), b.shape());
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
  Tensor out({m, p});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t t = 0; t < k; ++t) {
      const double ait = a[i * k + t];
      for (std::size_t j = 0; j < p; ++j) out[i * p + j] += ait * b[t * p + j];
    }
  return push(make(OpKind::Matmul, {av.id, bv.id}, std::move(out)));
}

Var Tape::transpose(Var av) {
  const auto& a = at(av).value;
  expect_rank(OpKind::Transpose, a, 2);
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  return push(make(OpKind::Transpose, {av.id}, std::move(out)));
}

Var Tape::relu(Var xv) {
  Tensor out = at(xv).value;
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  return push(make(OpKind::Relu, {xv.id}, std::move(out)));
}

Var Tape::max_pool2d(Var xv, std::size_t window) {
  const auto& x = at(xv).value;
  expect_rank(OpKind::MaxPool2d, x, 3);
  if (window == 0 || window > x.dim(1) || window > x.dim(2))
    throw ShapeError("max_pool2d: window " + std::to_string(window) + " does not fit " + shape_str(x.shape()));
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t ho = h / window, wo = w / window;
  Tensor out({c, ho, wo});
  std::vector<std::size_t> arg(out.size());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) {
        std::size_t best = (ch * h + oy * window) * w + ox * window;
        for (std::size_t dy = 0; dy < window; ++dy)
          for (std::size_t dx = 0; dx < window; ++dx) {
            const std::size_t idx = (ch * h + oy * window + dy) * w + ox * window + dx;
            if (x[idx] > x[best]) best = idx;
          }
        const std::size_t o = (ch * ho + oy) * wo + ox;
        out[o] = x[best];
        arg[o] = best;
      }
  auto n = make(OpKind::MaxPool2d, {xv.id}, std::move(out));
  n.window = window;
  n.arg_cache = std::move(arg);
  return push(std::move(n));
}

Var Tape::global_avg_pool(Var xv) {
  const auto& x = at(xv).value;
  expect_rank(OpKind::GlobalAvgPool, x, 3);
  const std::size_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
  Tensor out({c});
  for (std::size_t ch = 0; ch < c; ++ch) {
    double acc = 0.0;
    for (std::size_t i = 0; i < hw; ++i) acc += x[ch * hw + i];
    out[ch] = acc / double(hw);
  }
  return push(make(OpKind::GlobalAvgPool, {xv.id}, std::move(out)));
}

Var Tape::softmax(Var xv) {
  const auto& x = at(xv).value;
  expect_rank(OpKind::Softmax, x, 1);
  Tensor out = x;
  const double m = x.max();
  double z = 0.0;
  for (auto& v : out.data()) z += (v = std::exp(v - m));
  for (auto& v : out.data()) v /= z;
  return push(make(OpKind::Softmax, {xv.id}, std::move(out)));
}

Var Tape::log_softmax(Var xv) {
  const auto& x = at(xv).value;
  expect_rank(OpKind::LogSoftmax, x, 1);
  const double m = x.max();
  double z = 0.0;
  for (double v : x.data()) z += std::exp(v - m);
  const double lz = m + std::log(z);
  Tensor out = x;
  for (auto& v : out.data()) v -= lz;
  return push(make(OpKind::LogSoftmax, {xv.id}, std::move(out)));
}

Var Tape::exp(Var xv) {
  Tensor out = at(xv).value;
  for (auto& v : out.data()) v = std::exp(v);
  return push(make(OpKind::Exp, {xv.id}, std::move(out)));
}

Var Tape::log(Var xv) {
  Tensor out = at(xv).value;
  for (auto& v : out.data()) {
    if (!(v > 0.0)) throw NumericError("log: non-positive input " + std::to_string(v));
    v = std::log(v);
  }
  return push(make(OpKind::Log, {xv.id}, std::move(out)));
}

Var Tape::add(Var av, Var bv) {
  const auto& a = at(av).value;
  const auto& b = at(bv).value;
  if (a.shape() != b.shape()) mismatch(OpKind::Add, a.shape(), b.shape());
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return push(make(OpKind::Add, {av.id, bv.id}, std::move(out)));
}

Var Tape::sub(Var av, Var bv) {
  const auto& a = at(av).value;
  const auto& b = at(bv).value;
  if (a.shape() != b.shape()) mismatch(OpKind::Sub, a.shape(), b.shape());
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return push(make(OpKind::Sub, {av.id, bv.id}, std::move(out)));
}

Var Tape::scale(Var xv, double factor) {
  Tensor out = at(xv).value;
  for (auto& v : out.data()) v *= factor;
  auto n = make(OpKind::Scale, {xv.id}, std::move(out));
  n.factor = factor;
  return push(std::move(n));
}

Var Tape::mul(Var av, Var bv) {
  const auto& a = at(av).value;
  const auto& b = at(bv).value;
  if (a.shape() != b.shape()) mismatch(OpKind::Mul, a.shape(), b.shape());
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return push(make(OpKind::Mul, {av.id, bv.id}, std::move(out)));
}

Var Tape::sum_over(Var xv, std::vector<std::size_t> axes) {
  const auto& x = at(xv).value;
  std::sort(axes.begin(), axes.end());
  axes.erase(std::unique(axes.begin(), axes.end()), axes.end());
  for (auto a : axes)
    if (a >= x.rank())
      throw ShapeError("sum_over: axis " + std::to_string(a) + " out of range for " + shape_str(x.shape()));
  Shape out_shape;
  auto map = reduction_map(x.shape(), axes, out_shape);
  Tensor out(out_shape);
  for (std::size_t i = 0; i < x.size(); ++i) out[map[i]] += x[i];
  auto n = make(OpKind::SumOver, {xv.id}, std::move(out));
  n.indices = std::move(axes);
  n.arg_cache = std::move(map);
  return push(std::move(n));
}

Var Tape::sum(Var xv) {
  std::vector<std::size_t> axes(at(xv).value.rank());
  std::iota(axes.begin(), axes.end(), 0);
  return sum_over(xv, std::move(axes));
}

Var Tape::max_over(Var xv, std::size_t axis) {
  const auto& x = at(xv).value;
  if (axis >= x.rank())
    throw ShapeError("max_over: axis " + std::to_string(axis) + " out of range for " + shape_str(x.shape()));
  Shape out_shape;
  auto map = reduction_map(x.shape(), {axis}, out_shape);
  Tensor out(out_shape, -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> arg(out.size(), 0);
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] > out[map[i]]) {
      out[map[i]] = x[i];
      arg[map[i]] = i;
    }
  auto n = make(OpKind::MaxOver, {xv.id}, std::move(out));
  n.indices = {axis};
  n.arg_cache = std::move(arg);
  return push(std::move(n));
}

Var Tape::reshape(Var xv, Shape shape) {
  const auto& x = at(xv).value;
  if (numel(shape) != x.size()) mismatch(OpKind::Reshape, x.shape(), shape);
  auto n = make(OpKind::Reshape, {xv.id}, x.reshaped(shape));
  return push(std::move(n));
}

Var Tape::broadcast_to(Var xv, Shape shape) {
  const auto& x = at(xv).value;
  const bool prefix = x.rank() <= shape.size() && std::equal(x.shape().begin(), x.shape().end(), shape.begin());
  if (!prefix && x.size() != 1) mismatch(OpKind::BroadcastTo, x.shape(), shape);
  Tensor out(shape);
  const std::size_t block = out.size() / x.size();
  for (std::size_t i = 0; i < x.size(); ++i)
    std::fill_n(out.data().begin() + std::ptrdiff_t(i * block), block, x[i]);
  auto n = make(OpKind::BroadcastTo, {xv.id}, std::move(out));
  n.window = block;
  return push(std::move(n));
}

Var Tape::select(Var xv, std::vector<std::size_t> indices) {
  const auto& x = at(xv).value;
  if (indices.empty()) throw ShapeError("select: empty index list");
  Tensor out({indices.size()});
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= x.size())
      throw ShapeError("select: index " + std::to_string(indices[k]) + " out of range for " + shape_str(x.shape()));
    out[k] = x[indices[k]];
  }
  auto n = make(OpKind::Select, {xv.id}, std::move(out));
  n.indices = std::move(indices);
  return push(std::move(n));
}

Var Tape::scatter(Var xv, std::vector<std::size_t> indices, Shape shape) {
  const auto& x = at(xv).value;
  if (x.size() != indices.size()) mismatch(OpKind::Scatter, x.shape(), Shape{indices.size()});
  Tensor out(shape);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= out.size())
      throw ShapeError("scatter: index " + std::to_string(indices[k]) + " out of range for " + shape_str(shape));
    out[indices[k]] += x[k];
  }
  auto n = make(OpKind::Scatter, {xv.id}, std::move(out));
  n.indices = std::move(indices);
  n.shape_attr = std::move(shape);
  return push(std::move(n));
}

Var Tape::minmax_normalize(Var xv) {
  const auto& x = at(xv).value;
  const auto xs = x.data();
  const std::size_t imin = std::size_t(std::min_element(xs.begin(), xs.end()) - xs.begin());
  const std::size_t imax = std::size_t(std::max_element(xs.begin(), xs.end()) - xs.begin());
  Tensor out(x.shape());
  const double lo = x[imin], range = x[imax] - x[imin];
  if (range > 0.0)
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - lo) / range;
  auto n = make(OpKind::MinMaxNormalize, {xv.id}, std::move(out));
  n.arg_cache = {imin, imax};
  return push(std::move(n));
}

// ---------------------------------------------------------------------------
// Backward

namespace {

Tensor vjp(const std::vector<TapeNode>& nodes, const TapeNode& n, const Tensor& g, std::size_t slot) {
  auto input = [&](std::size_t s) -> const Tensor& { return nodes[n.inputs[s]].value; };
  switch (n.kind) {
    case OpKind::Leaf:
      break;
    case OpKind::Conv2d: {
      const auto& x = input(0);
      const auto& w = input(1);
      const auto geo = conv_geom(x, w, n.conv);
      const std::size_t R = geo.rows(), P = geo.cols();
      const auto gs = g.data();
      if (slot == 0) {
        std::vector<double> dcol(R * P, 0.0);
        for (std::size_t co = 0; co < geo.cout; ++co) {
          const double* grow = gs.data() + co * P;
          for (std::size_t r = 0; r < R; ++r) {
            const double wr = w[co * R + r];
            double* drow = dcol.data() + r * P;
            for (std::size_t p = 0; p < P; ++p) drow[p] += wr * grow[p];
          }
        }
        return col2im(dcol, geo);
      }
      if (slot == 1) {
        Tensor dw(w.shape());
        for (std::size_t co = 0; co < geo.cout; ++co) {
          const double* grow = gs.data() + co * P;
          for (std::size_t r = 0; r < R; ++r) {
            const double* crow = n.cols.data() + r * P;
            double acc = 0.0;
            for (std::size_t p = 0; p < P; ++p) acc += grow[p] * crow[p];
            dw[co * R + r] = acc;
          }
        }
        return dw;
      }
      Tensor db(input(2).shape());
      for (std::size_t co = 0; co < geo.cout; ++co) {
        double acc = 0.0;
        for (std::size_t p = 0; p < P; ++p) acc += gs[co * P + p];
        db[co] = acc;
      }
      return db;
    }
    case OpKind::Dense: {
      const auto& x = input(0);
      const auto& w = input(1);
      const std::size_t m = w.dim(0), k = w.dim(1);
      if (slot == 0) {
        Tensor dx(x.shape());
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < k; ++j) dx[j] += w[i * k + j] * g[i];
        return dx;
      }
      if (slot == 1) {
        Tensor dw(w.shape());
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < k; ++j) dw[i * k + j] = g[i] * x[j];
        return dw;
      }
      return g;
    }
    case OpKind::Matmul: {
      const auto& a = input(0);
      const auto& b = input(1);
      const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
      if (slot == 0) {
        Tensor da(a.shape());
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t t = 0; t < k; ++t) {
            double acc = 0.0;
            for (std::size_t j = 0; j < p; ++j) acc += g[i * p + j] * b[t * p + j];
            da[i * k + t] = acc;
          }
        return da;
      }
      Tensor db(b.shape());
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t t = 0; t < k; ++t) {
          const double ait = a[i * k + t];
          for (std::size_t j = 0; j < p; ++j) db[t * p + j] += ait * g[i * p + j];
        }
      return db;
    }
    case OpKind::Transpose: {
      const std::size_t m = g.dim(0), c = g.dim(1);
      Tensor dx({c, m});
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < c; ++j) dx[j * m + i] = g[i * c + j];
      return dx;
    }
    case OpKind::Relu: {
      const auto& x = input(0);
      Tensor dx(x.shape());
      for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? g[i] : 0.0;
      return dx;
    }
    case OpKind::MaxPool2d: {
      Tensor dx(input(0).shape());
      for (std::size_t o = 0; o < g.size(); ++o) dx[n.arg_cache[o]] += g[o];
      return dx;
    }
    case OpKind::GlobalAvgPool: {
      const auto& x = input(0);
      const std::size_t hw = x.dim(1) * x.dim(2);
      Tensor dx(x.shape());
      for (std::size_t c = 0; c < x.dim(0); ++c)
        for (std::size_t i = 0; i < hw; ++i) dx[c * hw + i] = g[c] / double(hw);
      return dx;
    }
    case OpKind::Softmax: {
      const auto& y = n.value;
      double dot = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) dot += g[i] * y[i];
      Tensor dx(y.shape());
      for (std::size_t i = 0; i < y.size(); ++i) dx[i] = y[i] * (g[i] - dot);
      return dx;
    }
    case OpKind::LogSoftmax: {
      const auto& y = n.value;
      const double gsum = g.sum();
      Tensor dx(y.shape());
      for (std::size_t i = 0; i < y.size(); ++i) dx[i] = g[i] - std::exp(y[i]) * gsum;
      return dx;
    }
    case OpKind::Exp: {
      Tensor dx = g;
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= n.value[i];
      return dx;
    }
    case OpKind::Log: {
      Tensor dx = g;
      const auto& x = input(0);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] /= x[i];
      return dx;
    }
    case OpKind::Add:
      return g;
    case OpKind::Sub: {
      if (slot == 0) return g;
      Tensor dx = g;
      for (auto& v : dx.data()) v = -v;
      return dx;
    }
    case OpKind::Scale: {
      Tensor dx = g;
      for (auto& v : dx.data()) v *= n.factor;
      return dx;
    }
    case OpKind::Mul: {
      const auto& other = input(1 - slot);
      Tensor dx = g;
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= other[i];
      return dx;
    }
    case OpKind::SumOver: {
      Tensor dx(input(0).shape());
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = g[n.arg_cache[i]];
      return dx;
    }
    case OpKind::MaxOver: {
      Tensor dx(input(0).shape());
      for (std::size_t o = 0; o < g.size(); ++o) dx[n.arg_cache[o]] += g[o];
      return dx;
    }
    case OpKind::Reshape:
      return g.reshaped(input(0).shape());
    case OpKind::BroadcastTo: {
      const auto& x = input(0);
      const std::size_t block = n.window;
      Tensor dx(x.shape());
      for (std::size_t i = 0; i < x.size(); ++i) {
        double acc = 0.0;
        for (std::size_t t = 0; t < block; ++t) acc += g[i * block + t];
        dx[i] = acc;
      }
      return dx;
    }
    case OpKind::Select: {
      Tensor dx(input(0).shape());
      for (std::size_t k = 0; k < n.indices.size(); ++k) dx[n.indices[k]] += g[k];
      return dx;
    }
    case OpKind::Scatter: {
      Tensor dx(input(0).shape());
      for (std::size_t k = 0; k < n.indices.size(); ++k) dx[k] = g[n.indices[k]];
      return dx;
    }
    case OpKind::MinMaxNormalize: {
      const auto& x = input(0);
      Tensor dx(x.shape());
      const std::size_t imin = n.arg_cache[0], imax = n.arg_cache[1];
      const double range = x[imax] - x[imin];
      if (!(range > 0.0)) return dx;
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        dx[i] = g[i] / range;
        s1 += g[i];
        s2 += g[i] * n.value[i];
      }
      dx[imin] += (s2 - s1) / range;
      dx[imax] -= s2 / range;
      return dx;
    }
  }
  throw std::logic_error("vjp: unhandled op " + std::string(op_name(n.kind)));
}

}  // namespace

std::vector<char> Tape::path_mask(Var target, std::span<const Var> wrt) const {
  const std::size_t n = target.id + 1;
  std::vector<char> from_wrt(n, 0);
  for (auto v : wrt)
    if (v.id < n) from_wrt[v.id] = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (from_wrt[i]) continue;
    for (auto in : nodes_[i].inputs)
      if (from_wrt[in]) {
        from_wrt[i] = 1;
        break;
      }
  }
  std::vector<char> to_target(n, 0);
  to_target[target.id] = 1;
  for (std::size_t i = n; i-- > 0;) {
    if (!to_target[i]) continue;
    for (auto in : nodes_[i].inputs) to_target[in] = 1;
  }
  for (std::size_t i = 0; i < n; ++i) from_wrt[i] = char(from_wrt[i] && to_target[i]);
  return from_wrt;
}

GradientBundle Tape::run_backward(Var target, const std::vector<char>& on_path) const {
  const auto& t = at(target).value;
  if (!t.is_scalar()) throw ShapeError("backward: target " + shape_str(t.shape()) + " is not scalar");
  std::vector<std::optional<Tensor>> grads(target.id + 1);
  grads[target.id] = Tensor(t.shape(), 1.0);
  for (std::size_t i = target.id + 1; i-- > 0;) {
    if (!grads[i] || !on_path[i]) continue;
    const auto& node = nodes_[i];
    for (std::size_t s = 0; s < node.inputs.size(); ++s) {
      const std::size_t in = node.inputs[s];
      if (!on_path[in]) continue;
      accumulate(grads[in], vjp(nodes_, node, *grads[i], s));
    }
  }
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (!on_path[i]) grads[i].reset();
  return GradientBundle(std::move(grads), target);
}

GradientBundle Tape::backward(Var target) const {
  const std::size_t n = target.id + 1;
  if (target.id >= nodes_.size()) throw std::out_of_range("backward: unknown target node");
  std::vector<char> on_path(n, 0);
  for (std::size_t i = 0; i < n; ++i) on_path[i] = nodes_[i].requires_grad;
  // Restrict to ancestors of the target.
  std::vector<char> anc(n, 0);
  anc[target.id] = 1;
  for (std::size_t i = n; i-- > 0;) {
    if (!anc[i]) continue;
    for (auto in : nodes_[i].inputs) anc[in] = 1;
  }
  for (std::size_t i = 0; i < n; ++i) on_path[i] = char(on_path[i] && anc[i]);
  on_path[target.id] = 1;
  return run_backward(target, on_path);
}

GradientBundle Tape::backward(Var target, std::span<const Var> wrt) const {
  if (target.id >= nodes_.size()) throw std::out_of_range("backward: unknown target node");
  auto on_path = path_mask(target, wrt);
  on_path[target.id] = 1;
  return run_backward(target, on_path);
}

Var Tape::vjp_graph(std::size_t node_id, Var g, std::size_t slot) {
  // Copy what we need: pushes below may reallocate nodes_.
  const OpKind kind = nodes_[node_id].kind;
  const std::vector<std::size_t> inputs = nodes_[node_id].inputs;
  const Shape in_shape = nodes_[inputs[slot]].value.shape();
  switch (kind) {
    case OpKind::Add:
      return g;
    case OpKind::Sub:
      return slot == 0 ? g : scale(g, -1.0);
    case OpKind::Scale:
      return scale(g, nodes_[node_id].factor);
    case OpKind::Mul:
      return mul(g, Var{inputs[1 - slot]});
    case OpKind::Relu: {
      Tensor mask(in_shape);
      const auto& x = nodes_[inputs[0]].value;
      for (std::size_t i = 0; i < x.size(); ++i) mask[i] = x[i] > 0.0 ? 1.0 : 0.0;
      return mul(g, constant(std::move(mask)));
    }
    case OpKind::Exp:
      return mul(g, Var{node_id});
    case OpKind::Reshape:
      return reshape(g, in_shape);
    case OpKind::BroadcastTo: {
      const Shape out_shape = nodes_[node_id].value.shape();
      if (numel(in_shape) == 1) return reshape(sum(g), in_shape);
      std::vector<std::size_t> trailing;
      for (std::size_t d = in_shape.size(); d < out_shape.size(); ++d) trailing.push_back(d);
      if (trailing.empty()) return g;
      return reshape(sum_over(g, trailing), in_shape);
    }
    case OpKind::SumOver: {
      const auto axes = nodes_[node_id].indices;
      const std::size_t kept = in_shape.size() - axes.size();
      for (std::size_t k = 0; k < axes.size(); ++k)
        if (axes[k] != kept + k)
          throw std::logic_error("grad_graph: sum_over of non-trailing axes is not twice differentiable");
      Shape prefix(in_shape.begin(), in_shape.begin() + std::ptrdiff_t(kept));
      Var gp = prefix.empty() ? g : reshape(g, prefix);
      return broadcast_to(gp, in_shape);
    }
    case OpKind::GlobalAvgPool: {
      const double hw = double(in_shape[1] * in_shape[2]);
      return broadcast_to(scale(g, 1.0 / hw), in_shape);
    }
    case OpKind::Dense: {
      const std::size_t m = nodes_[inputs[1]].value.dim(0);
      const std::size_t k = nodes_[inputs[1]].value.dim(1);
      if (slot == 0) {
        Var col = matmul(transpose(Var{inputs[1]}), reshape(g, {m, 1}));
        return reshape(col, {k});
      }
      if (slot == 1) return matmul(reshape(g, {m, 1}), reshape(Var{inputs[0]}, {1, k}));
      return g;
    }
    case OpKind::Matmul:
      if (slot == 0) return matmul(g, transpose(Var{inputs[1]}));
      return matmul(transpose(Var{inputs[0]}), g);
    case OpKind::Transpose:
      return transpose(g);
    case OpKind::Select:
      return scatter(g, nodes_[node_id].indices, in_shape);
    case OpKind::Scatter:
      return select(g, nodes_[node_id].indices);
    default:
      break;
  }
  throw std::logic_error("grad_graph: " + std::string(op_name(kind)) + " is not twice differentiable");
}

std::vector<Var> Tape::grad_graph(Var target, std::span<const Var> wrt) {
  if (target.id >= nodes_.size()) throw std::out_of_range("grad_graph: unknown target node");
  const Shape tshape = at(target).value.shape();
  if (numel(tshape) != 1) throw ShapeError("grad_graph: target " + shape_str(tshape) + " is not scalar");
  auto on_path = path_mask(target, wrt);
  std::vector<std::optional<Var>> grads(target.id + 1);
  grads[target.id] = constant(Tensor(tshape, 1.0));
  for (std::size_t i = target.id + 1; i-- > 0;) {
    if (!grads[i] || !on_path[i]) continue;
    const auto inputs = nodes_[i].inputs;
    for (std::size_t s = 0; s < inputs.size(); ++s) {
      if (!on_path[inputs[s]]) continue;
      Var contrib = vjp_graph(i, *grads[i], s);
      auto& slot = grads[inputs[s]];
      slot = slot ? add(*slot, contrib) : contrib;
    }
  }
  std::vector<Var> out;
  out.reserve(wrt.size());
  for (auto v : wrt) {
    if (v.id < grads.size() && grads[v.id]) {
      out.push_back(*grads[v.id]);
    } else {
      out.push_back(constant(Tensor(nodes_.at(v.id).value.shape())));
    }
  }
  return out;
}

std::uint64_t Tape::branch_signature() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ull;
  };
  for (const auto& n : nodes_) {
    switch (n.kind) {
      case OpKind::Relu: {
        const auto& x = nodes_[n.inputs[0]].value;
        for (double v : x.data()) mix(v > 0.0 ? 1u : 2u);
        break;
      }
      case OpKind::MaxPool2d:
      case OpKind::MaxOver:
      case OpKind::MinMaxNormalize:
        for (auto a : n.arg_cache) mix(a + 3);
        break;
      default:
        break;
    }
  }
  return h;
}

}  // namespace camlab
