#include "camlab/evalbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "camlab/errors.hpp"
#include "camlab/imageio.hpp"
#include "camlab/parallel.hpp"

namespace camlab {

namespace {

std::string image_id(const Dataset& data, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%05zu", to_string(data.split).c_str(), i);
  return buf;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Midranks of the pooled sample, xs first.
std::vector<double> pooled_ranks(const std::vector<double>& xs, const std::vector<double>& ys, double* tie_term) {
  std::vector<double> all(xs);
  all.insert(all.end(), ys.begin(), ys.end());
  for (double v : all)
    if (!std::isfinite(v)) throw NumericError("rank_sum: non-finite sample value");
  std::vector<std::size_t> idx(all.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return all[a] < all[b]; });
  std::vector<double> ranks(all.size());
  double ties = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && all[idx[j + 1]] == all[idx[i]]) ++j;
    const double r = 0.5 * double(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    const double t = double(j - i + 1);
    ties += t * t * t - t;
    i = j + 1;
  }
  if (tie_term) *tie_term = ties;
  return ranks;
}

void check_samples(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.empty() || ys.empty()) throw std::invalid_argument("rank_sum: empty sample");
}

double u_statistic(const std::vector<double>& ranks, std::size_t n1) {
  const double r1 = std::accumulate(ranks.begin(), ranks.begin() + std::ptrdiff_t(n1), 0.0);
  return r1 - double(n1) * double(n1 + 1) / 2.0;
}

}  // namespace

// ---------------------------------------------------------------------------

const Aggregate& ExperimentReport::aggregate(const std::string& method, const std::string& metric) const {
  for (const auto& a : aggregates)
    if (a.method == method && a.metric == metric) return a;
  throw std::out_of_range("report: no aggregate for " + method + "/" + metric);
}

std::vector<double> ExperimentReport::values(const std::string& method, const std::string& metric) const {
  std::vector<double> out;
  for (const auto& r : rows)
    if (r.method == method && r.metric == metric) out.push_back(r.value);
  return out;
}

const PairTest& ExperimentReport::test(const std::string& a, const std::string& b) const {
  for (const auto& t : tests)
    if ((t.method_a == a && t.method_b == b) || (t.method_a == b && t.method_b == a)) return t;
  throw std::out_of_range("report: no test for " + a + " vs " + b);
}

double mse(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("mse: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / double(a.size());
}

double mse(const SaliencyMap& a, const SaliencyMap& b) { return mse(a.normalized, b.normalized); }

RankSumResult rank_sum_exact(const std::vector<double>& xs, const std::vector<double>& ys) {
  check_samples(xs, ys);
  const std::size_t n1 = xs.size(), n = xs.size() + ys.size();
  if (n > 20) throw std::invalid_argument("rank_sum_exact: n1 + n2 must be <= 20");
  const auto ranks = pooled_ranks(xs, ys, nullptr);
  const double u = u_statistic(ranks, n1);
  const double mu = double(n1) * double(ys.size()) / 2.0;
  const double obs = std::abs(u - mu) - 1e-9;

  // Walk every n1-subset of positions in lexicographic order.
  std::vector<std::size_t> pick(n1);
  std::iota(pick.begin(), pick.end(), 0);
  std::size_t hits = 0, total = 0;
  for (;;) {
    double r1 = 0.0;
    for (auto k : pick) r1 += ranks[k];
    const double uk = r1 - double(n1) * double(n1 + 1) / 2.0;
    ++total;
    if (std::abs(uk - mu) >= obs) ++hits;
    std::size_t i = n1;
    while (i > 0 && pick[i - 1] == n - n1 + i - 1) --i;
    if (i == 0) break;
    ++pick[i - 1];
    for (std::size_t j = i; j < n1; ++j) pick[j] = pick[j - 1] + 1;
  }
  return {u, double(hits) / double(total), n1, ys.size(), true};
}

RankSumResult rank_sum_normal(const std::vector<double>& xs, const std::vector<double>& ys) {
  check_samples(xs, ys);
  const double n1 = double(xs.size()), n2 = double(ys.size()), n = n1 + n2;
  double ties = 0.0;
  const auto ranks = pooled_ranks(xs, ys, &ties);
  const double u = u_statistic(ranks, xs.size());
  const double mu = n1 * n2 / 2.0;
  const double var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
  double p = 1.0;
  if (var > 0.0) {
    const double z = std::max(std::abs(u - mu) - 0.5, 0.0) / std::sqrt(var);
    p = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  }
  return {u, p, xs.size(), ys.size(), false};
}

RankSumResult rank_sum(const std::vector<double>& xs, const std::vector<double>& ys) {
  check_samples(xs, ys);
  return xs.size() + ys.size() <= 12 ? rank_sum_exact(xs, ys) : rank_sum_normal(xs, ys);
}

std::vector<Aggregate> aggregate_rows(const std::vector<MetricRow>& rows) {
  std::vector<Aggregate> out;
  std::vector<std::vector<double>> vals;
  for (const auto& r : rows) {
    std::size_t k = 0;
    while (k < out.size() && !(out[k].model_id == r.model_id && out[k].method == r.method && out[k].metric == r.metric))
      ++k;
    if (k == out.size()) {
      out.push_back({r.model_id, r.method, r.metric, 0, 0.0, 0.0});
      vals.emplace_back();
    }
    vals[k].push_back(r.value);
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto& v = vals[k];
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    out[k].count = v.size();
    out[k].mean = m;
    out[k].std = v.size() > 1 ? std::sqrt(ss / double(v.size() - 1)) : 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------

ExperimentReport similarity_study(const Model& model, const Dataset& data, const std::vector<Aggregator>& variants,
                                  const StudyOptions& opts) {
  if (data.empty()) throw ConfigError("similarity: empty dataset");
  if (variants.empty()) throw ConfigError("similarity: no aggregators given");
  const std::size_t n = data.size();
  std::vector<std::vector<MetricRow>> per(n);
  parallel_for(n, opts.threads, [&](std::size_t i) {
    const auto& img = data.images[i];
    const std::size_t c = data.labels[i];
    const auto base = gradcam(model, img, TargetSpec::single(c));
    const auto base_pp = gradcam_pp(model, img, TargetSpec::single(c));
    for (auto agg : variants) {
      const auto t = TargetSpec::contrastive(c, agg);
      const auto d = gradcam(model, img, t);
      per[i].push_back({image_id(data, i), opts.model_id, d.method, "mse_vs_" + base.method, mse(d, base)});
    }
    for (auto agg : variants) {
      const auto t = TargetSpec::contrastive(c, agg);
      const auto d = gradcam_pp(model, img, t);
      per[i].push_back({image_id(data, i), opts.model_id, d.method, "mse_vs_" + base_pp.method, mse(d, base_pp)});
    }
  });

  ExperimentReport r;
  r.name = "similarity";
  r.seed = opts.seed;
  r.config = {{"images", std::to_string(n)}, {"model", opts.model_id}, {"classes", std::to_string(model.config().num_classes)}};
  for (auto& v : per) r.rows.insert(r.rows.end(), v.begin(), v.end());
  r.aggregates = aggregate_rows(r.rows);

  const bool has_mean = std::find(variants.begin(), variants.end(), Aggregator::Mean) != variants.end();
  if (has_mean)
    for (const std::string fam : {"GradCAM", "GradCAM++"}) {
      const std::string metric = "mse_vs_" + fam;
      const std::string mean_name = "MeanDiff" + fam;
      for (auto agg : variants) {
        if (agg == Aggregator::Mean) continue;
        const std::string other = std::string(to_string(agg)) + "Diff" + fam;
        r.tests.push_back({metric, mean_name, other, rank_sum(r.values(mean_name, metric), r.values(other, metric))});
      }
    }
  return r;
}

ExperimentReport susceptibility_study(const Model& clean, const Model& fooled, const Dataset& data,
                                      const std::vector<MethodId>& methods, const StudyOptions& opts) {
  if (data.empty()) throw ConfigError("susceptibility: empty dataset");
  if (methods.empty()) throw ConfigError("susceptibility: no methods given");
  if (!(clean.config() == fooled.config()))
    throw ConfigError("susceptibility: clean and fooled models have different architectures");
  const std::size_t n = data.size();
  std::vector<std::vector<MetricRow>> per(n);
  parallel_for(n, opts.threads, [&](std::size_t i) {
    const auto& img = data.images[i];
    const std::size_t c = data.labels[i];
    for (const auto& m : methods) {
      const auto a = run_method(clean, img, m, c);
      const auto b = run_method(fooled, img, m, c);
      per[i].push_back({image_id(data, i), opts.model_id, m.name(), "susceptibility", mse(a, b)});
    }
  });

  ExperimentReport r;
  r.name = "susceptibility";
  r.seed = opts.seed;
  r.config = {{"images", std::to_string(n)}, {"model", opts.model_id}, {"methods", std::to_string(methods.size())}};
  for (auto& v : per) r.rows.insert(r.rows.end(), v.begin(), v.end());
  r.aggregates = aggregate_rows(r.rows);

  const std::string metric = "susceptibility";
  const auto best = std::min_element(r.aggregates.begin(), r.aggregates.end(),
                                     [](const auto& a, const auto& b) { return a.mean < b.mean; });
  auto add_test = [&](const std::string& a, const std::string& b) {
    if (a == b) return;
    for (const auto& t : r.tests)
      if ((t.method_a == a && t.method_b == b) || (t.method_a == b && t.method_b == a)) return;
    r.tests.push_back({metric, a, b, rank_sum(r.values(a, metric), r.values(b, metric))});
  };
  for (const auto& a : r.aggregates) add_test(best->method, a.method);
  // Each baseline against its mean-aggregated contrastive counterpart.
  auto has = [&](const std::string& name) {
    return std::any_of(methods.begin(), methods.end(), [&](const auto& m) { return m.name() == name; });
  };
  for (const std::string fam : {"GradCAM", "GradCAM++"})
    if (has(fam) && has("MeanDiff" + fam)) add_test("MeanDiff" + fam, fam);
  return r;
}

BenchResult runtime_bench(const Model& model, const Tensor& image, std::size_t cls, const std::vector<MethodId>& methods,
                          std::size_t n, std::size_t discard, const std::string& model_id) {
  if (n <= discard) throw ConfigError("bench: n must exceed discard");
  if (methods.empty()) throw ConfigError("bench: no methods given");
  BenchResult out;
  std::vector<std::vector<double>> times(methods.size());
  for (std::size_t run = 0; run < n; ++run)
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto map = run_method(model, image, methods[m], cls);
      const auto t1 = std::chrono::steady_clock::now();
      if (!map.raw.all_finite()) throw NumericError("bench: non-finite map from " + methods[m].name());
      if (run >= discard) times[m].push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
  auto& r = out.report;
  r.name = "bench";
  r.config = {{"n", std::to_string(n)}, {"discard", std::to_string(discard)}, {"model", model_id}};
  for (std::size_t k = 0; k < n - discard; ++k)
    for (std::size_t m = 0; m < methods.size(); ++m) {
      char id[24];
      std::snprintf(id, sizeof id, "run_%04zu", k + discard);
      r.rows.push_back({id, model_id, methods[m].name(), "ms", times[m][k]});
    }
  r.aggregates = aggregate_rows(r.rows);
  for (std::size_t m = 0; m < methods.size(); ++m) out.timings_ms[methods[m].name()] = times[m];
  return out;
}

double accuracy(const Model& model, const Dataset& data, std::size_t threads) {
  if (data.empty()) throw ConfigError("accuracy: empty dataset");
  std::vector<char> hit(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) { hit[i] = predict(model, data.images[i]) == data.labels[i]; });
  return double(std::count(hit.begin(), hit.end(), 1)) / double(data.size());
}

PairedAccuracy paired_accuracy_report(const Model& plain, const Model& shammed, const Dataset& data,
                                      std::size_t threads) {
  return {accuracy(plain, data, threads), accuracy(shammed, data, threads)};
}

// ---------------------------------------------------------------------------

std::string report_to_csv(const ExperimentReport& report) {
  std::string out = "image_id,model_id,method,metric,value\n";
  for (const auto& r : report.rows) {
    for (const auto* f : {&r.image_id, &r.model_id, &r.method, &r.metric})
      if (f->find_first_of(",\n\"") != std::string::npos) throw FormatError("csv: field contains a separator: " + *f);
    out += r.image_id + ',' + r.model_id + ',' + r.method + ',' + r.metric + ',' + fmt(r.value) + '\n';
  }
  return out;
}

std::vector<MetricRow> rows_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "image_id,model_id,method,metric,value")
    throw FormatError("csv: missing or unexpected header");
  std::vector<MetricRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 5) throw FormatError("csv: expected 5 fields in '" + line + "'");
    char* end = nullptr;
    const double v = std::strtod(f[4].c_str(), &end);
    if (end == f[4].c_str() || *end != '\0') throw FormatError("csv: bad value '" + f[4] + "'");
    rows.push_back({f[0], f[1], f[2], f[3], v});
  }
  return rows;
}

std::string report_to_json(const ExperimentReport& report) {
  using nlohmann::json;
  json j;
  j["name"] = report.name;
  j["seed"] = report.seed;
  j["config"] = report.config;
  j["rows"] = json::array();
  for (const auto& r : report.rows)
    j["rows"].push_back({{"image_id", r.image_id}, {"model_id", r.model_id}, {"method", r.method},
                         {"metric", r.metric}, {"value", r.value}});
  j["aggregates"] = json::array();
  for (const auto& a : report.aggregates)
    j["aggregates"].push_back({{"model_id", a.model_id}, {"method", a.method}, {"metric", a.metric},
                               {"count", a.count}, {"mean", a.mean}, {"std", a.std}});
  j["tests"] = json::array();
  for (const auto& t : report.tests)
    j["tests"].push_back({{"metric", t.metric}, {"method_a", t.method_a}, {"method_b", t.method_b},
                          {"u", t.result.u}, {"p", t.result.p}, {"n1", t.result.n1}, {"n2", t.result.n2},
                          {"exact", t.result.exact}});
  return j.dump(2) + "\n";
}

ExperimentReport report_from_json(const std::string& text) {
  using nlohmann::json;
  ExperimentReport r;
  try {
    const json j = json::parse(text);
    r.name = j.at("name").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config = j.at("config").get<std::map<std::string, std::string>>();
    for (const auto& e : j.at("rows"))
      r.rows.push_back({e.at("image_id"), e.at("model_id"), e.at("method"), e.at("metric"), e.at("value")});
    for (const auto& e : j.at("aggregates"))
      r.aggregates.push_back({e.at("model_id"), e.at("method"), e.at("metric"), e.at("count"), e.at("mean"), e.at("std")});
    for (const auto& e : j.at("tests"))
      r.tests.push_back({e.at("metric"), e.at("method_a"), e.at("method_b"),
                         {e.at("u"), e.at("p"), e.at("n1"), e.at("n2"), e.at("exact")}});
  } catch (const json::exception& e) {
    throw FormatError(std::string("report json: ") + e.what());
  }
  const auto fresh = aggregate_rows(r.rows);
  if (fresh.size() != r.aggregates.size()) throw FormatError("report json: aggregate count does not match rows");
  for (std::size_t k = 0; k < fresh.size(); ++k) {
    const auto& a = fresh[k];
    const auto& b = r.aggregates[k];
    if (a.method != b.method || a.metric != b.metric || a.model_id != b.model_id || a.count != b.count ||
        std::abs(a.mean - b.mean) > 1e-12 || std::abs(a.std - b.std) > 1e-12)
      throw FormatError("report json: aggregate for " + b.method + "/" + b.metric + " does not match rows");
  }
  return r;
}

void export_report(const ExperimentReport& report, const std::filesystem::path& path, ReportFormat format) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << (format == ReportFormat::Csv ? report_to_csv(report) : report_to_json(report));
  if (!os) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------

const std::array<std::array<unsigned char, 3>, 256>& color_ramp() {
  static const auto ramp = [] {
    // blue -> cyan -> yellow -> red
    constexpr double stops[4][3] = {{0, 0, 255}, {0, 255, 255}, {255, 255, 0}, {255, 0, 0}};
    std::array<std::array<unsigned char, 3>, 256> t{};
    for (std::size_t i = 0; i < 256; ++i) {
      const double x = double(i) / 255.0 * 3.0;
      const std::size_t s = std::min<std::size_t>(std::size_t(x), 2);
      const double f = x - double(s);
      for (std::size_t c = 0; c < 3; ++c)
        t[i][c] = static_cast<unsigned char>(std::lround(stops[s][c] + f * (stops[s + 1][c] - stops[s][c])));
    }
    return t;
  }();
  return ramp;
}

Tensor heatmap_rgb(const Tensor& normalized_map, const Tensor& image, double alpha) {
  if (image.rank() != 3 || image.dim(0) != 1) throw ShapeError("heatmap: image must be [1,H,W], got " + shape_str(image.shape()));
  if (normalized_map.rank() != 2) throw ShapeError("heatmap: map must be 2-D, got " + shape_str(normalized_map.shape()));
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("heatmap: alpha must lie in [0,1]");
  const std::size_t H = image.dim(1), W = image.dim(2);
  const Tensor up = upsample_bilinear(normalized_map, H, W);
  const auto& ramp = color_ramp();
  Tensor rgb({3, H, W});
  for (std::size_t p = 0; p < H * W; ++p) {
    const double v = std::clamp(up[p], 0.0, 1.0);
    const auto& col = ramp[std::size_t(std::lround(v * 255.0))];
    const double g = std::clamp(image[p], 0.0, 1.0);
    for (std::size_t c = 0; c < 3; ++c) rgb[c * H * W + p] = alpha * col[c] / 255.0 + (1.0 - alpha) * g;
  }
  return rgb;
}

void render_heatmap(const Tensor& normalized_map, const Tensor& image, const std::filesystem::path& path, double alpha) {
  write_ppm(path, heatmap_rgb(normalized_map, image, alpha));
}

}  // namespace camlab
