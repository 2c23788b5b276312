#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "camlab/cam.hpp"
#include "camlab/datagen.hpp"
#include "camlab/model.hpp"

namespace camlab {

struct MetricRow {
  std::string image_id;
  std::string model_id;
  std::string method;
  std::string metric;
  double value = 0.0;

  bool operator==(const MetricRow&) const = default;
};

struct Aggregate {
  std::string model_id;
  std::string method;
  std::string metric;
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // sample std (n-1), 0 for a single row
};

struct RankSumResult {
  double u = 0.0;  // Mann-Whitney U of the first sample
  double p = 1.0;  // two-sided
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  bool exact = false;
};

struct PairTest {
  std::string metric;
  std::string method_a;
  std::string method_b;
  RankSumResult result;
};

struct ExperimentReport {
  std::string name;
  std::uint64_t seed = 17;
  std::map<std::string, std::string> config;
  std::vector<MetricRow> rows;
  std::vector<Aggregate> aggregates;
  std::vector<PairTest> tests;

  /// Aggregate for (method, metric); throws std::out_of_range when absent.
  const Aggregate& aggregate(const std::string& method, const std::string& metric) const;
  std::vector<double> values(const std::string& method, const std::string& metric) const;
  const PairTest& test(const std::string& a, const std::string& b) const;
};

/// Mean per-pixel squared difference of two same-shaped grids.
double mse(const Tensor& a, const Tensor& b);
/// On the normalized maps.
double mse(const SaliencyMap& a, const SaliencyMap& b);

/// Two-sided Mann-Whitney rank-sum test: exact when n1 + n2 <= 12,
/// otherwise the normal approximation.
RankSumResult rank_sum(const std::vector<double>& xs, const std::vector<double>& ys);
/// Enumerates every rank assignment; limited to n1 + n2 <= 20.
RankSumResult rank_sum_exact(const std::vector<double>& xs, const std::vector<double>& ys);
/// Normal approximation with tie and continuity corrections.
RankSumResult rank_sum_normal(const std::vector<double>& xs, const std::vector<double>& ys);

/// Groups rows by (model, method, metric) in first-appearance order.
std::vector<Aggregate> aggregate_rows(const std::vector<MetricRow>& rows);

struct StudyOptions {
  std::string model_id = "model";
  std::size_t threads = 1;
  std::uint64_t seed = 17;
};

/// Per image and aggregator: MSE(DiffGradCAM, GradCAM) and
/// MSE(DiffGradCAM++, GradCAM++) for the true class, plus Mean-vs-other
/// rank-sum tests within each family.
ExperimentReport similarity_study(const Model& model, const Dataset& data,
                                  const std::vector<Aggregator>& variants = {std::begin(kAggregators),
                                                                            std::end(kAggregators)},
                                  const StudyOptions& opts = {});

/// Per image and method: MSE between the clean and fooled models' normalized
/// maps for the true class; rank-sum of the best method against each other.
ExperimentReport susceptibility_study(const Model& clean, const Model& fooled, const Dataset& data,
                                      const std::vector<MethodId>& methods, const StudyOptions& opts = {});

struct BenchResult {
  ExperimentReport report;
  std::map<std::string, std::vector<double>> timings_ms;  // kept runs only
};

/// Wall time per method over n runs, the first `discard` dropped. Methods
/// are interleaved per run so drift affects them equally.
BenchResult runtime_bench(const Model& model, const Tensor& image, std::size_t cls,
                          const std::vector<MethodId>& methods, std::size_t n = 110, std::size_t discard = 10,
                          const std::string& model_id = "model");

double accuracy(const Model& model, const Dataset& data, std::size_t threads = 1);

struct PairedAccuracy {
  double plain = 0.0;
  double sham = 0.0;
  double gap() const { return plain - sham; }
};
PairedAccuracy paired_accuracy_report(const Model& plain, const Model& shammed, const Dataset& data,
                                      std::size_t threads = 1);

/// image_id,model_id,method,metric,value
std::string report_to_csv(const ExperimentReport& report);
std::vector<MetricRow> rows_from_csv(const std::string& text);
std::string report_to_json(const ExperimentReport& report);
/// Throws FormatError when stored aggregates disagree with the rows.
ExperimentReport report_from_json(const std::string& text);

enum class ReportFormat { Csv, Json };
void export_report(const ExperimentReport& report, const std::filesystem::path& path, ReportFormat format);

/// 256-entry blue-cyan-yellow-red ramp; entry i for value i/255.
const std::array<std::array<unsigned char, 3>, 256>& color_ramp();
/// Upsampled heatmap blended onto the grayscale image, [3,H,W] in [0,1].
Tensor heatmap_rgb(const Tensor& normalized_map, const Tensor& image, double alpha = 0.5);
void render_heatmap(const Tensor& normalized_map, const Tensor& image, const std::filesystem::path& path,
                    double alpha = 0.5);

}  // namespace camlab
