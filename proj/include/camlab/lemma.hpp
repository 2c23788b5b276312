#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "camlab/cam.hpp"

namespace camlab {

enum class ResidualDist { Gaussian, Uniform, Logistic };

std::string to_string(ResidualDist d);
ResidualDist parse_residual_dist(const std::string& name);

/// Competing logits are C-1 i.i.d. draws with mean mu and std sigma; the
/// target logit is an independent Gaussian(true_mean, true_std).
struct ResidualModel {
  ResidualDist dist = ResidualDist::Gaussian;
  double mu = 0.0;
  double sigma = 1.0;
  std::size_t num_classes = 1000;
  double true_mean = 2.0;
  double true_std = 1.0;
  std::uint64_t seed = 17;

  /// Throws ConfigError unless sigma > 0 and C > 2.
  void validate() const;
};

inline constexpr std::size_t kMinTrials = 1000;

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

struct AggregatorStats {
  Aggregator agg = Aggregator::Mean;
  Estimate delta_mean;
  Estimate delta_variance;
  Estimate beta_variance;
};

struct McReport {
  ResidualModel model;
  std::size_t trials = 0;
  std::array<AggregatorStats, 3> per_agg;  // Mean, Max, LSE
  Estimate expected_max;
  Estimate lse_mean_gap;  // mean of beta_LSE - beta_mean
  /// Trials where beta_mean <= beta_LSE <= beta_max failed.
  std::size_t jensen_violations = 0;

  const AggregatorStats& stats(Aggregator a) const { return per_agg[std::size_t(a)]; }
};

/// Trials are split into fixed seeded partitions, so the report does not
/// depend on `threads`.
McReport run_mc(const ResidualModel& rm, std::size_t trials, std::size_t threads = 1);

/// mu + sigma * sqrt(2 ln(C-1)).
double expected_max_closed_form(double mu, double sigma, std::size_t num_classes);

struct ExpectedMax {
  Estimate mc;
  double closed_form = 0.0;
};
ExpectedMax expected_max(const ResidualModel& rm, std::size_t trials, std::size_t threads = 1);

/// Sample variance of Delta^c under `agg`, with its standard error.
Estimate delta_variance(const ResidualModel& rm, Aggregator agg, std::size_t trials, std::size_t threads = 1);

/// Mean |beta_LSE - beta_mean| for Gaussian residuals.
Estimate lse_mean_gap(double sigma, std::size_t num_classes, std::size_t trials, std::uint64_t seed = 17,
                      std::size_t threads = 1);

/// Count of Gaussian logit vectors (spread sigma) where
/// beta_mean <= beta_LSE <= beta_max fails.
std::size_t jensen_violations(std::size_t num_classes, std::size_t trials, double sigma, std::uint64_t seed = 17);

struct SweepRow {
  Aggregator agg;
  std::size_t num_classes;
  double sigma;
  double variance;
  double stderr_;
};

std::vector<SweepRow> variance_sweep(const std::vector<std::size_t>& classes, const std::vector<double>& sigmas,
                                     std::size_t trials, std::uint64_t seed = 17, std::size_t threads = 1);

/// Header "aggregator,C,sigma,variance,stderr" and one line per row.
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

}  // namespace camlab
