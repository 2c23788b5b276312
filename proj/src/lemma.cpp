#include "camlab/lemma.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "camlab/errors.hpp"
#include "camlab/parallel.hpp"
#include "camlab/rng.hpp"

namespace camlab {

std::string to_string(ResidualDist d) {
  switch (d) {
    case ResidualDist::Gaussian: return "gaussian";
    case ResidualDist::Uniform: return "uniform";
    case ResidualDist::Logistic: return "logistic";
  }
  return "?";
}

ResidualDist parse_residual_dist(const std::string& name) {
  if (name == "gaussian") return ResidualDist::Gaussian;
  if (name == "uniform") return ResidualDist::Uniform;
  if (name == "logistic") return ResidualDist::Logistic;
  throw ConfigError("unknown residual distribution '" + name + "'");
}

void ResidualModel::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("residual model: sigma must be > 0");
  if (num_classes <= 2) throw ConfigError("residual model: needs C > 2");
  if (!(true_std >= 0.0)) throw ConfigError("residual model: true-logit std must be >= 0");
}

namespace {

constexpr std::size_t kPartitions = 64;

class Sampler {
 public:
  Sampler(ResidualDist d, double mu, double sigma) : d_(d), mu_(mu), sigma_(sigma) {}

  double operator()(std::mt19937_64& rng) {
    switch (d_) {
      case ResidualDist::Gaussian:
        return mu_ + sigma_ * normal_(rng);
      case ResidualDist::Uniform:
        return mu_ + sigma_ * std::sqrt(3.0) * (2.0 * unit_(rng) - 1.0);
      case ResidualDist::Logistic: {
        double u;
        do u = unit_(rng);
        while (u <= 0.0);
        return mu_ + sigma_ * std::sqrt(3.0) / std::numbers::pi * std::log(u / (1.0 - u));
      }
    }
    return mu_;
  }

 private:
  ResidualDist d_;
  double mu_, sigma_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

struct Betas {
  double mean, max, lse;
};

Betas betas(const std::vector<double>& ys) {
  double sum = 0.0, m = ys[0];
  for (double y : ys) {
    sum += y;
    m = std::max(m, y);
  }
  return {sum / double(ys.size()), m, log_mean_exp(ys)};
}

Estimate mean_of(const std::vector<double>& xs) {
  const double n = double(xs.size());
  double m = 0.0;
  for (double x : xs) m += x;
  m /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / (n - 1.0) / n)};
}

// Unbiased variance; the standard error uses the sample fourth moment.
Estimate variance_of(const std::vector<double>& xs) {
  const double n = double(xs.size());
  double m = 0.0;
  for (double x : xs) m += x;
  m /= n;
  double s2 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double d = (x - m) * (x - m);
    s2 += d;
    m4 += d * d;
  }
  s2 /= n - 1.0;
  m4 /= n;
  const double v = (m4 - s2 * s2 * (n - 3.0) / (n - 1.0)) / n;
  return {s2, std::sqrt(std::max(v, 0.0))};
}

void check_trials(std::size_t trials) {
  if (trials < kMinTrials) throw ConfigError("lemma: at least " + std::to_string(kMinTrials) + " trials required");
}

}  // namespace

McReport run_mc(const ResidualModel& rm, std::size_t trials, std::size_t threads) {
  rm.validate();
  check_trials(trials);
  std::vector<double> ymax(trials), gap(trials);
  std::array<std::vector<double>, 3> dlt, bet;
  for (std::size_t a = 0; a < 3; ++a) {
    dlt[a].resize(trials);
    bet[a].resize(trials);
  }
  std::vector<std::size_t> violations(kPartitions, 0);

  parallel_for(kPartitions, threads, [&](std::size_t p) {
    std::mt19937_64 rng(stream_seed(rm.seed, p));
    Sampler residual(rm.dist, rm.mu, rm.sigma);
    std::normal_distribution<double> truth(rm.true_mean, rm.true_std);
    std::vector<double> ys(rm.num_classes - 1);
    for (std::size_t t = p * trials / kPartitions; t < (p + 1) * trials / kPartitions; ++t) {
      const double yc = rm.true_std > 0.0 ? truth(rng) : rm.true_mean;
      for (double& y : ys) y = residual(rng);
      const Betas b = betas(ys);
      if (!(b.mean <= b.lse && b.lse <= b.max)) ++violations[p];
      ymax[t] = b.max;
      gap[t] = b.lse - b.mean;
      bet[0][t] = b.mean;
      bet[1][t] = b.max;
      bet[2][t] = b.lse;
      for (std::size_t a = 0; a < 3; ++a) dlt[a][t] = yc - bet[a][t];
    }
  });

  McReport r;
  r.model = rm;
  r.trials = trials;
  for (std::size_t a = 0; a < 3; ++a)
    r.per_agg[a] = {kAggregators[a], mean_of(dlt[a]), variance_of(dlt[a]), variance_of(bet[a])};
  r.expected_max = mean_of(ymax);
  r.lse_mean_gap = mean_of(gap);
  for (auto v : violations) r.jensen_violations += v;
  return r;
}

double expected_max_closed_form(double mu, double sigma, std::size_t num_classes) {
  if (num_classes < 3) throw ConfigError("expected max: needs C > 2");
  return mu + sigma * std::sqrt(2.0 * std::log(double(num_classes - 1)));
}

ExpectedMax expected_max(const ResidualModel& rm, std::size_t trials, std::size_t threads) {
  const auto r = run_mc(rm, trials, threads);
  return {r.expected_max, expected_max_closed_form(rm.mu, rm.sigma, rm.num_classes)};
}

Estimate delta_variance(const ResidualModel& rm, Aggregator agg, std::size_t trials, std::size_t threads) {
  return run_mc(rm, trials, threads).stats(agg).delta_variance;
}

Estimate lse_mean_gap(double sigma, std::size_t num_classes, std::size_t trials, std::uint64_t seed,
                      std::size_t threads) {
  ResidualModel rm;
  rm.sigma = sigma;
  rm.num_classes = num_classes;
  rm.seed = seed;
  return run_mc(rm, trials, threads).lse_mean_gap;
}

std::size_t jensen_violations(std::size_t num_classes, std::size_t trials, double sigma, std::uint64_t seed) {
  if (num_classes < 3) throw ConfigError("jensen: needs C >= 3");
  std::mt19937_64 rng(stream_seed(seed, num_classes));
  std::normal_distribution<double> n(0.0, sigma);
  std::vector<double> ys(num_classes - 1);
  std::size_t bad = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    for (double& y : ys) y = n(rng);
    const Betas b = betas(ys);
    if (!(b.mean <= b.lse && b.lse <= b.max)) ++bad;
  }
  return bad;
}

std::vector<SweepRow> variance_sweep(const std::vector<std::size_t>& classes, const std::vector<double>& sigmas,
                                     std::size_t trials, std::uint64_t seed, std::size_t threads) {
  std::vector<SweepRow> rows;
  for (std::size_t C : classes)
    for (double s : sigmas) {
      ResidualModel rm;
      rm.num_classes = C;
      rm.sigma = s;
      rm.seed = seed;
      const auto r = run_mc(rm, trials, threads);
      for (const auto& st : r.per_agg) rows.push_back({st.agg, C, s, st.delta_variance.value, st.delta_variance.stderr_});
    }
  return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "aggregator,C,sigma,variance,stderr\n";
  for (const auto& r : rows)
    os << to_string(r.agg) << ',' << r.num_classes << ',' << r.sigma << ',' << r.variance << ',' << r.stderr_ << '\n';
  return os.str();
}

}  // namespace camlab
