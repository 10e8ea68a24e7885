#include "lapreg/estimators.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

namespace lapreg {

Vector RegressionDataset::padded() const {
  Vector out = Vector::Zero(big_n());
  for (std::size_t i = 0; i < labeled_idx.size(); ++i) out(labeled_idx[i]) = y(static_cast<Index>(i));
  return out;
}

void RegressionDataset::validate() const {
  require(n() >= 1 && n() <= big_n(), "dataset: need 1 <= n <= N");
  require(static_cast<Index>(labeled_idx.size()) == n(), "dataset: labeled index count differs from n");
  require(sigma >= 0.0, "dataset: sigma must be nonnegative");
  for (Index i : labeled_idx) require(i >= 0 && i < big_n(), "dataset: labeled index out of range");
}

RegressionDataset make_synthetic_dataset(const PointCloud& cloud, Index n, double sigma, std::uint64_t noise_seed) {
  require(cloud.true_values.has_value(), "make_synthetic_dataset: cloud has no true values");
  require(n >= 1 && n <= cloud.size(), "make_synthetic_dataset: need 1 <= n <= N");
  RegressionDataset data;
  data.cloud = cloud;
  data.sigma = sigma;
  data.labeled_idx.resize(static_cast<std::size_t>(n));
  data.y.resize(n);
  Rng rng(noise_seed);
  std::normal_distribution<double> normal;
  for (Index i = 0; i < n; ++i) {
    data.labeled_idx[static_cast<std::size_t>(i)] = i;
    data.y(i) = (*cloud.true_values)(i) + sigma * normal(rng);
  }
  return data;
}

void attach_losses(FitReport& report, const RegressionDataset& data) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (!data.cloud.true_values) {
    report.loss_n = report.loss_big_n = nan;
    return;
  }
  const Vector& f0 = *data.cloud.true_values;
  double acc = 0.0;
  for (Index i : data.labeled_idx) acc += std::pow(report.estimate(i) - f0(i), 2);
  report.loss_n = std::sqrt(acc / static_cast<double>(data.n()));
  report.loss_big_n = empirical_loss(report.estimate, f0, data.big_n());
}

FitReport pcr_le(const RegressionDataset& data, const SpectralBasis& basis, Index j) {
  const auto start = std::chrono::steady_clock::now();
  data.validate();
  require(basis.n() == data.big_n(), "pcr_le: basis built on a different cloud");
  require(j >= 1 && j <= basis.j_max(), "pcr_le: J must lie in [1, J_max]");

  Vector weights = Vector::Zero(data.big_n());
  double labeled_mass = 0.0;
  for (std::size_t i = 0; i < data.labeled_idx.size(); ++i) {
    const Index x = data.labeled_idx[i];
    weights(x) += basis.nu(x) * data.y(static_cast<Index>(i));
    labeled_mass += basis.nu(x);
  }
  if (data.n() < data.big_n()) weights /= labeled_mass;

  const auto u = basis.eigenvectors.leftCols(j);
  FitReport report;
  report.estimate = u * (u.transpose() * weights);
  report.j = j;
  report.h = basis.h;
  attach_losses(report, data);
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

Tuning tune_jh(double n, double big_n, int d, double beta, double tau, const TuningRule& rule) {
  require(n > 1.0 && big_n >= n, "tune_jh: need 1 < n <= N");
  require(beta > 0.0 && d >= 1, "tune_jh: need beta > 0 and d >= 1");
  require(tau > d / 2.0, "tune_jh: need tau > d/2");
  const double k = std::ceil(beta / 2.0);
  const double denom = 2.0 * beta + d;
  const double e_h = rule.h_log_exponent.value_or(-(1.0 - tau - 2.0 * (1.0 + 2.0 * tau / d) * k) / denom);
  const double e_j = rule.j_log_exponent.value_or(tau);

  Tuning out;
  out.h = rule.c_h * std::pow(n, -1.0 / denom) * std::pow(std::log(n), e_h);
  const double j = rule.c_j * std::pow(out.h, -d) / std::pow(std::log(big_n), e_j);
  const double cap = std::floor(big_n);
  out.j = static_cast<Index>(std::clamp(std::ceil(j - 1e-9), 1.0, cap));
  return out;
}

RateReport empirical_rate(const std::vector<double>& n_values, const std::vector<std::vector<double>>& losses,
                          std::size_t min_replicates) {
  require(n_values.size() == losses.size(), "empirical_rate: one loss list per n");
  require(std::set<double>(n_values.begin(), n_values.end()).size() >= 4,
          "empirical_rate: need at least 4 distinct n values");
  RateReport report;
  std::vector<double> x, y;
  for (std::size_t i = 0; i < n_values.size(); ++i) {
    require(n_values[i] > 0.0, "empirical_rate: n must be positive");
    require(losses[i].size() >= min_replicates, "empirical_rate: too few replicates at n = " +
                                                    std::to_string(static_cast<long long>(n_values[i])));
    double mean = 0.0;
    for (double l : losses[i]) mean += l;
    mean /= static_cast<double>(losses[i].size());
    require(mean > 0.0 && std::isfinite(mean), "empirical_rate: mean loss must be positive and finite");
    report.n_values.push_back(n_values[i]);
    report.mean_losses.push_back(mean);
    x.push_back(std::log(n_values[i]));
    y.push_back(std::log(mean));
  }
  const LineFit fit = fit_line(x, y);
  report.slope = fit.slope;
  report.slope_se = fit.slope_se;
  report.intercept = fit.intercept;
  return report;
}

}  // namespace lapreg
