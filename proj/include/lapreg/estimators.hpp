#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lapreg/common.hpp"
#include "lapreg/manifold.hpp"
#include "lapreg/spectral.hpp"

namespace lapreg {

/// Labeled responses on the first n points of an N-point cloud.
struct RegressionDataset {
  PointCloud cloud;
  Vector y;  // length n
  std::vector<Index> labeled_idx;
  double sigma = 0.1;

  Index n() const { return y.size(); }
  Index big_n() const { return cloud.size(); }
  /// Length-N vector with y at labeled vertices and 0 elsewhere.
  Vector padded() const;
  void validate() const;
};

/// y_i = f₀(x_i) + σ ε_i for i < n; the cloud must carry true values.
RegressionDataset make_synthetic_dataset(const PointCloud& cloud, Index n, double sigma, std::uint64_t noise_seed);

struct FitReport {
  Vector estimate;  // length N
  Index j = 0;
  double h = 0.0;
  double loss_n = 0.0;  // NaN without ground truth
  double loss_big_n = 0.0;
  double runtime_seconds = 0.0;
};

/// Fills loss_n and loss_N of `report` from the cloud's true values.
void attach_losses(FitReport& report, const RegressionDataset& data);

/// f̂ = Σ_{j≤J} ⟨u_j | Y⟩ u_j.
///
/// With N = n this is the ν-weighted coefficient formula over all vertices. With
/// N > n the inner product runs over labeled vertices only, with their ν-weights
/// renormalized to sum to one over the labeled set.
FitReport pcr_le(const RegressionDataset& data, const SpectralBasis& basis, Index j);

/// Multipliers and log-exponent overrides applied on top of the displayed rule.
struct TuningRule {
  double c_h = 1.0;
  double c_j = 1.0;
  /// Power of ln n in h; default −(1 − τ − 2(1 + 2τ/d)⌈β/2⌉)/(2β + d).
  std::optional<double> h_log_exponent;
  /// Power of ln N dividing J; default τ.
  std::optional<double> j_log_exponent;
};

struct Tuning {
  Index j = 1;
  double h = 1.0;
};

/// h = c_h n^{−1/(2β+d)} (ln n)^{e_h},  J = ⌈c_J h^{−d} / (ln N)^{e_J}⌉ clamped to [1, N].
Tuning tune_jh(double n, double big_n, int d, double beta, double tau, const TuningRule& rule = {});

struct RateReport {
  std::string estimator;
  double slope = 0.0;
  double slope_se = 0.0;
  double intercept = 0.0;
  double target = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool pass = false;
  std::vector<double> n_values;
  std::vector<double> mean_losses;
  std::string ledger;
};

/// OLS slope of log(mean loss) against log n.
/// Requires at least 4 distinct n values and min_replicates losses per n.
RateReport empirical_rate(const std::vector<double>& n_values, const std::vector<std::vector<double>>& losses,
                          std::size_t min_replicates = 10);

}  // namespace lapreg
