#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "lapreg/common.hpp"
#include "lapreg/graph.hpp"
#include "lapreg/manifold.hpp"
#include "lapreg/spectral.hpp"

namespace lapreg {

/// One named empirical check. Statistics are always filled, pass or fail.
struct CheckResult {
  std::string name;
  std::string property;  // the mathematical statement under test, in words
  double statistic = 0.0;
  double target = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool pass = false;
  bool applicable = true;  // false when e.g. the admissible window is empty
  nlohmann::json metadata = nlohmann::json::object();
};

struct DiagnosticsReport {
  std::vector<CheckResult> checks;

  bool all_pass() const;
  const CheckResult* find(const std::string& name) const;
  /// Fixed-width text table: name, statistic, [lower, upper], status.
  std::string table() const;
};

void to_json(nlohmann::json& j, const CheckResult& c);
void from_json(const nlohmann::json& j, CheckResult& c);
void to_json(nlohmann::json& j, const DiagnosticsReport& r);
void from_json(const nlohmann::json& j, DiagnosticsReport& r);

struct ThOracleResult {
  Vector values;       // T_h f at each query; NaN where the ball caught no sample
  Vector std_errors;
  Vector ball_counts;  // samples inside B(x, h)
  bool any_empty = false;
};

/// Monte Carlo estimate of T_h f(x) = (h² P₀(B(x,h)))⁻¹ ∫_{B(x,h)} (f(x) − f(y)) p₀(y) dμ(y)
/// from m_mc fresh density draws shared by numerator and denominator (ratio estimator,
/// delta-method standard errors).
ThOracleResult t_h_oracle(const ManifoldSpec& spec, const TruthFamily& family, double h, const Matrix& queries,
                          Index m_mc, std::uint64_t seed);

struct ConcentrationOptions {
  Index m_mc = 200000;
  std::uint64_t seed = 7;
};

/// max_x |ℒf − T_h f| on the cloud together with the rate factor (ln N/N)^{1/2} h^{−(1+d/2)}
/// and their ratio (metadata "rate_factor", "ratio"). Reports only; never fails.
CheckResult check_concentration(const PointCloud& cloud, double h, const TruthFamily& family,
                                const ConcentrationOptions& options = {});

/// Log-log slope of the concentration ratio against N, averaged per N; passes when
/// |slope| <= tolerance.
CheckResult concentration_trend(const std::vector<CheckResult>& entries, double tolerance = 0.3);

/// ‖f₀ − p_J(e^{−tℒ} f_t)‖_{L^∞(ν)} with f_t the Taylor lift of order ⌈β/2⌉ − 1.
double approximation_error(const LaplacianOperator& op, const SpectralBasis& basis, const Vector& f0, double beta,
                           Index j, double t);

struct ApproximationOptions {
  double c = 4.0;      // t = c ln N / λ_J
  double band = 0.10;  // allowed relative increase between consecutive J
};

/// Error per J on the grid with t = c ln N / λ_J, recorded next to the rate expression
/// (J^{−2/d} ln N / h²)^{⌈β/2⌉}(h^β + 1_{β>1}(ln N / N h^d)^{1/2} h). Passes when no
/// consecutive step raises the error by more than the band.
CheckResult check_approximation(const LaplacianOperator& op, const SpectralBasis& basis, const Vector& f0,
                                double beta, int d, const std::vector<Index>& j_grid,
                                const ApproximationOptions& options = {});

struct HeatBoundOptions {
  double a0 = 64.0;  // t₀ = a₀ h² ln(N h^d)
  double t_max = 1.0;
  Index grid_points = 8;
  double slope_tolerance = 0.35;
  double band = 50.0;
};

/// Slope of log p̄_t against log t over a log-spaced grid in [t₀, t_max], p̄_t the mean
/// of the diagonal p_t(x, x); also checks that max_x p_t t^{d/2} and
/// min_x p_t t^{d/2} ln^d N each vary by at most `band` across the grid.
CheckResult check_heat_bounds(const SpectralBasis& basis, int d, const HeatBoundOptions& options = {});

struct NormComparisonOptions {
  Index trials = 200;
  std::uint64_t seed = 11;
  double max_slope = 1.3;
};

/// Per J: the exact supremum of ‖f‖²_∞/‖f‖²_{L²(ν)} over span{u_1..u_J}, which is
/// max_x Σ_{j≤J} u_j(x)², and a running maximum over random trial directions.
/// Passes when the log-log slope of the supremum in J is at most max_slope.
CheckResult check_norm_comparison(const SpectralBasis& basis, int d, const std::vector<Index>& j_grid,
                                  const NormComparisonOptions& options = {});

struct WeylOptions {
  Index lo_min = 10;
  double lo_scale = 1.0;  // window start max(lo_min, lo_scale ln^d N)
  double hi_scale = 1.0;  // window end hi_scale h^{−d} / ln^{d/2} N
  double tolerance = 0.4;
};

struct IndexWindow {
  Index lo = 0;
  Index hi = -1;
  bool empty() const { return hi - lo + 1 < 3; }
};

/// 1-based eigen-index window for the Weyl check.
IndexWindow weyl_window(Index big_n, double h, int d, const WeylOptions& options = {});

/// Slope of log λ_j against log j over the window; target 2/d.
CheckResult check_weyl(const SpectralBasis& basis, int d, const WeylOptions& options = {});

struct VolumeOptions {
  double r_min_scale = 8.0;  // r_min = r_min_scale (ln N / N)^{1/d}
  double diameter = 2.0;
  double max_ratio = 10.0;
};

/// For dyadic radii in [r_min, diameter/4]: max_i μ_i^{(r)} / min_i μ_i^{(r)}.
CheckResult check_volume_regularity(const Matrix& points, int d, const VolumeOptions& options = {});

}  // namespace lapreg
