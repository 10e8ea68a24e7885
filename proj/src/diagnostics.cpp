#include "lapreg/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <thread>

namespace lapreg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> log_spaced(double lo, double hi, Index count) {
  std::vector<double> out;
  if (count == 1) return {lo};
  for (Index i = 0; i < count; ++i) {
    const double s = static_cast<double>(i) / static_cast<double>(count - 1);
    out.push_back(std::exp(std::log(lo) + s * (std::log(hi) - std::log(lo))));
  }
  return out;
}

// Runs body(i) for i in [0, count) over hardware threads; each i is independent.
template <class Body>
void parallel_for(Index count, Body&& body) {
  const Index workers = std::clamp<Index>(static_cast<Index>(std::thread::hardware_concurrency()), 1, 16);
  if (workers == 1 || count < 64) {
    for (Index i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (Index w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (Index i = w; i < count; i += workers) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

// ---------------------------------------------------------------- report

bool DiagnosticsReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

const CheckResult* DiagnosticsReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

std::string DiagnosticsReport::table() const {
  std::ostringstream os;
  os << std::left << std::setw(28) << "check" << std::right << std::setw(14) << "statistic" << std::setw(14)
     << "lower" << std::setw(14) << "upper" << "  status\n";
  for (const auto& c : checks) {
    os << std::left << std::setw(28) << c.name << std::right << std::setprecision(5) << std::setw(14) << c.statistic
       << std::setw(14) << c.lower << std::setw(14) << c.upper << "  "
       << (!c.applicable ? "N/A" : c.pass ? "PASS" : "FAIL") << '\n';
  }
  return os.str();
}

void to_json(nlohmann::json& j, const CheckResult& c) {
  auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
  j = {{"name", c.name},        {"property", c.property},     {"statistic", num(c.statistic)},
       {"target", num(c.target)}, {"lower", num(c.lower)},      {"upper", num(c.upper)},
       {"pass", c.pass},         {"applicable", c.applicable}, {"metadata", c.metadata}};
}

void from_json(const nlohmann::json& j, CheckResult& c) {
  auto num = [&](const char* key) { return j.at(key).is_null() ? kNaN : j.at(key).get<double>(); };
  c.name = j.at("name").get<std::string>();
  c.property = j.at("property").get<std::string>();
  c.statistic = num("statistic");
  c.target = num("target");
  c.lower = num("lower");
  c.upper = num("upper");
  c.pass = j.at("pass").get<bool>();
  c.applicable = j.at("applicable").get<bool>();
  c.metadata = j.value("metadata", nlohmann::json::object());
}

void to_json(nlohmann::json& j, const DiagnosticsReport& r) {
  j = {{"all_pass", r.all_pass()}, {"checks", r.checks}};
}

void from_json(const nlohmann::json& j, DiagnosticsReport& r) {
  r.checks = j.at("checks").get<std::vector<CheckResult>>();
}

// ---------------------------------------------------------------- T_h oracle

ThOracleResult t_h_oracle(const ManifoldSpec& spec, const TruthFamily& family, double h, const Matrix& queries,
                          Index m_mc, std::uint64_t seed) {
  require(h > 0.0, "t_h_oracle: h must be positive");
  require(m_mc >= 10000, "t_h_oracle: need at least 1e4 Monte Carlo draws");
  require(queries.cols() == spec.ambient_dim, "t_h_oracle: query dimension differs from the manifold's");
  const Matrix samples = sample_points(spec, m_mc, seed);
  const Vector f_samples = eval_truth(spec, samples, family);
  const Vector f_queries = eval_truth(spec, queries, family);
  const RadiusIndex index(samples, h);

  ThOracleResult out;
  const Index q = queries.rows();
  out.values.resize(q);
  out.std_errors.resize(q);
  out.ball_counts.resize(q);
  parallel_for(q, [&](Index i) {
    double count = 0.0, sum = 0.0, sum2 = 0.0;
    index.for_each_within(queries.row(i), h, [&](Index j) {
      const double g = f_queries(i) - f_samples(j);
      count += 1.0;
      sum += g;
      sum2 += g * g;
    });
    out.ball_counts(i) = count;
    if (count == 0.0) {
      out.values(i) = out.std_errors(i) = kNaN;
      return;
    }
    const double ratio = sum / count;
    // Σ_B (g − R)² / count² is the delta-method variance of the ratio estimator
    const double ss = std::max(0.0, sum2 - count * ratio * ratio);
    out.values(i) = ratio / (h * h);
    out.std_errors(i) = std::sqrt(ss) / count / (h * h);
  });
  out.any_empty = (out.ball_counts.array() == 0.0).any();
  return out;
}

// ---------------------------------------------------------------- concentration

CheckResult check_concentration(const PointCloud& cloud, double h, const TruthFamily& family,
                                const ConcentrationOptions& options) {
  CheckResult c;
  c.name = "concentration";
  c.property = "sup-norm deviation of the graph Laplacian from its nonlocal mean operator";
  const int d = cloud.manifold.intrinsic_dim();
  const double n = static_cast<double>(cloud.size());
  const LaplacianOperator op(build_graph(cloud.points, h));
  const Vector f = eval_truth(cloud.manifold, cloud.points, family);
  const Vector lf = op.apply(f);
  const ThOracleResult th = t_h_oracle(cloud.manifold, family, h, cloud.points, options.m_mc, options.seed);

  double deviation = 0.0, worst_se = 0.0;
  for (Index i = 0; i < cloud.size(); ++i) {
    if (!std::isfinite(th.values(i))) continue;
    const double dev = std::abs(lf(i) - th.values(i));
    if (dev > deviation) {
      deviation = dev;
      worst_se = th.std_errors(i);
    }
  }
  const double rate = std::sqrt(std::log(n) / n) * std::pow(h, -(1.0 + d / 2.0));
  c.statistic = deviation;
  c.target = kNaN;
  c.lower = 0.0;
  c.upper = kNaN;
  c.pass = true;
  c.metadata = {{"N", cloud.size()},         {"h", h},
                {"rate_factor", rate},       {"ratio", deviation / rate},
                {"oracle_se_at_max", worst_se}, {"empty_balls", th.any_empty},
                {"m_mc", options.m_mc}};
  return c;
}

CheckResult concentration_trend(const std::vector<CheckResult>& entries, double tolerance) {
  CheckResult c;
  c.name = "concentration_trend";
  c.property = "concentration ratio stays bounded as N grows (log-log slope near 0)";
  c.target = 0.0;
  c.lower = -tolerance;
  c.upper = tolerance;
  std::map<double, std::vector<double>> by_n;
  for (const auto& e : entries) by_n[e.metadata.at("N").get<double>()].push_back(e.metadata.at("ratio").get<double>());
  std::vector<double> x, y;
  nlohmann::json table = nlohmann::json::array();
  for (const auto& [big_n, ratios] : by_n) {
    double m = 0.0;
    for (double r : ratios) m += r;
    m /= static_cast<double>(ratios.size());
    x.push_back(std::log(big_n));
    y.push_back(std::log(m));
    table.push_back({{"N", big_n}, {"mean_ratio", m}, {"replicates", ratios.size()}});
  }
  c.metadata["per_n"] = table;
  if (x.size() < 2) {
    c.applicable = false;
    c.statistic = kNaN;
    return c;
  }
  const LineFit fit = fit_line(x, y);
  c.statistic = fit.slope;
  c.metadata["slope_se"] = fit.slope_se;
  c.pass = std::abs(fit.slope) <= tolerance;
  return c;
}

// ---------------------------------------------------------------- approximation

double approximation_error(const LaplacianOperator& op, const SpectralBasis& basis, const Vector& f0, double beta,
                           Index j, double t) {
  const Vector lifted = taylor_lift(op, t, f0, beta);
  const Vector approx = project(basis, j, heat_apply(basis, t, lifted));
  double err = 0.0;
  for (Index x = 0; x < f0.size(); ++x)
    if (basis.nu(x) > 0.0) err = std::max(err, std::abs(f0(x) - approx(x)));
  return err;
}

CheckResult check_approximation(const LaplacianOperator& op, const SpectralBasis& basis, const Vector& f0,
                                double beta, int d, const std::vector<Index>& j_grid,
                                const ApproximationOptions& options) {
  CheckResult c;
  c.name = "approximation";
  c.property = "projected heat-smoothed Taylor lift approximates f0 with error non-increasing in J";
  c.target = 0.0;
  c.lower = 0.0;
  c.upper = options.band;
  const double big_n = static_cast<double>(basis.n());
  const double h = basis.h;
  const int k = static_cast<int>(std::ceil(beta / 2.0));

  nlohmann::json rows = nlohmann::json::array();
  std::vector<double> errors;
  for (Index j : j_grid) {
    require(j >= 1 && j <= basis.j_max(), "check_approximation: J outside the computed basis");
    const double lambda = basis.eigenvalues(j - 1);
    if (lambda <= 0.0) {
      rows.push_back({{"J", j}, {"applicable", false}});
      continue;
    }
    const double t = options.c * std::log(big_n) / lambda;
    const double err = approximation_error(op, basis, f0, beta, j, t);
    errors.push_back(err);
    // (J^{-2/d} ln N / h²)^{⌈β/2⌉} (h^β + 1_{β>1} (ln N / N h^d)^{1/2} h)
    const double logn = std::log(big_n);
    const double rate = std::pow(std::pow(static_cast<double>(j), -2.0 / d) * logn / (h * h), k) *
                        (std::pow(h, beta) + (beta > 1.0 ? std::sqrt(logn / (big_n * std::pow(h, d))) * h : 0.0));
    rows.push_back({{"J", j}, {"t", t}, {"lambda_J", lambda}, {"error", err}, {"rate", rate}});
  }
  c.metadata["per_j"] = rows;
  c.metadata["k"] = k - 1;
  c.metadata["h"] = h;
  if (errors.size() < 2) {
    c.applicable = false;
    c.statistic = kNaN;
    return c;
  }
  // worst relative increase between consecutive grid points
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < errors.size(); ++i) {
    const double scale = std::max(errors[i - 1], 1e-300);
    worst = std::max(worst, (errors[i] - errors[i - 1]) / scale);
  }
  c.statistic = worst;
  c.pass = worst <= options.band;
  return c;
}

// ---------------------------------------------------------------- heat kernel bounds

CheckResult check_heat_bounds(const SpectralBasis& basis, int d, const HeatBoundOptions& options) {
  CheckResult c;
  c.name = "heat_bounds";
  c.property = "on-diagonal heat kernel scales like t^(-d/2) inside the admissible window";
  c.target = -d / 2.0;
  c.lower = c.target - options.slope_tolerance;
  c.upper = c.target + options.slope_tolerance;
  const double big_n = static_cast<double>(basis.n());
  const double h = basis.h;
  const double log_nhd = std::log(big_n * std::pow(h, d));
  const double t0 = options.a0 * h * h * log_nhd;
  c.metadata = {{"t0", t0}, {"t_max", options.t_max}, {"a0", options.a0}, {"N", basis.n()}, {"h", h}};
  if (!(log_nhd > 0.0) || !(t0 < options.t_max) || options.grid_points < 2) {
    c.applicable = false;
    c.statistic = kNaN;
    c.metadata["reason"] = "empty time window";
    return c;
  }
  const double lambda_top = basis.eigenvalues(basis.j_max() - 1);
  c.metadata["truncation_factor"] = basis.j_max() < basis.n() ? std::exp(-t0 * lambda_top) : 0.0;

  const double logd_n = std::pow(std::log(big_n), d);
  std::vector<double> lt, lp, upper_series, lower_series;
  nlohmann::json rows = nlohmann::json::array();
  for (double t : log_spaced(t0, options.t_max, options.grid_points)) {
    const Vector diag = HeatKernel(basis, t).diagonal();
    const double mean = diag.mean();
    const double scale = std::pow(t, d / 2.0);
    upper_series.push_back(diag.maxCoeff() * scale);
    lower_series.push_back(diag.minCoeff() * scale * logd_n);
    lt.push_back(std::log(t));
    lp.push_back(std::log(mean));
    rows.push_back({{"t", t}, {"mean_diag", mean}, {"max_diag", diag.maxCoeff()}, {"min_diag", diag.minCoeff()}});
  }
  const LineFit fit = fit_line(lt, lp);
  auto spread = [](const std::vector<double>& v) {
    return *std::max_element(v.begin(), v.end()) / *std::min_element(v.begin(), v.end());
  };
  const double up_spread = spread(upper_series), low_spread = spread(lower_series);
  c.statistic = fit.slope;
  c.metadata["grid"] = rows;
  c.metadata["upper_band_spread"] = up_spread;
  c.metadata["lower_band_spread"] = low_spread;
  c.metadata["r2"] = fit.r2;
  c.pass = fit.slope >= c.lower && fit.slope <= c.upper && up_spread <= options.band && low_spread <= options.band &&
           *std::min_element(lower_series.begin(), lower_series.end()) > 0.0;
  return c;
}

// ---------------------------------------------------------------- norm comparison

CheckResult check_norm_comparison(const SpectralBasis& basis, int d, const std::vector<Index>& j_grid,
                                  const NormComparisonOptions& options) {
  CheckResult c;
  c.name = "norm_comparison";
  c.property = "sup-norm to L2(nu)-norm ratio on span{u_1..u_J} grows at most linearly in J";
  c.target = 1.0;
  c.lower = -std::numeric_limits<double>::infinity();
  c.upper = options.max_slope;
  require(!j_grid.empty(), "check_norm_comparison: empty J grid");
  const Index j_top = *std::max_element(j_grid.begin(), j_grid.end());
  require(j_top <= basis.j_max(), "check_norm_comparison: J grid exceeds the basis");
  const double logn = std::log(static_cast<double>(basis.n()));

  Rng rng(options.seed);
  std::normal_distribution<double> normal;
  Matrix directions(j_top, options.trials);
  for (Index i = 0; i < directions.size(); ++i) directions.data()[i] = normal(rng);

  const Matrix squares = basis.eigenvectors.leftCols(j_top).array().square().matrix();
  std::vector<Index> grid = j_grid;
  std::sort(grid.begin(), grid.end());
  std::vector<double> lj, ls;
  double running = 0.0, worst_normalized = 0.0;
  nlohmann::json rows = nlohmann::json::array();
  for (Index j : grid) {
    const double sup = squares.leftCols(j).rowwise().sum().maxCoeff();
    if (options.trials > 0) {
      const Matrix f = basis.eigenvectors.leftCols(j) * directions.topRows(j);
      for (Index s = 0; s < options.trials; ++s) {
        // coefficients are ν-orthonormal coordinates, so ‖f‖²_ν = ‖c‖²
        const double l2 = directions.col(s).head(j).squaredNorm();
        running = std::max(running, f.col(s).cwiseAbs2().maxCoeff() / l2);
      }
    }
    const double normalized = sup / (static_cast<double>(j) * std::pow(logn, 1.5 * d));
    worst_normalized = std::max(worst_normalized, normalized);
    lj.push_back(std::log(static_cast<double>(j)));
    ls.push_back(std::log(sup));
    rows.push_back({{"J", j}, {"sup_ratio", sup}, {"trial_max_ratio", running}, {"normalized", normalized}});
  }
  c.metadata["per_j"] = rows;
  c.metadata["max_normalized"] = worst_normalized;
  if (lj.size() < 2) {
    c.statistic = kNaN;
    c.applicable = false;
    return c;
  }
  const LineFit fit = fit_line(lj, ls);
  c.statistic = fit.slope;
  c.pass = fit.slope <= options.max_slope;
  return c;
}

// ---------------------------------------------------------------- Weyl

IndexWindow weyl_window(Index big_n, double h, int d, const WeylOptions& options) {
  const double logn = std::log(static_cast<double>(big_n));
  IndexWindow w;
  w.lo = std::max<Index>(options.lo_min, static_cast<Index>(std::ceil(options.lo_scale * std::pow(logn, d))));
  w.hi = static_cast<Index>(std::floor(options.hi_scale * std::pow(h, -d) / std::pow(logn, d / 2.0)));
  w.hi = std::min(w.hi, big_n);
  return w;
}

CheckResult check_weyl(const SpectralBasis& basis, int d, const WeylOptions& options) {
  CheckResult c;
  c.name = "weyl";
  c.property = "eigenvalues grow like j^(2/d) in the middle of the spectrum";
  c.target = 2.0 / d;
  c.lower = c.target - options.tolerance;
  c.upper = c.target + options.tolerance;
  IndexWindow w = weyl_window(basis.n(), basis.h, d, options);
  c.metadata = {{"window_lo", w.lo}, {"window_hi", w.hi}, {"N", basis.n()}, {"h", basis.h}};
  if (w.hi > basis.j_max()) {
    c.metadata["clipped_to_basis"] = basis.j_max();
    w.hi = basis.j_max();
  }
  if (w.empty()) {
    c.applicable = false;
    c.statistic = kNaN;
    c.metadata["reason"] = "window empty";
    return c;
  }
  std::vector<double> lj, ll;
  for (Index j = w.lo; j <= w.hi; ++j) {
    const double lambda = basis.eigenvalues(j - 1);
    if (lambda <= 0.0) continue;
    lj.push_back(std::log(static_cast<double>(j)));
    ll.push_back(std::log(lambda));
  }
  if (lj.size() < 3) {
    c.applicable = false;
    c.statistic = kNaN;
    c.metadata["reason"] = "window has fewer than three positive eigenvalues";
    return c;
  }
  const LineFit fit = fit_line(lj, ll);
  c.statistic = fit.slope;
  c.metadata["r2"] = fit.r2;
  c.pass = fit.slope >= c.lower && fit.slope <= c.upper;
  return c;
}

// ---------------------------------------------------------------- volume regularity

CheckResult check_volume_regularity(const Matrix& points, int d, const VolumeOptions& options) {
  CheckResult c;
  c.name = "volume_regularity";
  c.property = "ball counts scale uniformly as N r^d across points";
  c.target = 1.0;
  c.lower = 1.0;
  c.upper = options.max_ratio;
  const double big_n = static_cast<double>(points.rows());
  const double r_min = options.r_min_scale * std::pow(std::log(big_n) / big_n, 1.0 / d);
  const double r_max = options.diameter / 4.0;
  nlohmann::json rows = nlohmann::json::array();
  double worst = 0.0;
  for (double r = r_min; r <= r_max; r *= 2.0) {
    const Vector counts = ball_counts(points, r);
    const double ratio = counts.maxCoeff() / counts.minCoeff();
    const double scale = big_n * std::pow(r, d);
    rows.push_back({{"r", r}, {"ratio", ratio}, {"min_normalized", counts.minCoeff() / scale},
                    {"max_normalized", counts.maxCoeff() / scale}});
    worst = std::max(worst, ratio);
  }
  c.metadata["per_r"] = rows;
  if (rows.empty()) {
    c.applicable = false;
    c.statistic = kNaN;
    c.metadata["reason"] = "empty radius grid";
    return c;
  }
  c.statistic = worst;
  c.pass = worst < options.max_ratio;
  return c;
}

}  // namespace lapreg
