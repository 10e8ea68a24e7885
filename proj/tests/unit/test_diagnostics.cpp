#include <cmath>

#include "doctest.h"
#include "lapreg/diagnostics.hpp"

using namespace lapreg;

namespace {

ManifoldSpec spec(ManifoldKind kind, int ambient, std::uint64_t seed) {
  ManifoldSpec s;
  s.kind = kind;
  s.ambient_dim = ambient;
  s.seed = seed;
  return s;
}

Matrix circle_points(std::initializer_list<double> angles) {
  Matrix q(static_cast<Index>(angles.size()), 2);
  Index i = 0;
  for (double a : angles) {
    q(i, 0) = std::cos(a);
    q(i, 1) = std::sin(a);
    ++i;
  }
  return q;
}

}  // namespace

TEST_CASE("T_h oracle on the circle against the closed form") {
  const ManifoldSpec s = spec(ManifoldKind::circle, 2, 1);
  const double h = 0.4;
  const double a = 2 * std::asin(h / 2);
  const Matrix q = circle_points({0.0, 1.0, 2.5});
  const ThOracleResult r = t_h_oracle(s, TruthFamily::trig(1), h, q, 400000, 2);
  CHECK_FALSE(r.any_empty);
  for (Index i = 0; i < 3; ++i) {
    const double angle = std::atan2(q(i, 1), q(i, 0));
    const double want = std::cos(angle) * (1 - std::sin(a) / a) / (h * h);
    CHECK(std::abs(r.values(i) - want) <= 3 * r.std_errors(i));
  }
}

TEST_CASE("T_h oracle trivial cases and consistency") {
  const ManifoldSpec s = spec(ManifoldKind::sphere2, 3, 3);
  Matrix q(2, 3);
  q << 1, 0, 0, 0, 0, 1;
  const ThOracleResult flat = t_h_oracle(s, TruthFamily::trig(0), 0.5, q, 20000, 4);
  CHECK(flat.values.cwiseAbs().maxCoeff() < 1e-12);

  const ManifoldSpec c = spec(ManifoldKind::circle, 2, 5);
  // trig-1 is cos θ; at θ = π/2 the ball is symmetric and f − f(x) is odd
  const ThOracleResult odd = t_h_oracle(c, TruthFamily::trig(1), 0.3, circle_points({M_PI / 2}), 200000, 6);
  CHECK(std::abs(odd.values(0)) <= 3 * odd.std_errors(0));

  const Matrix pts = circle_points({0.3, 1.7});
  const ThOracleResult small = t_h_oracle(c, TruthFamily::trig(2), 0.5, pts, 50000, 7);
  const ThOracleResult large = t_h_oracle(c, TruthFamily::trig(2), 0.5, pts, 200000, 8);
  for (Index i = 0; i < 2; ++i)
    CHECK(std::abs(small.values(i) - large.values(i)) <= 2 * std::hypot(small.std_errors(i), large.std_errors(i)));
  CHECK_THROWS_AS(t_h_oracle(c, TruthFamily::trig(1), 0.5, pts, 10, 1), Error);
}

TEST_CASE("T_h oracle is reproducible") {
  const ManifoldSpec c = spec(ManifoldKind::circle, 2, 5);
  const Matrix pts = circle_points({0.1, 0.2});
  const ThOracleResult a = t_h_oracle(c, TruthFamily::trig(1), 0.5, pts, 30000, 11);
  const ThOracleResult b = t_h_oracle(c, TruthFamily::trig(1), 0.5, pts, 30000, 11);
  CHECK(a.values == b.values);
}

TEST_CASE("concentration check") {
  ConcentrationOptions o;
  o.m_mc = 20000;
  const PointCloud flat = sample_cloud(spec(ManifoldKind::circle, 2, 9), 200, TruthFamily::trig(0));
  CHECK(check_concentration(flat, 0.3, TruthFamily::trig(0), o).statistic == 0.0);
  const PointCloud big_h = sample_cloud(spec(ManifoldKind::circle, 2, 9), 100, TruthFamily::trig(1));
  const CheckResult r = check_concentration(big_h, 3.0, TruthFamily::trig(1), o);
  CHECK(std::isfinite(r.statistic));
  CHECK(r.metadata.contains("ratio"));
}

TEST_CASE("approximation error closed forms") {
  const PointCloud c = sample_cloud(spec(ManifoldKind::circle, 2, 12), 150);
  const LaplacianOperator op(build_graph(c.points, 0.3));
  const SpectralBasis b = decompose(op, 150);
  const Vector u2 = b.eigenvectors.col(1);
  for (double t : {0.01, 0.1, 0.5}) {
    const double want = (1 - std::exp(-t * b.eigenvalues(1))) * u2.cwiseAbs().maxCoeff();
    CHECK(approximation_error(op, b, u2, 1.5, 4, t) == doctest::Approx(want).epsilon(1e-9));
  }
  const Vector f = *sample_cloud(spec(ManifoldKind::circle, 2, 12), 150, TruthFamily::holder_kink(1.0)).true_values;
  CHECK(approximation_error(op, b, f, 1.0, 150, 0.0) < 1e-9);
}

TEST_CASE("approximation check records every J") {
  const PointCloud c = sample_cloud(spec(ManifoldKind::circle, 2, 13), 300, TruthFamily::holder_kink(1.0));
  const LaplacianOperator op(build_graph(c.points, 0.15));
  const SpectralBasis b = decompose(op, 300);
  const CheckResult r = check_approximation(op, b, *c.true_values, 1.0, 1, {4, 8, 16, 32});
  CHECK(r.metadata["per_j"].size() == 4);
  CHECK(r.pass);
  const auto& per_j = r.metadata["per_j"];
  CHECK(per_j[0]["error"].get<double>() >= per_j[2]["error"].get<double>());
}

TEST_CASE("heat bounds on a small circle") {
  const PointCloud c = sample_cloud(spec(ManifoldKind::circle, 2, 14), 800);
  const SpectralBasis b = decompose(LaplacianOperator(build_graph(c.points, 0.05)), 800);
  const CheckResult r = check_heat_bounds(b, 1);
  CHECK(r.statistic == doctest::Approx(-0.5).epsilon(0.7));
  CHECK(r.metadata["grid"].size() == 8);
}

TEST_CASE("norm comparison") {
  const PointCloud c = sample_cloud(spec(ManifoldKind::circle, 2, 15), 400);
  const SpectralBasis b = decompose(LaplacianOperator(build_graph(c.points, 0.2)), 400);
  const CheckResult r = check_norm_comparison(b, 1, {1, 4, 16, 400});
  const auto& per_j = r.metadata["per_j"];
  // u_1 is constant on a connected graph, where the ratio is one
  CHECK(per_j[0]["sup_ratio"].get<double>() == doctest::Approx(1.0).epsilon(1e-8));
  double prev = 0.0;
  for (const auto& row : per_j) {
    CHECK(row["trial_max_ratio"].get<double>() >= prev);
    CHECK(row["trial_max_ratio"].get<double>() <= row["sup_ratio"].get<double>() * (1 + 1e-12));
    prev = row["trial_max_ratio"].get<double>();
  }
  const double coarse = 400.0 * 400.0 / b.nu.minCoeff();
  CHECK(per_j[3]["sup_ratio"].get<double>() < coarse);
}

TEST_CASE("Weyl window") {
  const IndexWindow w = weyl_window(20000, 0.005, 1);
  CHECK(w.lo == 10);
  CHECK(w.hi == 63);
  CHECK(weyl_window(500, 0.9, 2).empty());
  const PointCloud c = sample_cloud(spec(ManifoldKind::sphere2, 3, 16), 300);
  const SpectralBasis b = decompose(LaplacianOperator(build_graph(c.points, 1.0)), 20);
  const CheckResult r = check_weyl(b, 2);
  CHECK_FALSE(r.applicable);
  CHECK_FALSE(r.pass);
}

TEST_CASE("volume regularity on a uniform sphere") {
  const PointCloud c = sample_cloud(spec(ManifoldKind::sphere2, 3, 17), 3000);
  const CheckResult r = check_volume_regularity(c.points, 2);
  CHECK(r.pass);
  CHECK(r.statistic >= 1.0);
}

TEST_CASE("report JSON round trip") {
  DiagnosticsReport rep;
  CheckResult a;
  a.name = "a";
  a.property = "something";
  a.statistic = 1.5;
  a.lower = 1;
  a.upper = 2;
  a.pass = true;
  a.metadata["x"] = 3;
  CheckResult b = a;
  b.name = "b";
  b.statistic = std::nan("");
  b.pass = false;
  b.applicable = false;
  rep.checks = {a, b};
  const nlohmann::json j = rep;
  const DiagnosticsReport back = nlohmann::json::parse(j.dump()).get<DiagnosticsReport>();
  REQUIRE(back.checks.size() == 2);
  CHECK(back.checks[0].statistic == 1.5);
  CHECK(std::isnan(back.checks[1].statistic));
  CHECK_FALSE(back.checks[1].applicable);
  CHECK_FALSE(back.all_pass());
  CHECK(back.find("b") != nullptr);
  CHECK(back.find("zzz") == nullptr);
  CHECK(back.table().find("N/A") != std::string::npos);
}
