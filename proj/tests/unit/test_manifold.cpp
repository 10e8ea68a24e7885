#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "lapreg/manifold.hpp"

using namespace lapreg;

namespace {

ManifoldSpec make(ManifoldKind kind, int ambient, std::uint64_t seed = 1) {
  ManifoldSpec s;
  s.kind = kind;
  s.ambient_dim = ambient;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("circle points have unit norm") {
  const PointCloud c = sample_cloud(make(ManifoldKind::circle, 2, 42), 4);
  REQUIRE(c.size() == 4);
  for (Index i = 0; i < 4; ++i) CHECK(std::abs(c.points.row(i).norm() - 1.0) <= 1e-12);
}

TEST_CASE("rotated embeddings keep norms and stay on the manifold") {
  for (auto [kind, d] : std::vector<std::pair<ManifoldKind, int>>{{ManifoldKind::circle, 5},
                                                                  {ManifoldKind::sphere2, 6},
                                                                  {ManifoldKind::flat_torus, 7},
                                                                  {ManifoldKind::swiss_roll, 4},
                                                                  {ManifoldKind::interval, 3}}) {
    const ManifoldSpec s = make(kind, d, 9);
    const PointCloud c = sample_cloud(s, 300);
    CHECK(c.ambient_dim() == d);
    CHECK(max_manifold_deviation(s, c.points) < 1e-10);
  }
  const PointCloud sphere = sample_cloud(make(ManifoldKind::sphere2, 5, 3), 50);
  for (Index i = 0; i < 50; ++i) CHECK(std::abs(sphere.points.row(i).norm() - 1.0) <= 1e-12);
}

TEST_CASE("interval samples are uniform by KS distance") {
  PointCloud c = sample_cloud(make(ManifoldKind::interval, 1, 5), 1000);
  std::vector<double> x(c.points.data(), c.points.data() + 1000);
  std::sort(x.begin(), x.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ks = std::max(ks, std::abs((i + 1) / 1000.0 - x[i]));
    ks = std::max(ks, std::abs(i / 1000.0 - x[i]));
  }
  CHECK(ks < 0.05);
}

TEST_CASE("uniform sphere has mean near zero") {
  const PointCloud c = sample_cloud(make(ManifoldKind::sphere2, 3, 6), 1000);
  CHECK(c.points.colwise().mean().norm() < 0.1);
}

TEST_CASE("tilted circle density shifts the mean toward the tilt") {
  ManifoldSpec s = make(ManifoldKind::circle, 2, 8);
  s.density = DensityKind::smooth_tilted;
  s.density_params = {0.5};
  const PointCloud c = sample_cloud(s, 20000);
  // E[cos θ] under (1 + a cos θ)/(2π) is a/2
  CHECK(c.points.col(0).mean() == doctest::Approx(0.25).epsilon(0.05));
}

TEST_CASE("sampling is deterministic in the seed") {
  const ManifoldSpec s = make(ManifoldKind::flat_torus, 5, 77);
  CHECK(sample_cloud(s, 100).points == sample_cloud(s, 100).points);
  CHECK(sample_cloud(s, 100).points != sample_cloud(make(ManifoldKind::flat_torus, 5, 78), 100).points);
}

TEST_CASE("truth families at known points") {
  const ManifoldSpec s = make(ManifoldKind::circle, 2);
  Matrix pts(3, 2);
  pts << 1, 0, 0, 1, -1, 0;
  const Vector t0 = eval_truth(s, pts, TruthFamily::trig(0));
  CHECK(t0.isApprox(Vector::Ones(3)));
  CHECK(eval_truth(s, pts, TruthFamily::trig(1))(0) == doctest::Approx(1.0));
  const Vector kink = eval_truth(s, pts, TruthFamily::holder_kink(0.5));
  CHECK(kink(1) == doctest::Approx(std::sqrt(std::numbers::pi / 2)));
  CHECK(kink(0) == doctest::Approx(0.0));
}

TEST_CASE("truth values are invariant to the ambient rotation") {
  const ManifoldSpec low = make(ManifoldKind::sphere2, 3, 4);
  const ManifoldSpec high = make(ManifoldKind::sphere2, 6, 4);
  const PointCloud a = sample_cloud(low, 50, TruthFamily::trig(2));
  const PointCloud b = sample_cloud(high, 50, TruthFamily::trig(2));
  CHECK((*a.true_values - *b.true_values).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("geodesic distances") {
  const ManifoldSpec circle = make(ManifoldKind::circle, 2);
  Vector a(2), b(2);
  a << 1, 0;
  b << -1, 0;
  CHECK(geodesic_dist(circle, a, b) == doctest::Approx(std::numbers::pi));
  CHECK(geodesic_dist(circle, a, a) == doctest::Approx(0.0));
  const ManifoldSpec sphere = make(ManifoldKind::sphere2, 3);
  Vector x(3), y(3);
  x << 1, 0, 0;
  y << 0, 1, 0;
  CHECK(geodesic_dist(sphere, x, y) == doctest::Approx(std::numbers::pi / 2));
}

TEST_CASE("chord and arc comparison on circle and sphere clouds") {
  for (auto spec : {make(ManifoldKind::circle, 4, 2), make(ManifoldKind::sphere2, 5, 3)}) {
    const PointCloud c = sample_cloud(spec, 60);
    for (Index i = 0; i < 60; ++i) {
      for (Index j = 0; j < 60; ++j) {
        const double rho = geodesic_dist(spec, c.points.row(i).transpose(), c.points.row(j).transpose());
        const double chord = (c.points.row(i) - c.points.row(j)).norm();
        CHECK(chord <= rho + 1e-12);
        CHECK(2.0 / std::numbers::pi * rho <= chord + 1e-12);
      }
    }
  }
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(make(ManifoldKind::sphere2, 2).validate(), Error);
  ManifoldSpec bad = make(ManifoldKind::circle, 2);
  bad.density = DensityKind::smooth_tilted;
  bad.density_params = {1.5};
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK_THROWS_AS(TruthFamily::holder_kink(0.0).validate(), Error);
}

TEST_CASE("manifold JSON round trip") {
  ManifoldSpec s = make(ManifoldKind::swiss_roll, 5, 11);
  s.density = DensityKind::smooth_tilted;
  s.density_params = {0.2};
  const nlohmann::json j = s;
  const ManifoldSpec back = j.get<ManifoldSpec>();
  CHECK(back.kind == s.kind);
  CHECK(back.ambient_dim == 5);
  CHECK(back.density == s.density);
  CHECK(back.density_params == s.density_params);
  CHECK(back.seed == 11);
  const nlohmann::json t = TruthFamily::holder_kink(0.7);
  CHECK(t.get<TruthFamily>().beta == doctest::Approx(0.7));
}
