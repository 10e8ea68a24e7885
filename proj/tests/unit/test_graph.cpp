#include <cmath>

#include "doctest.h"
#include "lapreg/graph.hpp"
#include "lapreg/manifold.hpp"

using namespace lapreg;

namespace {

Matrix line(std::initializer_list<double> xs) {
  Matrix m(static_cast<Index>(xs.size()), 1);
  Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

PointCloud cloud(ManifoldKind kind, int d, Index n, std::uint64_t seed) {
  ManifoldSpec s;
  s.kind = kind;
  s.ambient_dim = d;
  s.seed = seed;
  return sample_cloud(s, n);
}

}  // namespace

TEST_CASE("three points on a line") {
  const RadiusGraph g = build_graph(line({0.0, 0.5, 2.0}), 1.0);
  CHECK(g.degrees(0) == 2);
  CHECK(g.degrees(1) == 2);
  CHECK(g.degrees(2) == 1);
  CHECK(g.nu(0) == doctest::Approx(0.4));
  CHECK(g.nu(2) == doctest::Approx(0.2));
  CHECK(g.n_components == 2);
}

TEST_CASE("edge rule is strict") {
  const RadiusGraph g = build_graph(line({0.0, 1.0}), 1.0);
  CHECK(g.degrees(0) == 1);
  CHECK(g.n_components == 2);
}

TEST_CASE("single vertex") {
  const RadiusGraph g = build_graph(line({0.3}), 0.1);
  CHECK(g.degrees(0) == 1);
  CHECK(g.nu(0) == doctest::Approx(1.0));
}

TEST_CASE("adjacency matches brute force") {
  for (auto [kind, d, h] : std::vector<std::tuple<ManifoldKind, int, double>>{{ManifoldKind::circle, 2, 0.2},
                                                                              {ManifoldKind::sphere2, 5, 0.5},
                                                                              {ManifoldKind::flat_torus, 4, 0.9},
                                                                              {ManifoldKind::interval, 1, 0.03}}) {
    const PointCloud c = cloud(kind, d, 250, 3);
    const RadiusGraph g = build_graph(c.points, h);
    const Matrix a = Matrix(g.adjacency);
    Vector counts = Vector::Zero(c.size());
    for (Index i = 0; i < c.size(); ++i) {
      for (Index j = 0; j < c.size(); ++j) {
        const double want = (c.points.row(i) - c.points.row(j)).norm() < h ? 1.0 : 0.0;
        CHECK(a(i, j) == want);
        counts(i) += want;
      }
    }
    CHECK(g.degrees == counts);
    CHECK(ball_counts(c.points, h) == counts);
    CHECK(g.nu.sum() == doctest::Approx(1.0));
  }
}

TEST_CASE("h above the diameter gives the complete graph") {
  const PointCloud c = cloud(ManifoldKind::circle, 3, 20, 1);
  const RadiusGraph g = build_graph(c.points, 2.5);
  CHECK((g.degrees.array() == 20.0).all());
  CHECK(g.connected());
}

TEST_CASE("Laplacian on small graphs") {
  Matrix tri(3, 1);
  tri << 0.0, 0.1, 0.2;
  const LaplacianOperator op(build_graph(tri, 1.0));
  Vector f(3);
  f << 1, 0, 0;
  const Vector lf = op.apply(f);
  CHECK(lf(0) == doctest::Approx(2.0 / 3));
  CHECK(lf(1) == doctest::Approx(-1.0 / 3));
  CHECK(lf(2) == doctest::Approx(-1.0 / 3));
  CHECK(op.apply(Vector::Constant(3, 4.0)).cwiseAbs().maxCoeff() < 1e-14);

  const LaplacianOperator iso(build_graph(line({0.0, 0.5, 2.0}), 1.0));
  Vector g(3);
  g << 1, -2, 5;
  CHECK(iso.apply(g)(2) == 0.0);
}

TEST_CASE("inner product and Dirichlet form") {
  const RadiusGraph g = build_graph(line({0.0, 0.5, 2.0}), 1.0);
  Vector f(3), h(3);
  f << 1, 0, 0;
  h << 1, 1, 0;
  CHECK(inner_nu(g, f, h) == doctest::Approx(0.4));
  CHECK(inner_nu(g, Vector::Ones(3), Vector::Ones(3)) == doctest::Approx(1.0));
  CHECK(inner_nu(g, f, Vector::Zero(3)) == 0.0);
  CHECK(dirichlet_form(g, Vector::Constant(3, 2.0), f) == doctest::Approx(0.0));
}

TEST_CASE("Laplacian is self-adjoint in nu and matches the Dirichlet form") {
  const PointCloud c = cloud(ManifoldKind::sphere2, 3, 200, 5);
  const double h = 0.4;
  const LaplacianOperator op(build_graph(c.points, h));
  const RadiusGraph& g = op.graph();
  const Matrix l = Matrix(op.matrix());
  for (Index x = 0; x < 200; ++x)
    for (Index y = 0; y < 200; ++y) CHECK(std::abs(g.nu(x) * l(x, y) - g.nu(y) * l(y, x)) < 1e-12);
  Rng rng(3);
  std::normal_distribution<double> z;
  Vector f(200), k(200);
  for (Index i = 0; i < 200; ++i) {
    f(i) = z(rng);
    k(i) = z(rng);
  }
  CHECK(inner_nu(g, f, op.apply(k)) == doctest::Approx(inner_nu(g, op.apply(f), k)).epsilon(1e-10));
  CHECK(h * h * inner_nu(g, f, op.apply(k)) == doctest::Approx(dirichlet_form(g, f, k)).epsilon(1e-10));
  CHECK(dirichlet_form(g, f, f) >= 0.0);
  CHECK((op.apply(f) - l * f).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("symmetric normalization is similar to h^2 L") {
  const PointCloud c = cloud(ManifoldKind::circle, 2, 80, 2);
  const LaplacianOperator op(build_graph(c.points, 0.3));
  const Matrix s = Matrix(op.symmetric_normalized());
  CHECK((s - s.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  const Vector r = op.graph().nu.cwiseSqrt();
  const Matrix back = r.cwiseInverse().asDiagonal() * s * r.asDiagonal();
  CHECK((back - 0.09 * Matrix(op.matrix())).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("bad radius is rejected") {
  CHECK_THROWS_AS(build_graph(line({0.0, 1.0}), 0.0), Error);
  CHECK_THROWS_AS(build_graph(line({0.0, 1.0}), -1.0), Error);
}
