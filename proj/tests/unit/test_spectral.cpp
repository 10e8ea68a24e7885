#include <cmath>
#include <filesystem>
#include <fstream>

#include <boost/math/special_functions/gamma.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "doctest.h"
#include "lapreg/graph.hpp"
#include "lapreg/manifold.hpp"
#include "lapreg/spectral.hpp"

using namespace lapreg;

namespace {

LaplacianOperator circle_op(Index n, double h, std::uint64_t seed = 1, int ambient = 2) {
  ManifoldSpec s;
  s.kind = ManifoldKind::circle;
  s.ambient_dim = ambient;
  s.seed = seed;
  return LaplacianOperator(build_graph(sample_cloud(s, n).points, h));
}

Vector random_vector(Index n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> z;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = z(rng);
  return v;
}

double max_abs(const Vector& v) { return v.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("complete graph on three vertices") {
  Matrix pts(3, 1);
  pts << 0.0, 0.2, 0.4;
  const LaplacianOperator op(build_graph(pts, 1.0));
  const SpectralBasis b = decompose(op, 3);
  CHECK(b.eigenvalues(0) == doctest::Approx(0.0));
  CHECK(b.eigenvalues(1) == doctest::Approx(1.0));
  CHECK(b.eigenvalues(2) == doctest::Approx(1.0));
  const Vector u1 = b.eigenvectors.col(0);
  CHECK(u1.maxCoeff() - u1.minCoeff() < 1e-12);
  CHECK(inner_nu(b.nu, u1, u1) == doctest::Approx(1.0));
}

TEST_CASE("single vertex") {
  Matrix pts(1, 2);
  pts << 1.0, 0.0;
  const SpectralBasis b = decompose(LaplacianOperator(build_graph(pts, 0.5)), 1);
  CHECK(b.eigenvalues(0) == doctest::Approx(0.0));
  CHECK(b.eigenvectors(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("circle spectrum pairs like the continuum") {
  const LaplacianOperator op = circle_op(500, 0.15, 4);
  REQUIRE(op.graph().connected());
  const SpectralBasis b = decompose(op, 20);
  std::vector<double> x, y;
  for (Index j = 2; j <= 20; ++j) {
    x.push_back(std::pow(std::floor(j / 2.0), 2));
    y.push_back(b.eigenvalues(j - 1));
  }
  CHECK(fit_line(x, y).r2 > 0.95);
}

TEST_CASE("dense and Krylov agree") {
  const LaplacianOperator op = circle_op(900, 0.08, 7, 3);
  DecomposeOptions dense, krylov;
  dense.method = EigenMethod::dense;
  krylov.method = EigenMethod::krylov;
  const SpectralBasis a = decompose(op, 25, dense);
  const SpectralBasis b = decompose(op, 25, krylov);
  CHECK(max_abs(a.eigenvalues - b.eigenvalues) < 1e-8 * a.eigenvalues.maxCoeff());
  // eigenvalues come in near pairs, so compare projectors onto the leading subspace
  const Matrix pa = a.eigenvectors.leftCols(21) * a.eigenvectors.leftCols(21).transpose();
  const Matrix pb = b.eigenvectors.leftCols(21) * b.eigenvectors.leftCols(21).transpose();
  CHECK((pa - pb).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(b.residuals.maxCoeff() < 1e-6);
}

TEST_CASE("eigenvalues are nonnegative and ascending") {
  const SpectralBasis b = decompose(circle_op(200, 0.2, 9), 200);
  CHECK(b.eigenvalues.minCoeff() >= 0.0);
  for (Index j = 1; j < b.j_max(); ++j) CHECK(b.eigenvalues(j) >= b.eigenvalues(j - 1));
}

TEST_CASE("heat semigroup against the matrix exponential") {
  const LaplacianOperator op = circle_op(120, 0.3, 3);
  const SpectralBasis b = decompose(op, 120);
  const Vector f = random_vector(120, 5);
  const Matrix l = Matrix(op.matrix());
  for (double t : {0.0, 0.01, 0.2, 1.5}) {
    const Matrix e = (-t * l).exp();
    CHECK(max_abs(heat_apply(b, t, f) - e * f) < 1e-9);
    const Matrix p = HeatKernel(b, t).transition();
    CHECK((p - e).cwiseAbs().maxCoeff() < 1e-9);
  }
  CHECK(max_abs(heat_apply(b, 0.0, f) - f) < 1e-8);
  CHECK(max_abs(heat_apply(b, 0.3, Vector::Constant(120, 2.0)) - Vector::Constant(120, 2.0)) < 1e-10);
  CHECK(max_abs(heat_apply(b, 0.1, heat_apply(b, 0.25, f)) - heat_apply(b, 0.35, f)) < 1e-7);
  const double t_big = 50.0 / b.eigenvalues(1);
  const Vector mean = b.eigenvectors.col(0) * inner_nu(b.nu, b.eigenvectors.col(0), f);
  CHECK(max_abs(heat_apply(b, t_big, f) - mean) < 1e-6);
}

TEST_CASE("heat kernel on the complete graph") {
  Matrix pts(12, 1);
  for (Index i = 0; i < 12; ++i) pts(i, 0) = 0.01 * i;
  const LaplacianOperator op(build_graph(pts, 1.0));
  const SpectralBasis b = decompose(op, 12);
  const Matrix l = Matrix(op.matrix());
  for (double t : {0.1, 1.0, 3.0}) {
    const Matrix e = (-t * l).exp();
    const HeatKernel k(b, t);
    for (Index x = 0; x < 12; ++x) {
      // p_t(x, y) = [e^{−tℒ}]_{xy} / ν_y
      CHECK(k(x, x) == doctest::Approx(e(x, x) / b.nu(x)).epsilon(1e-10));
      CHECK(k(x, x) == doctest::Approx(12.0 * (1.0 / 12 + (1.0 - 1.0 / 12) * std::exp(-t))).epsilon(1e-10));
    }
  }
  Matrix one(1, 1);
  one << 0.0;
  const SpectralBasis single = decompose(LaplacianOperator(build_graph(one, 1.0)), 1);
  CHECK(HeatKernel(single, 7.0)(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("taylor lift") {
  const LaplacianOperator op = circle_op(80, 0.4, 2);
  const Vector f = random_vector(80, 1);
  CHECK(taylor_order(1.0) == 0);
  CHECK(taylor_order(2.0) == 0);
  CHECK(taylor_order(3.0) == 1);
  CHECK(taylor_order(5.0) == 2);
  CHECK(max_abs(taylor_lift(op, 0.3, f, 2.0) - f) == 0.0);
  CHECK(max_abs(taylor_lift(op, 0.3, f, 3.0) - (f + 0.3 * op.apply(f))) < 1e-12);
  const Vector c = Vector::Constant(80, 1.5);
  CHECK(max_abs(taylor_lift(op, 0.3, c, 5.0) - c) < 1e-12);
}

TEST_CASE("projection") {
  const SpectralBasis b = decompose(circle_op(60, 0.5, 8), 60);
  const Vector g = random_vector(60, 2);
  CHECK(max_abs(project(b, 60, g) - g) < 1e-9);
  CHECK(max_abs(project(b, 3, b.eigenvectors.col(4))) < 1e-8);
  const Vector mix = 2 * b.eigenvectors.col(0) + 3 * b.eigenvectors.col(1);
  CHECK(max_abs(project(b, 1, mix) - 2 * b.eigenvectors.col(0)) < 1e-9);
}

TEST_CASE("Q kernel") {
  const SpectralBasis b = decompose(circle_op(70, 0.4, 4), 70);
  const Vector f = random_vector(70, 3);
  CHECK(max_abs(q_kernel_apply(b, 0.2, 0, f) - heat_apply(b, 0.2, f)) < 1e-12);
  CHECK(max_abs(q_kernel_apply(b, 0.0, 2, f) - f) < 1e-8);
  for (int k : {1, 2, 4}) {
    for (Index j : {1, 5, 20}) {
      const double s = 0.3 * b.eigenvalues(j);
      const Vector out = q_kernel_apply(b, 0.3, k, b.eigenvectors.col(j));
      CHECK(max_abs(out - boost::math::gamma_q(k + 1.0, s) * b.eigenvectors.col(j)) < 1e-9);
    }
  }
}

TEST_CASE("chi kernel regression") {
  const SpectralBasis b = decompose(circle_op(50, 0.5, 6), 50);
  const ChiFunction chi = [](int order, double s) { return (order % 2 ? -1.0 : 1.0) * std::exp(-s); };
  const Vector f = random_vector(50, 4);
  std::vector<Index> all(50);
  for (Index i = 0; i < 50; ++i) all[static_cast<std::size_t>(i)] = i;
  CHECK(max_abs(chi_kernel_regress(b, 0.4, 0, chi, f, all) - heat_apply(b, 0.4, f)) < 1e-10);
  CHECK(max_abs(chi_kernel_regress(b, 0.4, 2, chi, Vector::Zero(50), all)) == 0.0);

  // brute-force kernel matrix on a labeled subset
  const std::vector<Index> lab = {3, 7, 8, 20, 41};
  const Vector y = random_vector(5, 9);
  for (double t : {0.0, 0.25}) {
    Vector m(50);
    for (Index j = 0; j < 50; ++j) m(j) = chi_multiplier(chi, t * b.eigenvalues(j), 2);
    const Matrix k = b.eigenvectors * m.asDiagonal() * b.eigenvectors.transpose();
    Vector want = Vector::Zero(50);
    for (std::size_t i = 0; i < lab.size(); ++i) want += k.col(lab[i]) * y(static_cast<Index>(i)) * b.nu(lab[i]);
    CHECK(max_abs(chi_kernel_regress(b, t, 2, chi, y, lab) - want) < 1e-10);
  }
  const ChiFunction bad = [](int, double) { return 2.0; };
  CHECK_THROWS_AS(chi_kernel_regress(b, 0.1, 0, bad, y, lab), Error);
}

TEST_CASE("spectrum files") {
  const SpectralBasis b = decompose(circle_op(40, 0.5, 2), 5);
  const auto dir = std::filesystem::temp_directory_path() / "lapreg_spectrum_test";
  std::filesystem::create_directories(dir);
  write_spectrum(b, dir / "s.csv", dir / "v.csv", dir / "s.json");
  std::ifstream in(dir / "s.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "j,lambda_j");
  std::filesystem::remove_all(dir);
}

TEST_CASE("bad requests") {
  const LaplacianOperator op = circle_op(30, 0.5, 1);
  CHECK_THROWS_AS(decompose(op, 0), Error);
  CHECK_THROWS_AS(decompose(op, 31), Error);
  const SpectralBasis b = decompose(op, 30);
  CHECK_THROWS_AS(heat_apply(b, -1.0, Vector::Zero(30)), Error);
}
