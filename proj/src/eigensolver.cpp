// Symmetric eigensolvers for the smallest eigenpairs of S = I − D^{-1/2} A D^{-1/2}.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "lapreg/spectral.hpp"

namespace lapreg::detail {

namespace {

// Spectrum of S lies in [0, 2]; the shift only has to make S + σI definite.
constexpr double kShift = 1e-4;

using ColSparse = Eigen::SparseMatrix<double, Eigen::ColMajor>;

// Orthonormalizes column c of `block` against basis(:, :m) and the earlier block
// columns (two Gram–Schmidt passes). Returns false when the column collapsed.
bool orthonormalize_column(const Matrix& basis, Index m, Matrix& block, Index c) {
  const double original = block.col(c).norm();
  if (original == 0.0) return false;
  for (int pass = 0; pass < 2; ++pass) {
    if (m > 0) block.col(c) -= basis.leftCols(m) * (basis.leftCols(m).transpose() * block.col(c));
    for (Index k = 0; k < c; ++k) block.col(c) -= block.col(k).dot(block.col(c)) * block.col(k);
  }
  const double norm = block.col(c).norm();
  if (norm <= 1e-10 * original) return false;
  block.col(c) /= norm;
  return true;
}

void fill_block(const Matrix& basis, Index m, Matrix& block, Rng& rng) {
  std::normal_distribution<double> normal;
  for (Index c = 0; c < block.cols(); ++c) {
    int attempts = 0;
    while (!orthonormalize_column(basis, m, block, c)) {
      require(++attempts < 8, "krylov: could not extend basis");
      for (Index i = 0; i < block.rows(); ++i) block(i, c) = normal(rng);
    }
  }
}

}  // namespace

SymmetricEigenResult smallest_eigenpairs_dense(const SparseMatrix& s, Index count) {
  require(count >= 1 && count <= s.rows(), "dense eigensolver: count out of range");
  const Matrix dense = Matrix(s);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(dense);
  require(solver.info() == Eigen::Success, "dense eigensolver failed to converge");
  return {solver.eigenvalues().head(count), solver.eigenvectors().leftCols(count)};
}

SymmetricEigenResult smallest_eigenpairs_krylov(const SparseMatrix& s, Index count, double tolerance,
                                                std::uint64_t seed) {
  const Index n = s.rows();
  require(count >= 1 && count <= n, "krylov eigensolver: count out of range");

  ColSparse shifted = ColSparse(s);
  for (Index i = 0; i < n; ++i) shifted.coeffRef(i, i) += kShift;
  Eigen::SimplicialLDLT<ColSparse> factor(shifted);
  require(factor.info() == Eigen::Success, "krylov eigensolver: factorization of S + shift failed");

  const Index block_size = std::clamp<Index>(count / 4, 4, 16);
  const Index max_basis = std::min<Index>(n, 6 * count + 100);

  Matrix basis(n, max_basis);
  Matrix images(n, max_basis);  // (S + σI)^{-1} basis
  Rng rng(seed);
  std::normal_distribution<double> normal;

  Matrix block(n, std::min(block_size, n));
  for (Index i = 0; i < block.size(); ++i) block.data()[i] = normal(rng);
  fill_block(basis, 0, block, rng);

  Index m = 0;
  Index next_check = count + block_size;
  double worst = std::numeric_limits<double>::infinity();
  for (;;) {
    const Index b = block.cols();
    basis.middleCols(m, b) = block;
    images.middleCols(m, b) = factor.solve(block);
    m += b;

    if (m >= std::min(next_check, max_basis)) {
      Matrix t = basis.leftCols(m).transpose() * images.leftCols(m);
      t = 0.5 * (t + t.transpose()).eval();
      Eigen::SelfAdjointEigenSolver<Matrix> small(t);
      // largest eigenvalues of the inverse ↔ smallest of S
      Matrix ritz = basis.leftCols(m) * small.eigenvectors().rightCols(count).rowwise().reverse();
      Matrix s_ritz = s * ritz;
      Matrix g = ritz.transpose() * s_ritz;
      g = 0.5 * (g + g.transpose()).eval();
      Eigen::SelfAdjointEigenSolver<Matrix> refine(g);
      ritz = ritz * refine.eigenvectors();
      s_ritz = s_ritz * refine.eigenvectors();
      const Vector values = refine.eigenvalues();
      worst = 0.0;
      for (Index j = 0; j < count; ++j) worst = std::max(worst, (s_ritz.col(j) - values(j) * ritz.col(j)).norm());
      if (worst <= tolerance) return {values, ritz};
      next_check = m + std::max(block_size, m / 4);
    }

    if (m >= max_basis) break;
    const Index next_b = std::min(b, max_basis - m);
    block = images.middleCols(m - b, next_b);
    fill_block(basis, m, block, rng);
  }

  std::ostringstream os;
  os << "krylov eigensolver did not converge: max residual " << worst << " > " << tolerance << " with basis "
     << m;
  throw Error(os.str());
}

}  // namespace lapreg::detail
