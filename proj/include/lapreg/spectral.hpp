#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "lapreg/common.hpp"
#include "lapreg/graph.hpp"

namespace lapreg {

/// Smallest eigenpairs (λ_j, u_j) of ℒ, orthonormal in L²(ν).
///
/// Eigenvectors are stored column-wise; `residuals` holds ‖ℒu_j − λ_j u_j‖_{L²(ν)}.
/// When j_max() < n() every operator built from the basis is the rank-j_max
/// truncation of the exact one.
struct SpectralBasis {
  Vector eigenvalues;
  Matrix eigenvectors;  // N × J_max
  Vector nu;
  Vector residuals;
  double h = 0.0;

  Index j_max() const { return eigenvalues.size(); }
  Index n() const { return eigenvectors.rows(); }

  /// ⟨u_j | f⟩_ν for j = 1..j_max.
  Vector coefficients(const Vector& f) const;
  /// Σ_j w_j u_j over the leading w.size() eigenvectors.
  Vector synthesize(const Vector& weights) const;
};

enum class EigenMethod { automatic, dense, krylov };

struct DecomposeOptions {
  EigenMethod method = EigenMethod::automatic;
  /// automatic: dense when N <= dense_threshold or when J_max is a large share of N.
  Index dense_threshold = 400;
  double max_dense_fraction = 0.25;
  /// Convergence target for the symmetric residual ‖Sφ − θφ‖₂ of the unscaled problem.
  double tolerance = 1e-12;
  std::uint64_t seed = 0x1a2b3c;
};

/// Eigendecomposition of ℒ via the similarity S = Diag(ν)^{1/2} (h²ℒ) Diag(ν)^{-1/2}
/// = I − D^{-1/2}AD^{-1/2}: S is symmetric, its orthonormal eigenvectors φ_j map to
/// ν-orthonormal eigenvectors u_j = Diag(ν)^{-1/2} φ_j of ℒ with λ_j = h⁻² θ_j.
SpectralBasis decompose(const LaplacianOperator& op, Index j_max, const DecomposeOptions& options = {});

/// e^{−tℒ} f = Σ_j e^{−tλ_j} ⟨u_j|f⟩_ν u_j
Vector heat_apply(const SpectralBasis& basis, double t, const Vector& f);

/// k = ⌈β/2⌉ − 1
int taylor_order(double beta);

/// f_t = Σ_{l=0}^{k} (tℒ)^l f / l! with k = taylor_order(β), by repeated sparse application.
Vector taylor_lift(const LaplacianOperator& op, double t, const Vector& f, double beta);

/// L²(ν) projection onto span{u_1..u_J}.
Vector project(const SpectralBasis& basis, Index j, const Vector& g);

/// Spectral multiplier of Q_t^{(k)}: Σ_{l<=k} s^l e^{−s} / l! at s = tλ.
double q_multiplier(double s, int k);

/// Q_t^{(k)} f = Σ_j [Σ_{l<=k} (tλ_j)^l e^{−tλ_j} / l!] ⟨u_j|f⟩_ν u_j
Vector q_kernel_apply(const SpectralBasis& basis, double t, int k, const Vector& f);

/// χ^{(order)}(s): a scalar function and its derivatives.
using ChiFunction = std::function<double(int order, double s)>;

/// Spectral multiplier of χ_t^{(k)}: Σ_{l<=k} (−s)^l χ^{(l)}(s) / l!.
double chi_multiplier(const ChiFunction& chi, double s, int k);

/// f̂(x) = Σ_i χ_t^{(k)}(x, x_i) y_i ν_{x_i} over the labeled points; length N.
Vector chi_kernel_regress(const SpectralBasis& basis, double t, int k, const ChiFunction& chi,
                          const Vector& labeled_y, const std::vector<Index>& labeled_idx);

/// Heat kernel of ℒ with respect to ν: p_t(x, y) = Σ_j e^{−tλ_j} u_j(x) u_j(y).
class HeatKernel {
 public:
  HeatKernel(const SpectralBasis& basis, double t);

  double operator()(Index x, Index y) const;
  Vector diagonal() const;
  Matrix dense() const;
  /// e^{−tℒ} as a matrix: p_t(x, y) ν_y.
  Matrix transition() const;
  Vector apply(const Vector& f) const { return heat_apply(*basis_, t_, f); }
  double time() const { return t_; }

 private:
  const SpectralBasis* basis_;
  double t_;
  Vector weights_;
};

/// CSV `j,lambda_j` plus eigenvectors as CSV with a JSON descriptor.
void write_spectrum(const SpectralBasis& basis, const std::filesystem::path& spectrum_csv,
                    const std::filesystem::path& vectors_csv, const std::filesystem::path& descriptor_json);

namespace detail {

struct SymmetricEigenResult {
  Vector values;   // ascending
  Matrix vectors;  // orthonormal columns
};

SymmetricEigenResult smallest_eigenpairs_dense(const SparseMatrix& s, Index count);
/// Shift-invert block Krylov with Rayleigh–Ritz; throws Error when residuals stay above tolerance.
SymmetricEigenResult smallest_eigenpairs_krylov(const SparseMatrix& s, Index count, double tolerance,
                                                std::uint64_t seed);

}  // namespace detail

}  // namespace lapreg
