#include "lapreg/spectral.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "json.hpp"

namespace lapreg {

Vector SpectralBasis::coefficients(const Vector& f) const {
  require(f.size() == n(), "coefficients: length mismatch");
  return eigenvectors.transpose() * nu.cwiseProduct(f);
}

Vector SpectralBasis::synthesize(const Vector& weights) const {
  require(weights.size() <= j_max(), "synthesize: more weights than eigenvectors");
  return eigenvectors.leftCols(weights.size()) * weights;
}

SpectralBasis decompose(const LaplacianOperator& op, Index j_max, const DecomposeOptions& options) {
  const Index n = op.size();
  require(j_max >= 1 && j_max <= n, "decompose: J_max must lie in [1, N]");
  const SparseMatrix s = op.symmetric_normalized();

  bool dense = options.method == EigenMethod::dense || j_max == n;
  if (options.method == EigenMethod::automatic) {
    dense = dense || n <= options.dense_threshold ||
            static_cast<double>(j_max) > options.max_dense_fraction * static_cast<double>(n);
  }

  detail::SymmetricEigenResult sym;
  if (dense) {
    sym = detail::smallest_eigenpairs_dense(s, j_max);
  } else {
    try {
      sym = detail::smallest_eigenpairs_krylov(s, j_max, options.tolerance, options.seed);
    } catch (const Error&) {
      if (options.method == EigenMethod::krylov || n > 8000) throw;
      sym = detail::smallest_eigenpairs_dense(s, j_max);
    }
  }

  const RadiusGraph& g = op.graph();
  SpectralBasis basis;
  basis.h = g.h;
  basis.nu = g.nu;
  basis.eigenvalues = (sym.values.array().max(0.0) * op.scale()).matrix();
  // u_j = Diag(ν)^{-1/2} φ_j
  basis.eigenvectors = g.nu.cwiseSqrt().cwiseInverse().asDiagonal() * sym.vectors;
  for (Index j = 0; j < j_max; ++j) {
    Index arg = 0;
    basis.eigenvectors.col(j).cwiseAbs().maxCoeff(&arg);
    if (basis.eigenvectors(arg, j) < 0.0) basis.eigenvectors.col(j) *= -1.0;
  }

  const Matrix applied = op.matrix() * basis.eigenvectors;
  basis.residuals.resize(j_max);
  for (Index j = 0; j < j_max; ++j) {
    const Vector r = applied.col(j) - basis.eigenvalues(j) * basis.eigenvectors.col(j);
    basis.residuals(j) = std::sqrt(inner_nu(g.nu, r, r));
  }
  return basis;
}

Vector heat_apply(const SpectralBasis& basis, double t, const Vector& f) {
  require(t >= 0.0, "heat_apply: t must be nonnegative");
  const Vector c = basis.coefficients(f);
  return basis.eigenvectors * (-t * basis.eigenvalues.array()).exp().matrix().cwiseProduct(c);
}

int taylor_order(double beta) {
  require(beta > 0.0 && std::isfinite(beta), "taylor_order: beta must be positive and finite");
  return static_cast<int>(std::ceil(beta / 2.0)) - 1;
}

Vector taylor_lift(const LaplacianOperator& op, double t, const Vector& f, double beta) {
  require(t >= 0.0, "taylor_lift: t must be nonnegative");
  const int k = taylor_order(beta);
  Vector term = f;
  Vector acc = f;
  for (int l = 1; l <= k; ++l) {
    term = (t / l) * op.apply(term);
    acc += term;
  }
  return acc;
}

Vector project(const SpectralBasis& basis, Index j, const Vector& g) {
  require(j >= 1 && j <= basis.j_max(), "project: J out of range");
  const auto u = basis.eigenvectors.leftCols(j);
  return u * (u.transpose() * basis.nu.cwiseProduct(g));
}

double q_multiplier(double s, int k) {
  double term = std::exp(-s);
  double acc = term;
  for (int l = 1; l <= k; ++l) {
    term *= s / l;
    acc += term;
  }
  return acc;
}

Vector q_kernel_apply(const SpectralBasis& basis, double t, int k, const Vector& f) {
  require(t >= 0.0 && k >= 0, "q_kernel_apply: need t >= 0 and k >= 0");
  Vector c = basis.coefficients(f);
  for (Index j = 0; j < c.size(); ++j) c(j) *= q_multiplier(t * basis.eigenvalues(j), k);
  return basis.eigenvectors * c;
}

double chi_multiplier(const ChiFunction& chi, double s, int k) {
  double acc = 0.0;
  double power = 1.0;  // (−s)^l / l!
  for (int l = 0; l <= k; ++l) {
    if (l > 0) power *= -s / l;
    acc += power * chi(l, s);
  }
  return acc;
}

Vector chi_kernel_regress(const SpectralBasis& basis, double t, int k, const ChiFunction& chi,
                          const Vector& labeled_y, const std::vector<Index>& labeled_idx) {
  require(t >= 0.0 && k >= 0, "chi_kernel_regress: need t >= 0 and k >= 0");
  require(std::abs(chi(0, 0.0) - 1.0) <= 1e-12, "chi_kernel_regress: chi(0) must equal 1");
  require(labeled_y.size() == static_cast<Index>(labeled_idx.size()), "chi_kernel_regress: label count mismatch");
  Vector weighted = Vector::Zero(basis.n());
  for (std::size_t i = 0; i < labeled_idx.size(); ++i) {
    const Index x = labeled_idx[i];
    require(x >= 0 && x < basis.n(), "chi_kernel_regress: labeled index out of range");
    weighted(x) += labeled_y(static_cast<Index>(i)) * basis.nu(x);
  }
  Vector c = basis.eigenvectors.transpose() * weighted;
  for (Index j = 0; j < c.size(); ++j) c(j) *= chi_multiplier(chi, t * basis.eigenvalues(j), k);
  return basis.eigenvectors * c;
}

HeatKernel::HeatKernel(const SpectralBasis& basis, double t) : basis_(&basis), t_(t) {
  require(t >= 0.0, "HeatKernel: t must be nonnegative");
  weights_ = (-t * basis.eigenvalues.array()).exp().matrix();
}

double HeatKernel::operator()(Index x, Index y) const {
  const auto& u = basis_->eigenvectors;
  return (u.row(x).transpose().cwiseProduct(u.row(y).transpose())).dot(weights_);
}

Vector HeatKernel::diagonal() const { return basis_->eigenvectors.array().square().matrix() * weights_; }

Matrix HeatKernel::dense() const {
  const auto& u = basis_->eigenvectors;
  return u * weights_.asDiagonal() * u.transpose();
}

Matrix HeatKernel::transition() const { return dense() * basis_->nu.asDiagonal(); }

void write_spectrum(const SpectralBasis& basis, const std::filesystem::path& spectrum_csv,
                    const std::filesystem::path& vectors_csv, const std::filesystem::path& descriptor_json) {
  {
    std::ofstream out(spectrum_csv);
    require(out.good(), "cannot open " + spectrum_csv.string());
    out << "j,lambda_j\n" << std::setprecision(17);
    for (Index j = 0; j < basis.j_max(); ++j) out << j + 1 << ',' << basis.eigenvalues(j) << '\n';
  }
  {
    std::ofstream out(vectors_csv);
    require(out.good(), "cannot open " + vectors_csv.string());
    out << std::setprecision(17);
    for (Index i = 0; i < basis.n(); ++i) {
      for (Index j = 0; j < basis.j_max(); ++j) out << (j ? "," : "") << basis.eigenvectors(i, j);
      out << '\n';
    }
  }
  nlohmann::json d;
  d["format"] = "csv";
  d["layout"] = "row i = vertex, column j = eigenvector u_{j+1}, no header";
  d["rows"] = basis.n();
  d["cols"] = basis.j_max();
  d["h"] = basis.h;
  d["spectrum"] = spectrum_csv.filename().string();
  d["vectors"] = vectors_csv.filename().string();
  d["normalization"] = "orthonormal in L2(nu)";
  d["max_residual"] = basis.residuals.size() ? basis.residuals.maxCoeff() : 0.0;
  std::ofstream js(descriptor_json);
  require(js.good(), "cannot open " + descriptor_json.string());
  js << d.dump(2) << '\n';
}

}  // namespace lapreg
