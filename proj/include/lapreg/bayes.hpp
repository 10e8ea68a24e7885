#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "lapreg/common.hpp"
#include "lapreg/estimators.hpp"
#include "lapreg/spectral.hpp"

namespace lapreg {

/// Coefficient law Ψ with a positive continuous density and a tail bound
/// ∫_{|x|>z} ψ ≤ exp(−b₁ z^{b₂}) for z ≥ z₀.
struct PsiSpec {
  enum class Kind { gaussian, laplace, custom };
  Kind kind = Kind::gaussian;
  double variance = 1.0;  // gaussian
  double scale = 1.0;     // laplace
  double b1 = 0.5, b2 = 2.0, z0 = 0.0;
  std::function<double(double)> custom_log_density;
  std::function<double(Rng&)> custom_sampler;

  static PsiSpec gaussian(double variance);
  static PsiSpec laplace(double b);
  static PsiSpec custom(std::function<double(double)> log_density, std::function<double(Rng&)> sampler, double b1,
                        double b2, double z0);

  double log_density(double z) const;
  double sample(Rng& rng) const;
  /// (b₁, b₂) of the tail bound; built-ins use Gaussian 1/(2s²), 2 and Laplace 1/b, 1.
  double tail_b1() const;
  double tail_b2() const;
  double tail_bound(double z, Index j) const { return static_cast<double>(j) * std::exp(-tail_b1() * std::pow(z, tail_b2())); }
  std::string name() const;
};

/// π_J on {1, 2, ...}.
struct JPrior {
  enum class Kind { fixed, poisson, geometric };
  Kind kind = Kind::fixed;
  Index j = 1;         // fixed
  double rate = 5.0;   // poisson, conditioned on J >= 1
  double p = 0.1;      // geometric: p (1 − p)^{j−1}

  static JPrior fixed(Index j);
  static JPrior poisson(double rate);
  static JPrior geometric(double p);

  double log_pmf(Index j) const;
  Index sample(Rng& rng) const;
  std::string name() const;
};

/// π_h(· | J).
struct HPrior {
  enum class Kind { fixed, deterministic_of_j, dyadic_grid };
  Kind kind = Kind::fixed;
  double h = 0.5;          // fixed
  double h0 = 1.0;         // deterministic-of-J: h = h0 J^{−1/d} / ln^{τ/d} N
  double tau = 1.0;
  double h_star = 0.1;     // dyadic grid h_l = 2^l h_*, l = 0..L
  int levels = 0;          // L
  double lambda_h = 1.0;   // inverse-gamma (a, λ) masses
  double a = 1.0;

  static HPrior fixed(double h);
  static HPrior deterministic_of_j(double h0, double tau);
  static HPrior dyadic_grid(double h_star, int levels, double lambda_h, double a);

  /// Support and masses given J (d and N enter the deterministic rule).
  std::vector<std::pair<double, double>> conditional(Index j, int d, Index big_n) const;
  std::string name() const;
};

struct PriorSpec {
  PsiSpec psi;
  JPrior j_prior;
  HPrior h_prior;
  double sigma = 0.1;
  /// Largest J on the analytic grid.
  Index j_cap = 10;
};

/// J_cap = min(N, ⌊4 n^{d/(2+d)}⌋).
Index default_j_cap(Index n, Index big_n, int d);

/// h_* = m_n (ln n / n)^{1/D} and the largest L with 2^L h_* <= h_max (0 if none).
std::pair<double, int> default_dyadic_grid(Index n, int ambient_dim, double m_n = 1.0, double h_max = 1.0);

/// P(h = 2^l h_*) = P(h̃ ∈ I_l) for h̃ ~ IG(a, λ), with I_0 = [0, 2h_*],
/// I_l = ]2^l h_*, 2^{l+1} h_*] and I_L = ]2^L h_*, ∞[. With a = 0 the
/// improper law x⁻¹e^{−λ/x} is truncated at 2^{L+1} h_*.
std::vector<double> inverse_gamma_discretized_h(double a, double lambda, double h_star, int levels);

/// Maps h to the graph-Laplacian eigenbasis on a fixed cloud; one graph and one
/// decomposition per distinct h, shared by all callers. Thread-safe.
class BasisProvider {
 public:
  BasisProvider(Matrix points, Index j_max, DecomposeOptions options = {});

  std::shared_ptr<const SpectralBasis> get(double h) const;
  Index j_max() const { return j_max_; }
  Index size() const { return points_.rows(); }
  std::size_t cached() const;

 private:
  Matrix points_;
  Index j_max_;
  DecomposeOptions options_;
  mutable std::mutex mutex_;
  mutable std::map<double, std::shared_ptr<const SpectralBasis>> cache_;
};

struct PriorDraw {
  Index j = 1;
  double h = 0.0;
  Vector z;
  Vector f;  // length N
  bool truncated = false;  // J exceeded the basis size
};

PriorDraw sample_prior(const PriorSpec& spec, const BasisProvider& provider, int d, std::uint64_t seed);

/// log ∫ N(y | U_L z, σ²I) N(z | 0, s²I) dz for the leading J columns, U_L the labeled rows.
double log_evidence_gaussian(const RegressionDataset& data, const SpectralBasis& basis, Index j, double s2);

/// One Cholesky factorization of U_LᵀU_L + (σ²/s²)I at J_cap serves every J <= J_cap
/// through its leading blocks.
class GaussianModelFamily {
 public:
  GaussianModelFamily(const RegressionDataset& data, const SpectralBasis& basis, Index j_cap, double s2);

  Index j_cap() const { return j_cap_; }
  double log_evidence(Index j) const;
  /// E[z | y, J] = M_J⁻¹ U_Lᵀ y.
  Vector posterior_mean(Index j) const;
  /// Exact draw from N(M_J⁻¹U_Lᵀy, σ² M_J⁻¹).
  Vector sample(Index j, Rng& rng) const;

 private:
  Index n_ = 0;
  Index j_cap_ = 0;
  double sigma2_ = 0.0;
  double s2_ = 0.0;
  double yty_ = 0.0;
  Matrix chol_;  // lower triangular
  Vector w_;     // L⁻¹ U_Lᵀ y
};

struct ModelWeight {
  Index j = 1;
  double h = 0.0;
  double log_prior = 0.0;
  double log_evidence = 0.0;
  double weight = 0.0;
};

struct PosteriorDraw {
  Index j = 1;
  double h = 0.0;
  Vector z;
};

struct PosteriorResult {
  std::vector<ModelWeight> models;  // Gaussian path only
  std::vector<PosteriorDraw> draws;
  Matrix draw_values;  // N × S
  Vector posterior_mean;
  /// MH path: acceptance rates and, for a fixed model, coefficient means with batch-means s.e.
  double acceptance_z = 0.0;
  double acceptance_model = 0.0;
  Vector coefficient_mean;
  Vector coefficient_se;
  std::vector<std::string> warnings;

  /// P(J = j | data): analytic weights when available, draw frequencies otherwise.
  std::map<Index, double> j_marginal() const;
  Index modal_j() const;
};

struct GaussianPosteriorOptions {
  Index draws = 200;
  std::uint64_t seed = 1;
};

/// Exact mixture posterior over the finite (J, h) grid J <= spec.j_cap.
PosteriorResult posterior_gaussian(const RegressionDataset& data, const PriorSpec& spec,
                                   const BasisProvider& provider, const GaussianPosteriorOptions& options = {});

struct MhOptions {
  Index burn_in = 2000;
  Index samples = 10000;
  Index thin = 10;
  double initial_step = 0.5;
  double target_acceptance = 0.3;
  Index batches = 25;
  std::uint64_t seed = 1;
};

/// Metropolis-within-Gibbs: random-walk updates per coefficient (steps adapt during
/// burn-in, then freeze) and independence proposals on (J, h) from the prior.
/// The chain keeps J_cap coefficients; those beyond the current J follow Ψ.
PosteriorResult posterior_mh(const RegressionDataset& data, const PriorSpec& spec, const BasisProvider& provider,
                             const MhOptions& options = {});

struct CredibleRadius {
  double radius_n = 0.0;
  double radius_big_n = 0.0;
};

/// Empirical α-quantile of ‖f^{(s)} − f₀‖ over the draws; refuses fewer than 50 draws.
CredibleRadius credible_radius(const PosteriorResult& result, const RegressionDataset& data, double alpha);

}  // namespace lapreg
