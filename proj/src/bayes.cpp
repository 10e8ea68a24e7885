#include "lapreg/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Cholesky>
#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace lapreg {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const std::vector<double>& v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

Matrix labeled_rows(const SpectralBasis& basis, const std::vector<Index>& idx, Index cols) {
  Matrix out(static_cast<Index>(idx.size()), cols);
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = basis.eigenvectors.row(idx[i]).head(cols);
  return out;
}

// Finite (J, h) grid with normalized log prior masses.
struct ModelGrid {
  struct Cell {
    Index j;
    double h;
    double log_prior;
  };
  std::vector<Cell> cells;
  std::vector<double> h_values;
  Index j_top = 0;
};

ModelGrid build_grid(const PriorSpec& spec, int d, Index big_n) {
  require(spec.j_cap >= 1, "prior: J_cap must be at least 1");
  ModelGrid grid;
  for (Index j = 1; j <= spec.j_cap; ++j) {
    const double lj = spec.j_prior.log_pmf(j);
    if (!std::isfinite(lj)) continue;
    for (const auto& [h, mass] : spec.h_prior.conditional(j, d, big_n)) {
      if (mass <= 0.0) continue;
      grid.cells.push_back({j, h, lj + std::log(mass)});
      grid.j_top = std::max(grid.j_top, j);
      if (std::find(grid.h_values.begin(), grid.h_values.end(), h) == grid.h_values.end()) grid.h_values.push_back(h);
    }
  }
  require(!grid.cells.empty(), "prior: empty (J, h) grid");
  std::vector<double> lp;
  for (const auto& c : grid.cells) lp.push_back(c.log_prior);
  const double norm = log_sum_exp(lp);
  for (auto& c : grid.cells) c.log_prior -= norm;
  return grid;
}

}  // namespace

// ---------------------------------------------------------------- Ψ

PsiSpec PsiSpec::gaussian(double variance) {
  require(variance > 0.0, "gaussian psi: variance must be positive");
  PsiSpec p;
  p.kind = Kind::gaussian;
  p.variance = variance;
  return p;
}

PsiSpec PsiSpec::laplace(double b) {
  require(b > 0.0, "laplace psi: scale must be positive");
  PsiSpec p;
  p.kind = Kind::laplace;
  p.scale = b;
  return p;
}

PsiSpec PsiSpec::custom(std::function<double(double)> log_density, std::function<double(Rng&)> sampler, double b1,
                        double b2, double z0) {
  require(log_density && sampler, "custom psi: density and sampler required");
  require(b1 > 0.0 && b2 > 0.0 && z0 >= 0.0, "custom psi: tail parameters must be positive");
  PsiSpec p;
  p.kind = Kind::custom;
  p.custom_log_density = std::move(log_density);
  p.custom_sampler = std::move(sampler);
  p.b1 = b1;
  p.b2 = b2;
  p.z0 = z0;
  return p;
}

double PsiSpec::log_density(double z) const {
  switch (kind) {
    case Kind::gaussian:
      return -0.5 * z * z / variance - 0.5 * std::log(2.0 * std::numbers::pi * variance);
    case Kind::laplace:
      return -std::abs(z) / scale - std::log(2.0 * scale);
    case Kind::custom:
      return custom_log_density(z);
  }
  return kNegInf;
}

double PsiSpec::sample(Rng& rng) const {
  switch (kind) {
    case Kind::gaussian:
      return std::normal_distribution<double>(0.0, std::sqrt(variance))(rng);
    case Kind::laplace: {
      const double e = std::exponential_distribution<double>(1.0 / scale)(rng);
      return std::bernoulli_distribution(0.5)(rng) ? e : -e;
    }
    case Kind::custom:
      return custom_sampler(rng);
  }
  return 0.0;
}

double PsiSpec::tail_b1() const {
  switch (kind) {
    case Kind::gaussian:
      return 1.0 / (2.0 * variance);
    case Kind::laplace:
      return 1.0 / scale;
    case Kind::custom:
      return b1;
  }
  return b1;
}

double PsiSpec::tail_b2() const {
  switch (kind) {
    case Kind::gaussian:
      return 2.0;
    case Kind::laplace:
      return 1.0;
    case Kind::custom:
      return b2;
  }
  return b2;
}

std::string PsiSpec::name() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::gaussian:
      os << "gaussian(" << variance << ")";
      break;
    case Kind::laplace:
      os << "laplace(" << scale << ")";
      break;
    case Kind::custom:
      os << "custom(" << b1 << "," << b2 << "," << z0 << ")";
      break;
  }
  return os.str();
}

// ---------------------------------------------------------------- π_J, π_h

JPrior JPrior::fixed(Index j) {
  require(j >= 1, "fixed J prior: J must be at least 1");
  JPrior p;
  p.kind = Kind::fixed;
  p.j = j;
  return p;
}

JPrior JPrior::poisson(double rate) {
  require(rate > 0.0, "poisson J prior: rate must be positive");
  JPrior p;
  p.kind = Kind::poisson;
  p.rate = rate;
  return p;
}

JPrior JPrior::geometric(double prob) {
  require(prob > 0.0 && prob <= 1.0, "geometric J prior: p must lie in (0, 1]");
  JPrior p;
  p.kind = Kind::geometric;
  p.p = prob;
  return p;
}

double JPrior::log_pmf(Index value) const {
  if (value < 1) return kNegInf;
  const double x = static_cast<double>(value);
  switch (kind) {
    case Kind::fixed:
      return value == j ? 0.0 : kNegInf;
    case Kind::poisson:
      return x * std::log(rate) - rate - std::lgamma(x + 1.0) - std::log1p(-std::exp(-rate));
    case Kind::geometric:
      if (p == 1.0) return value == 1 ? 0.0 : kNegInf;
      return std::log(p) + (x - 1.0) * std::log1p(-p);
  }
  return kNegInf;
}

Index JPrior::sample(Rng& rng) const {
  switch (kind) {
    case Kind::fixed:
      return j;
    case Kind::poisson: {
      std::poisson_distribution<long long> dist(rate);
      for (;;) {
        const long long v = dist(rng);
        if (v >= 1) return static_cast<Index>(v);
      }
    }
    case Kind::geometric:
      // std::geometric_distribution counts failures before the first success
      return 1 + static_cast<Index>(std::geometric_distribution<long long>(p)(rng));
  }
  return j;
}

std::string JPrior::name() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::fixed:
      os << "fixed(" << j << ")";
      break;
    case Kind::poisson:
      os << "poisson(" << rate << ")";
      break;
    case Kind::geometric:
      os << "geometric(" << p << ")";
      break;
  }
  return os.str();
}

HPrior HPrior::fixed(double h) {
  require(h > 0.0, "fixed h prior: h must be positive");
  HPrior p;
  p.kind = Kind::fixed;
  p.h = h;
  return p;
}

HPrior HPrior::deterministic_of_j(double h0, double tau) {
  require(h0 > 0.0, "deterministic h prior: h0 must be positive");
  HPrior p;
  p.kind = Kind::deterministic_of_j;
  p.h0 = h0;
  p.tau = tau;
  return p;
}

HPrior HPrior::dyadic_grid(double h_star, int levels, double lambda_h, double a) {
  require(h_star > 0.0 && levels >= 0, "dyadic h prior: need h_* > 0 and L >= 0");
  require(lambda_h > 0.0 && a >= 0.0, "dyadic h prior: need lambda > 0 and a >= 0");
  HPrior p;
  p.kind = Kind::dyadic_grid;
  p.h_star = h_star;
  p.levels = levels;
  p.lambda_h = lambda_h;
  p.a = a;
  return p;
}

std::vector<std::pair<double, double>> HPrior::conditional(Index j, int d, Index big_n) const {
  switch (kind) {
    case Kind::fixed:
      return {{h, 1.0}};
    case Kind::deterministic_of_j: {
      const double logn = std::log(std::max<double>(3.0, static_cast<double>(big_n)));
      return {{h0 * std::pow(static_cast<double>(j), -1.0 / d) / std::pow(logn, tau / d), 1.0}};
    }
    case Kind::dyadic_grid: {
      const std::vector<double> mass = inverse_gamma_discretized_h(a, lambda_h, h_star, levels);
      std::vector<std::pair<double, double>> out;
      for (int l = 0; l <= levels; ++l) out.emplace_back(std::ldexp(h_star, l), mass[static_cast<std::size_t>(l)]);
      return out;
    }
  }
  return {};
}

std::string HPrior::name() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::fixed:
      os << "fixed(" << h << ")";
      break;
    case Kind::deterministic_of_j:
      os << "deterministic(" << h0 << "," << tau << ")";
      break;
    case Kind::dyadic_grid:
      os << "dyadic(" << h_star << "," << levels << "," << lambda_h << "," << a << ")";
      break;
  }
  return os.str();
}

Index default_j_cap(Index n, Index big_n, int d) {
  const double cap = std::floor(4.0 * std::pow(static_cast<double>(n), static_cast<double>(d) / (2.0 + d)) + 1e-9);
  return std::clamp<Index>(static_cast<Index>(cap), 1, big_n);
}

std::pair<double, int> default_dyadic_grid(Index n, int ambient_dim, double m_n, double h_max) {
  require(n >= 2, "dyadic grid: need n >= 2");
  const double nn = static_cast<double>(n);
  const double h_star = m_n * std::pow(std::log(nn) / nn, 1.0 / ambient_dim);
  int levels = 0;
  while (std::ldexp(h_star, levels + 1) <= h_max) ++levels;
  return {h_star, levels};
}

std::vector<double> inverse_gamma_discretized_h(double a, double lambda, double h_star, int levels) {
  require(a >= 0.0 && lambda > 0.0 && h_star > 0.0 && levels >= 0, "inverse gamma h prior: bad parameters");
  std::vector<double> mass(static_cast<std::size_t>(levels) + 1, 0.0);
  if (levels == 0) {
    mass[0] = 1.0;
    return mass;
  }
  // Cell edges e_1 < … < e_L with e_l = 2^l h_*; I_0 = [0, e_1], I_L = ]e_L, ∞[.
  if (a > 0.0) {
    // P(h̃ <= x) = Q(a, λ/x)
    auto cdf = [&](double x) { return boost::math::gamma_q(a, lambda / x); };
    double prev = 0.0;
    for (int l = 0; l < levels; ++l) {
      const double c = cdf(std::ldexp(h_star, l + 1));
      mass[static_cast<std::size_t>(l)] = c - prev;
      prev = c;
    }
    mass[static_cast<std::size_t>(levels)] = 1.0 - prev;
  } else {
    // ∫_{x<=e} x⁻¹ e^{−λ/x} dx = E1(λ/e); the last cell stops at 2^{L+1} h_*.
    auto e1 = [&](double x) { return boost::math::expint(1, lambda / x); };
    double prev = 0.0;
    for (int l = 0; l <= levels; ++l) {
      const double c = e1(std::ldexp(h_star, l + 1));
      mass[static_cast<std::size_t>(l)] = c - prev;
      prev = c;
    }
    for (double& m : mass) m /= prev;
  }
  return mass;
}

// ---------------------------------------------------------------- basis cache

BasisProvider::BasisProvider(Matrix points, Index j_max, DecomposeOptions options)
    : points_(std::move(points)), j_max_(j_max), options_(options) {
  require(points_.rows() >= 1, "BasisProvider: empty cloud");
  require(j_max_ >= 1, "BasisProvider: J_max must be at least 1");
  j_max_ = std::min(j_max_, points_.rows());
}

std::shared_ptr<const SpectralBasis> BasisProvider::get(double h) const {
  {
    std::lock_guard lock(mutex_);
    auto it = cache_.find(h);
    if (it != cache_.end()) return it->second;
  }
  auto basis = std::make_shared<const SpectralBasis>(decompose(laplacian(build_graph(points_, h)), j_max_, options_));
  std::lock_guard lock(mutex_);
  auto [it, inserted] = cache_.emplace(h, std::move(basis));
  return it->second;
}

std::size_t BasisProvider::cached() const {
  std::lock_guard lock(mutex_);
  return cache_.size();
}

// ---------------------------------------------------------------- prior draws

PriorDraw sample_prior(const PriorSpec& spec, const BasisProvider& provider, int d, std::uint64_t seed) {
  Rng rng(seed);
  PriorDraw draw;
  draw.j = spec.j_prior.sample(rng);
  require(draw.j >= 1, "sample_prior: J must be at least 1");
  const auto options = spec.h_prior.conditional(draw.j, d, provider.size());
  std::vector<double> weights;
  for (const auto& o : options) weights.push_back(o.second);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  draw.h = options[pick(rng)].first;
  const auto basis = provider.get(draw.h);
  Index used = draw.j;
  if (used > basis->j_max()) {
    draw.truncated = true;
    used = basis->j_max();
  }
  draw.z.resize(draw.j);
  for (Index k = 0; k < draw.j; ++k) draw.z(k) = spec.psi.sample(rng);
  draw.f = basis->synthesize(draw.z.head(used));
  return draw;
}

// ---------------------------------------------------------------- Gaussian evidence

GaussianModelFamily::GaussianModelFamily(const RegressionDataset& data, const SpectralBasis& basis, Index j_cap,
                                         double s2)
    : n_(data.n()), j_cap_(j_cap), sigma2_(data.sigma * data.sigma), s2_(s2) {
  data.validate();
  require(basis.n() == data.big_n(), "gaussian evidence: basis built on a different cloud");
  require(j_cap >= 1 && j_cap <= basis.j_max(), "gaussian evidence: J out of range");
  require(s2 > 0.0 && sigma2_ > 0.0, "gaussian evidence: variances must be positive");
  const Matrix ul = labeled_rows(basis, data.labeled_idx, j_cap);
  Matrix m = ul.transpose() * ul;
  m.diagonal().array() += sigma2_ / s2_;
  Eigen::LLT<Matrix> llt(m);
  require(llt.info() == Eigen::Success, "gaussian evidence: system is not positive definite");
  chol_ = llt.matrixL();
  w_ = chol_.triangularView<Eigen::Lower>().solve(ul.transpose() * data.y);
  yty_ = data.y.squaredNorm();
}

double GaussianModelFamily::log_evidence(Index j) const {
  require(j >= 1 && j <= j_cap_, "log_evidence: J out of range");
  const double n = static_cast<double>(n_);
  // det(σ²I + s²UUᵀ) = σ^{2n} det(I + (s²/σ²)UᵀU) = σ^{2n} (s²/σ²)^J det(M_J)
  const double logdet_m = 2.0 * chol_.diagonal().head(j).array().log().sum();
  const double logdet = n * std::log(sigma2_) + static_cast<double>(j) * std::log(s2_ / sigma2_) + logdet_m;
  const double quad = (yty_ - w_.head(j).squaredNorm()) / sigma2_;
  return -0.5 * (n * std::log(2.0 * std::numbers::pi) + logdet + quad);
}

Vector GaussianModelFamily::posterior_mean(Index j) const {
  require(j >= 1 && j <= j_cap_, "posterior_mean: J out of range");
  return chol_.topLeftCorner(j, j).transpose().triangularView<Eigen::Upper>().solve(w_.head(j));
}

Vector GaussianModelFamily::sample(Index j, Rng& rng) const {
  std::normal_distribution<double> normal;
  Vector xi(j);
  for (Index k = 0; k < j; ++k) xi(k) = normal(rng);
  const Vector noise = chol_.topLeftCorner(j, j).transpose().triangularView<Eigen::Upper>().solve(xi);
  return posterior_mean(j) + std::sqrt(sigma2_) * noise;
}

double log_evidence_gaussian(const RegressionDataset& data, const SpectralBasis& basis, Index j, double s2) {
  return GaussianModelFamily(data, basis, j, s2).log_evidence(j);
}

// ---------------------------------------------------------------- posteriors

std::map<Index, double> PosteriorResult::j_marginal() const {
  std::map<Index, double> out;
  if (!models.empty()) {
    for (const auto& m : models) out[m.j] += m.weight;
    return out;
  }
  for (const auto& d : draws) out[d.j] += 1.0;
  for (auto& [j, w] : out) w /= static_cast<double>(draws.size());
  return out;
}

Index PosteriorResult::modal_j() const {
  const auto marginal = j_marginal();
  require(!marginal.empty(), "modal_j: empty posterior");
  return std::max_element(marginal.begin(), marginal.end(),
                          [](const auto& a, const auto& b) { return a.second < b.second; })
      ->first;
}

PosteriorResult posterior_gaussian(const RegressionDataset& data, const PriorSpec& spec,
                                   const BasisProvider& provider, const GaussianPosteriorOptions& options) {
  require(spec.psi.kind == PsiSpec::Kind::gaussian, "posterior_gaussian: Psi must be Gaussian");
  require(provider.size() == data.big_n(), "posterior_gaussian: provider built on a different cloud");
  RegressionDataset model_data = data;
  model_data.sigma = spec.sigma;
  const int d = data.cloud.manifold.intrinsic_dim();
  const ModelGrid grid = build_grid(spec, d, data.big_n());

  PosteriorResult result;
  std::map<double, std::shared_ptr<const SpectralBasis>> bases;
  std::map<double, std::unique_ptr<GaussianModelFamily>> families;
  for (double h : grid.h_values) {
    auto basis = provider.get(h);
    const Index cap = std::min(grid.j_top, basis->j_max());
    if (cap < grid.j_top) result.warnings.push_back("basis at h=" + std::to_string(h) + " truncated to J=" + std::to_string(cap));
    families[h] = std::make_unique<GaussianModelFamily>(model_data, *basis, cap, spec.psi.variance);
    bases[h] = std::move(basis);
  }

  std::vector<double> log_post;
  for (const auto& c : grid.cells) {
    const auto& family = *families.at(c.h);
    if (c.j > family.j_cap()) continue;
    ModelWeight m;
    m.j = c.j;
    m.h = c.h;
    m.log_prior = c.log_prior;
    m.log_evidence = family.log_evidence(c.j);
    result.models.push_back(m);
    log_post.push_back(m.log_prior + m.log_evidence);
  }
  require(!result.models.empty(), "posterior_gaussian: no model fits the available bases");
  const double norm = log_sum_exp(log_post);
  require(std::isfinite(norm), "posterior_gaussian: all model weights underflow");
  std::vector<double> weights;
  for (std::size_t i = 0; i < result.models.size(); ++i) {
    result.models[i].weight = std::exp(log_post[i] - norm);
    weights.push_back(result.models[i].weight);
  }

  result.posterior_mean = Vector::Zero(data.big_n());
  for (const auto& m : result.models) {
    if (m.weight < 1e-300) continue;
    const auto& basis = *bases.at(m.h);
    result.posterior_mean += m.weight * basis.synthesize(families.at(m.h)->posterior_mean(m.j));
  }

  Rng rng(options.seed);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  result.draw_values.resize(data.big_n(), options.draws);
  for (Index s = 0; s < options.draws; ++s) {
    const auto& m = result.models[pick(rng)];
    PosteriorDraw draw{m.j, m.h, families.at(m.h)->sample(m.j, rng)};
    result.draw_values.col(s) = bases.at(m.h)->synthesize(draw.z);
    result.draws.push_back(std::move(draw));
  }
  return result;
}

PosteriorResult posterior_mh(const RegressionDataset& data, const PriorSpec& spec, const BasisProvider& provider,
                             const MhOptions& options) {
  require(provider.size() == data.big_n(), "posterior_mh: provider built on a different cloud");
  require(spec.sigma > 0.0, "posterior_mh: sigma must be positive");
  require(options.samples >= 1 && options.thin >= 1 && options.burn_in >= 0, "posterior_mh: bad chain lengths");
  data.validate();
  const int d = data.cloud.manifold.intrinsic_dim();
  const ModelGrid grid = build_grid(spec, d, data.big_n());

  PosteriorResult result;
  std::map<double, std::shared_ptr<const SpectralBasis>> bases;
  std::map<double, Matrix> rows;
  Index jc = grid.j_top;
  for (double h : grid.h_values) {
    auto basis = provider.get(h);
    jc = std::min(jc, basis->j_max());
    bases[h] = std::move(basis);
  }
  if (jc < grid.j_top) result.warnings.push_back("J grid truncated to " + std::to_string(jc));
  for (const auto& [h, basis] : bases) rows[h] = labeled_rows(*basis, data.labeled_idx, jc);

  std::vector<ModelGrid::Cell> cells;
  std::vector<double> prior_mass;
  for (const auto& c : grid.cells) {
    if (c.j > jc) continue;
    cells.push_back(c);
    prior_mass.push_back(std::exp(c.log_prior));
  }
  require(!cells.empty(), "posterior_mh: no model fits the available bases");

  Rng rng(options.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::discrete_distribution<std::size_t> propose_model(prior_mass.begin(), prior_mass.end());
  const double inv_2s2 = 0.5 / (spec.sigma * spec.sigma);

  std::size_t model = propose_model(rng);
  Vector z(jc);
  for (Index k = 0; k < jc; ++k) z(k) = spec.psi.sample(rng);
  auto fitted_for = [&](std::size_t m) -> Vector {
    const auto& c = cells[m];
    return rows.at(c.h).leftCols(c.j) * z.head(c.j);
  };
  Vector fitted = fitted_for(model);
  double loglik = -inv_2s2 * (data.y - fitted).squaredNorm();

  Vector step = Vector::Constant(jc, options.initial_step);
  std::vector<long long> window_acc(static_cast<std::size_t>(jc), 0);
  long long window = 0;
  long long acc_z = 0, tried_z = 0, acc_m = 0, tried_m = 0;

  const Index total = options.burn_in + options.samples;
  const Index batches = std::max<Index>(2, std::min(options.batches, options.samples));
  const Index batch_len = std::max<Index>(1, options.samples / batches);
  Matrix batch_sums = Matrix::Zero(jc, batches);
  Vector sum = Vector::Zero(jc);
  result.draw_values.resize(data.big_n(), options.samples / options.thin);
  Index stored = 0;

  for (Index it = 0; it < total; ++it) {
    const bool sampling = it >= options.burn_in;
    if (cells.size() > 1) {
      const std::size_t proposal = propose_model(rng);
      const Vector f_new = fitted_for(proposal);
      const double ll_new = -inv_2s2 * (data.y - f_new).squaredNorm();
      if (sampling) ++tried_m;
      if (std::log(unif(rng)) < ll_new - loglik) {
        model = proposal;
        fitted = f_new;
        loglik = ll_new;
        if (sampling) ++acc_m;
      }
    }
    const auto& cell = cells[model];
    const Matrix& ul = rows.at(cell.h);
    for (Index k = 0; k < jc; ++k) {
      const double old = z(k);
      const double proposal = old + step(k) * normal(rng);
      double delta = spec.psi.log_density(proposal) - spec.psi.log_density(old);
      Vector f_new;
      double ll_new = loglik;
      if (k < cell.j) {
        f_new = fitted + (proposal - old) * ul.col(k);
        ll_new = -inv_2s2 * (data.y - f_new).squaredNorm();
        delta += ll_new - loglik;
      }
      const bool accept = std::log(unif(rng)) < delta;
      if (accept) {
        z(k) = proposal;
        if (k < cell.j) {
          fitted = std::move(f_new);
          loglik = ll_new;
        }
      }
      if (sampling) {
        ++tried_z;
        acc_z += accept;
      } else {
        window_acc[static_cast<std::size_t>(k)] += accept;
      }
    }
    if (!sampling && ++window == 50) {
      for (Index k = 0; k < jc; ++k) {
        const double rate = static_cast<double>(window_acc[static_cast<std::size_t>(k)]) / 50.0;
        step(k) *= std::exp(2.0 * (rate - options.target_acceptance));
        window_acc[static_cast<std::size_t>(k)] = 0;
      }
      window = 0;
    }
    if (!sampling) continue;

    const Index t = it - options.burn_in;
    sum += z;
    const Index b = std::min(batches - 1, t / batch_len);
    batch_sums.col(b) += z;
    if ((t + 1) % options.thin == 0 && stored < result.draw_values.cols()) {
      PosteriorDraw draw{cell.j, cell.h, z.head(cell.j)};
      result.draw_values.col(stored++) = bases.at(cell.h)->synthesize(draw.z);
      result.draws.push_back(std::move(draw));
    }
  }
  result.draw_values.conservativeResize(Eigen::NoChange, stored);

  result.acceptance_z = tried_z ? static_cast<double>(acc_z) / static_cast<double>(tried_z) : 0.0;
  result.acceptance_model = tried_m ? static_cast<double>(acc_m) / static_cast<double>(tried_m) : 1.0;
  for (double rate : {result.acceptance_z, result.acceptance_model}) {
    if (rate < 0.05 || rate > 0.95) {
      std::ostringstream os;
      os << "acceptance rate " << rate << " outside [0.05, 0.95]";
      result.warnings.push_back(os.str());
    }
  }

  result.coefficient_mean = sum / static_cast<double>(options.samples);
  result.coefficient_se.resize(jc);
  for (Index k = 0; k < jc; ++k) {
    std::vector<double> means;
    for (Index b = 0; b < batches; ++b) {
      const Index len = b == batches - 1 ? options.samples - b * batch_len : batch_len;
      if (len > 0) means.push_back(batch_sums(k, b) / static_cast<double>(len));
    }
    double m = 0.0, v = 0.0;
    for (double x : means) m += x;
    m /= static_cast<double>(means.size());
    for (double x : means) v += (x - m) * (x - m);
    v /= static_cast<double>(means.size() - 1);
    result.coefficient_se(k) = std::sqrt(v / static_cast<double>(means.size()));
  }
  result.posterior_mean = stored ? Vector(result.draw_values.rowwise().mean()) : Vector::Zero(data.big_n());
  return result;
}

CredibleRadius credible_radius(const PosteriorResult& result, const RegressionDataset& data, double alpha) {
  require(alpha > 0.0 && alpha <= 1.0, "credible_radius: alpha must lie in (0, 1]");
  require(data.cloud.true_values.has_value(), "credible_radius: f0 unknown");
  const Index s = result.draw_values.cols();
  require(s >= 50, "credible_radius: need at least 50 draws, have " + std::to_string(s));
  const Vector& f0 = *data.cloud.true_values;
  std::vector<double> rn, rbig;
  for (Index k = 0; k < s; ++k) {
    const Vector diff = result.draw_values.col(k) - f0;
    double acc = 0.0;
    for (Index i : data.labeled_idx) acc += diff(i) * diff(i);
    rn.push_back(std::sqrt(acc / static_cast<double>(data.n())));
    rbig.push_back(std::sqrt(diff.squaredNorm() / static_cast<double>(data.big_n())));
  }
  // smallest r with at least ⌈αS⌉ draws inside
  const auto rank = static_cast<std::size_t>(std::max<double>(1.0, std::ceil(alpha * static_cast<double>(s) - 1e-9))) - 1;
  std::nth_element(rn.begin(), rn.begin() + static_cast<long>(rank), rn.end());
  std::nth_element(rbig.begin(), rbig.begin() + static_cast<long>(rank), rbig.end());
  return {rn[rank], rbig[rank]};
}

}  // namespace lapreg
