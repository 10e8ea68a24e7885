#include "lapreg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace lapreg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

EigenMethod parse_method(const std::string& s) {
  if (s == "automatic") return EigenMethod::automatic;
  if (s == "dense") return EigenMethod::dense;
  if (s == "krylov") return EigenMethod::krylov;
  throw Error("unknown eigen method '" + s + "'");
}

std::string method_name(EigenMethod m) {
  switch (m) {
    case EigenMethod::automatic: return "automatic";
    case EigenMethod::dense: return "dense";
    case EigenMethod::krylov: return "krylov";
  }
  return "automatic";
}

DecomposeOptions parse_eigen(const json& j, DecomposeOptions base = {}) {
  if (j.is_null()) return base;
  base.method = parse_method(j.value("method", method_name(base.method)));
  base.dense_threshold = j.value("dense_threshold", base.dense_threshold);
  base.max_dense_fraction = j.value("max_dense_fraction", base.max_dense_fraction);
  base.tolerance = j.value("tolerance", base.tolerance);
  base.seed = j.value("seed", base.seed);
  return base;
}

json eigen_to_json(const DecomposeOptions& o) {
  return {{"method", method_name(o.method)},
          {"dense_threshold", o.dense_threshold},
          {"max_dense_fraction", o.max_dense_fraction},
          {"tolerance", o.tolerance},
          {"seed", o.seed}};
}

std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

double parse_num(const std::string& s) {
  if (s == "nan" || s == "NaN" || s == "-nan" || s.empty()) return kNaN;
  return std::stod(s);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string key_of(Index n, Index replicate, const std::string& estimator) {
  return std::to_string(n) + "/" + std::to_string(replicate) + "/" + estimator;
}

int worker_count(int jobs) {
  if (jobs > 0) return jobs;
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

// Rows written for one (n, replicate) cell.
struct CellOutput {
  std::vector<LedgerRow> rows;
  std::vector<std::string> summaries;
  std::vector<std::string> marginals;
};

CellOutput run_cell(const ExperimentConfig& cfg, Index n, Index replicate, const std::vector<std::string>& todo) {
  CellOutput out;
  const Index big_n = cfg.big_n_for(n);
  const int d = cfg.manifold.intrinsic_dim();
  const auto u_n = static_cast<std::uint64_t>(n);
  const auto u_r = static_cast<std::uint64_t>(replicate);

  ManifoldSpec spec = cfg.manifold;
  spec.seed = split_seed(cfg.seed, {u_n, u_r, 1});
  const PointCloud cloud = sample_cloud(spec, big_n, cfg.truth);
  const RegressionDataset data = make_synthetic_dataset(cloud, n, cfg.sigma, split_seed(cfg.seed, {u_n, u_r, 2}));

  Tuning tuning;
  if (cfg.tuning.explicit_values) {
    tuning.j = std::min(cfg.tuning.j, big_n);
    tuning.h = cfg.tuning.h;
  } else {
    tuning = tune_jh(static_cast<double>(n), static_cast<double>(big_n), d, cfg.beta, cfg.tuning.tau, cfg.tuning.rule);
  }

  const bool wants_prior2 = std::find(todo.begin(), todo.end(), "prior2") != todo.end();
  const Index j_cap = cfg.j_cap_for(n);
  DecomposeOptions eigen = cfg.eigen;
  eigen.seed = split_seed(cfg.seed, {u_n, u_r, 3});
  const BasisProvider provider(cloud.points, wants_prior2 ? std::max(tuning.j, j_cap) : tuning.j, eigen);

  for (const auto& estimator : todo) {
    LedgerRow row{n, big_n, tuning.j, tuning.h, cfg.beta, replicate, kNaN, kNaN, estimator};
    if (estimator == "pcr-le") {
      const auto basis = provider.get(tuning.h);
      const FitReport fit = pcr_le(data, *basis, std::min(tuning.j, basis->j_max()));
      row.loss_n = fit.loss_n;
      row.loss_big_n = fit.loss_big_n;
    } else {
      PriorSpec prior;
      prior.psi = cfg.prior.psi;
      prior.sigma = cfg.sigma;
      if (estimator == "prior1") {
        prior.j_prior = JPrior::fixed(tuning.j);
        prior.h_prior = HPrior::fixed(tuning.h);
        prior.j_cap = tuning.j;
      } else if (estimator == "prior2") {
        const auto [h_star, levels] = default_dyadic_grid(n, cfg.manifold.ambient_dim, cfg.prior.m_n, cfg.prior.h_max);
        prior.j_prior = cfg.prior.j_prior;
        prior.h_prior = HPrior::dyadic_grid(h_star, levels, cfg.prior.lambda_h, cfg.prior.a);
        prior.j_cap = j_cap;
      } else {
        throw Error("unknown estimator '" + estimator + "'");
      }
      GaussianPosteriorOptions options;
      options.draws = cfg.prior.draws;
      options.seed = split_seed(cfg.seed, {u_n, u_r, 4});
      const PosteriorResult post = posterior_gaussian(data, prior, provider, options);
      FitReport fit;
      fit.estimate = post.posterior_mean;
      attach_losses(fit, data);
      row.loss_n = fit.loss_n;
      row.loss_big_n = fit.loss_big_n;
      const auto top = std::max_element(post.models.begin(), post.models.end(),
                                        [](const auto& a, const auto& b) { return a.weight < b.weight; });
      row.j = top->j;
      row.h = top->h;

      std::ostringstream s;
      s << n << ',' << big_n << ',' << replicate << ',' << estimator << ',' << post.modal_j() << ',' << num(top->h);
      for (double alpha : {0.5, 0.9, 0.95}) {
        const CredibleRadius r = post.draw_values.cols() >= 50 ? credible_radius(post, data, alpha)
                                                                : CredibleRadius{kNaN, kNaN};
        s << ',' << num(r.radius_n) << ',' << num(r.radius_big_n);
      }
      out.summaries.push_back(s.str());
      for (const auto& [j, w] : post.j_marginal()) {
        out.marginals.push_back(std::to_string(n) + ',' + std::to_string(replicate) + ',' + estimator + ',' +
                                std::to_string(j) + ',' + num(w));
      }
    }
    out.rows.push_back(row);
  }
  return out;
}

constexpr const char* kSummaryHeader =
    "n,N,replicate,estimator,modal_J,modal_h,radius_n_0.5,radius_N_0.5,radius_n_0.9,radius_N_0.9,radius_n_0.95,"
    "radius_N_0.95";
constexpr const char* kMarginalHeader = "n,replicate,estimator,J,weight";

// Keeps the last line per key (first four CSV fields identify summary rows, first three marginal rows).
void rewrite_sorted(const fs::path& path, const std::string& header, std::size_t key_fields) {
  if (!fs::exists(path)) return;
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::map<std::tuple<long long, long long, std::string, std::string>, std::string> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() < key_fields) continue;
    const long long a = std::stoll(f[0]);
    const long long b = std::stoll(key_fields == 4 ? f[2] : f[1]);
    const std::string c = key_fields == 4 ? f[3] : f[2];
    const std::string e = key_fields == 4 ? "" : f[3];
    rows[{a, b, c, key_fields == 4 ? "" : std::string(8 - std::min<std::size_t>(8, e.size()), '0') + e}] = line;
  }
  in.close();
  std::ofstream outf(path, std::ios::trunc);
  outf << header << '\n';
  for (const auto& [k, l] : rows) outf << l << '\n';
}

}  // namespace

// ---------------------------------------------------------------- JSON for priors

void to_json(json& j, const PsiSpec& psi) {
  switch (psi.kind) {
    case PsiSpec::Kind::gaussian: j = {{"kind", "gaussian"}, {"variance", psi.variance}}; break;
    case PsiSpec::Kind::laplace: j = {{"kind", "laplace"}, {"scale", psi.scale}}; break;
    case PsiSpec::Kind::custom: j = {{"kind", "custom"}, {"b1", psi.b1}, {"b2", psi.b2}, {"z0", psi.z0}}; break;
  }
}

void from_json(const json& j, PsiSpec& psi) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "gaussian") {
    psi = PsiSpec::gaussian(j.value("variance", 1.0));
  } else if (kind == "laplace") {
    psi = PsiSpec::laplace(j.value("scale", 1.0));
  } else {
    throw Error("psi kind '" + kind + "' cannot be configured from JSON");
  }
}

void to_json(json& j, const JPrior& prior) {
  switch (prior.kind) {
    case JPrior::Kind::fixed: j = {{"kind", "fixed"}, {"J", prior.j}}; break;
    case JPrior::Kind::poisson: j = {{"kind", "poisson"}, {"rate", prior.rate}}; break;
    case JPrior::Kind::geometric: j = {{"kind", "geometric"}, {"p", prior.p}}; break;
  }
}

void from_json(const json& j, JPrior& prior) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "fixed") {
    prior = JPrior::fixed(j.at("J").get<Index>());
  } else if (kind == "poisson") {
    prior = JPrior::poisson(j.at("rate").get<double>());
  } else if (kind == "geometric") {
    prior = JPrior::geometric(j.at("p").get<double>());
  } else {
    throw Error("unknown J prior '" + kind + "'");
  }
}

void to_json(json& j, const RateReport& r) {
  j = {{"estimator", r.estimator}, {"slope", r.slope},         {"slope_se", r.slope_se},
       {"intercept", r.intercept}, {"target", r.target},       {"lower", r.lower},
       {"upper", r.upper},         {"pass", r.pass},           {"n_values", r.n_values},
       {"mean_losses", r.mean_losses}, {"ledger", r.ledger}};
}

// ---------------------------------------------------------------- config

Index ExperimentConfig::big_n_for(Index n) const {
  if (n_exponent == 1.0) return n;
  return static_cast<Index>(std::ceil(std::pow(static_cast<double>(n), n_exponent) - 1e-9));
}

Index ExperimentConfig::j_cap_for(Index n) const {
  const int d = manifold.intrinsic_dim();
  const double cap = std::floor(prior.j_cap_factor * std::pow(static_cast<double>(n), d / (2.0 + d)) + 1e-9);
  return std::clamp<Index>(static_cast<Index>(cap), 1, big_n_for(n));
}

void ExperimentConfig::validate() const {
  manifold.validate();
  truth.validate();
  require(!n_grid.empty(), "config: empty n grid");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    require(n_grid[i] >= 2, "config: n must be at least 2");
    if (i > 0) require(n_grid[i] > n_grid[i - 1], "config: n grid must be strictly increasing");
  }
  require(n_exponent >= 1.0, "config: N exponent b must be at least 1");
  require(sigma > 0.0, "config: sigma must be positive");
  require(beta > 0.0, "config: beta must be positive");
  require(replicates >= 1, "config: replicates must be at least 1");
  for (const auto& e : estimators)
    require(e == "pcr-le" || e == "prior1" || e == "prior2", "config: unknown estimator '" + e + "'");
  if (tuning.explicit_values) require(tuning.j >= 1 && tuning.h > 0.0, "config: explicit tuning needs J >= 1, h > 0");
}

json default_config_json() {
  return json::parse(R"({
    "manifold": {"kind": "circle", "ambient_dim": 3, "density": "uniform", "density_params": [], "seed": 0},
    "truth": {"family": "trig", "k": 2},
    "beta": 2.0,
    "sigma": 0.1,
    "n_grid": [100, 200, 400, 800, 1600],
    "N_rule": {"kind": "equal"},
    "estimators": ["pcr-le"],
    "tuning": {"mode": "rule", "tau": 1.0, "c_h": 0.6, "c_j": 6.0, "h_log_exponent": 0.0, "j_log_exponent": 0.0},
    "prior": {
      "psi": {"kind": "gaussian", "variance": 1.0},
      "j_prior": {"kind": "geometric", "p": 0.1},
      "h_grid": {"m_n": 1.0, "h_max": 1.0, "lambda": 1.0, "a": 1.0},
      "j_cap_factor": 4.0,
      "draws": 200
    },
    "replicates": 20,
    "seed": 20240601,
    "jobs": 0,
    "output": "out/standard",
    "eigen": {"method": "automatic"},
    "rate_bounds": {"pcr-le": [-0.55, -0.25], "prior1": [-0.55, -0.25], "prior2": [-0.55, -0.20]},
    "diagnostics": {"checks": []}
  })");
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  c.manifold = j.at("manifold").get<ManifoldSpec>();
  c.truth = j.at("truth").get<TruthFamily>();
  c.beta = j.value("beta", c.truth.smoothness() < 1e300 ? c.truth.smoothness() : 2.0);
  c.sigma = j.value("sigma", c.sigma);
  c.n_grid = j.at("n_grid").get<std::vector<Index>>();
  if (j.contains("N_rule")) {
    const auto& r = j.at("N_rule");
    const auto kind = r.value("kind", std::string("equal"));
    if (kind == "equal") {
      c.n_exponent = 1.0;
    } else if (kind == "power") {
      c.n_exponent = r.at("exponent").get<double>();
    } else {
      throw Error("unknown N rule '" + kind + "'");
    }
  }
  c.estimators = j.value("estimators", std::vector<std::string>{"pcr-le"});
  if (j.contains("tuning")) {
    const auto& t = j.at("tuning");
    const auto mode = t.value("mode", std::string("rule"));
    if (mode == "explicit") {
      c.tuning.explicit_values = true;
      c.tuning.j = t.at("J").get<Index>();
      c.tuning.h = t.at("h").get<double>();
    } else if (mode == "rule") {
      c.tuning.tau = t.value("tau", 1.0);
      c.tuning.rule.c_h = t.value("c_h", 1.0);
      c.tuning.rule.c_j = t.value("c_j", 1.0);
      if (t.contains("h_log_exponent") && !t.at("h_log_exponent").is_null())
        c.tuning.rule.h_log_exponent = t.at("h_log_exponent").get<double>();
      if (t.contains("j_log_exponent") && !t.at("j_log_exponent").is_null())
        c.tuning.rule.j_log_exponent = t.at("j_log_exponent").get<double>();
    } else {
      throw Error("unknown tuning mode '" + mode + "'");
    }
  }
  if (j.contains("prior")) {
    const auto& p = j.at("prior");
    if (p.contains("psi")) c.prior.psi = p.at("psi").get<PsiSpec>();
    if (p.contains("j_prior")) c.prior.j_prior = p.at("j_prior").get<JPrior>();
    if (p.contains("h_grid")) {
      const auto& g = p.at("h_grid");
      c.prior.m_n = g.value("m_n", c.prior.m_n);
      c.prior.h_max = g.value("h_max", c.prior.h_max);
      c.prior.lambda_h = g.value("lambda", c.prior.lambda_h);
      c.prior.a = g.value("a", c.prior.a);
    }
    c.prior.j_cap_factor = p.value("j_cap_factor", c.prior.j_cap_factor);
    c.prior.draws = p.value("draws", c.prior.draws);
  }
  c.replicates = j.value("replicates", c.replicates);
  c.seed = j.value("seed", c.seed);
  c.jobs = j.value("jobs", c.jobs);
  c.output = j.value("output", c.output);
  c.eigen = parse_eigen(j.value("eigen", json()));
  c.rate_bounds = {{"pcr-le", {-0.55, -0.25}}, {"prior1", {-0.55, -0.25}}, {"prior2", {-0.55, -0.20}}};
  if (j.contains("rate_bounds")) {
    for (const auto& [name, b] : j.at("rate_bounds").items()) c.rate_bounds[name] = {b.at(0), b.at(1)};
  }
  c.diagnostics = j.value("diagnostics", json::object());
  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["manifold"] = c.manifold;
  j["truth"] = c.truth;
  j["beta"] = c.beta;
  j["sigma"] = c.sigma;
  j["n_grid"] = c.n_grid;
  j["N_rule"] = c.n_exponent == 1.0 ? json{{"kind", "equal"}} : json{{"kind", "power"}, {"exponent", c.n_exponent}};
  j["estimators"] = c.estimators;
  if (c.tuning.explicit_values) {
    j["tuning"] = {{"mode", "explicit"}, {"J", c.tuning.j}, {"h", c.tuning.h}};
  } else {
    j["tuning"] = {{"mode", "rule"}, {"tau", c.tuning.tau}, {"c_h", c.tuning.rule.c_h}, {"c_j", c.tuning.rule.c_j}};
    j["tuning"]["h_log_exponent"] = c.tuning.rule.h_log_exponent ? json(*c.tuning.rule.h_log_exponent) : json();
    j["tuning"]["j_log_exponent"] = c.tuning.rule.j_log_exponent ? json(*c.tuning.rule.j_log_exponent) : json();
  }
  j["prior"] = {{"psi", c.prior.psi},
                {"j_prior", c.prior.j_prior},
                {"h_grid", {{"m_n", c.prior.m_n}, {"h_max", c.prior.h_max}, {"lambda", c.prior.lambda_h}, {"a", c.prior.a}}},
                {"j_cap_factor", c.prior.j_cap_factor},
                {"draws", c.prior.draws}};
  j["replicates"] = c.replicates;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["output"] = c.output;
  j["eigen"] = eigen_to_json(c.eigen);
  for (const auto& [name, b] : c.rate_bounds) j["rate_bounds"][name] = {b.first, b.second};
  j["diagnostics"] = c.diagnostics;
  return j;
}

json apply_overrides(json base, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    require(eq != std::string::npos && eq > 0, "override '" + o + "' must look like /json/pointer=value");
    std::string pointer = o.substr(0, eq);
    if (pointer.front() != '/') pointer = "/" + pointer;
    const std::string text = o.substr(eq + 1);
    json value;
    try {
      value = json::parse(text);
    } catch (const json::parse_error&) {
      value = text;
    }
    base[json::json_pointer(pointer)] = value;
  }
  return base;
}

json load_json(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- ledger

bool LedgerRow::complete() const { return std::isfinite(loss_n) && std::isfinite(loss_big_n); }

std::string format_ledger_row(const LedgerRow& r) {
  std::ostringstream os;
  os << r.n << ',' << r.big_n << ',' << r.j << ',' << num(r.h) << ',' << num(r.beta) << ',' << r.replicate << ','
     << num(r.loss_n) << ',' << num(r.loss_big_n) << ',' << r.estimator;
  return os.str();
}

std::vector<LedgerRow> read_ledger(const fs::path& path) {
  std::vector<LedgerRow> rows;
  if (!fs::exists(path)) return rows;
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  require(line == kLedgerHeader, path.string() + ": unexpected ledger header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 9) continue;  // torn final line after a crash
    try {
      rows.push_back({std::stoll(f[0]), std::stoll(f[1]), std::stoll(f[2]), parse_num(f[3]), parse_num(f[4]),
                      std::stoll(f[5]), parse_num(f[6]), parse_num(f[7]), f[8]});
    } catch (const std::exception&) {
      continue;
    }
  }
  return rows;
}

void write_ledger(const fs::path& path, std::vector<LedgerRow> rows) {
  // last row per key wins, complete rows beat failures
  std::map<std::tuple<std::string, Index, Index>, LedgerRow> keep;
  for (auto& r : rows) {
    const auto key = std::make_tuple(r.estimator, r.n, r.replicate);
    auto it = keep.find(key);
    if (it == keep.end() || r.complete() || !it->second.complete()) keep[key] = r;
  }
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), "cannot open " + path.string());
  out << kLedgerHeader << '\n';
  for (const auto& [k, r] : keep) out << format_ledger_row(r) << '\n';
}

RateReport rate_from_ledger(const std::vector<LedgerRow>& rows, const std::string& estimator, double beta, int d,
                            std::pair<double, double> bounds, std::size_t min_replicates) {
  std::map<Index, std::vector<double>> by_n;
  for (const auto& r : rows)
    if (r.estimator == estimator && r.complete()) by_n[r.n].push_back(r.loss_n);
  std::vector<double> ns;
  std::vector<std::vector<double>> losses;
  for (const auto& [n, l] : by_n) {
    ns.push_back(static_cast<double>(n));
    losses.push_back(l);
  }
  RateReport report = empirical_rate(ns, losses, min_replicates);
  report.estimator = estimator;
  report.target = -beta / (2.0 * beta + d);
  report.lower = bounds.first;
  report.upper = bounds.second;
  report.pass = report.slope >= bounds.first && report.slope <= bounds.second;
  return report;
}

bool ExperimentResult::all_pass() const {
  return failures == 0 && std::all_of(rates.begin(), rates.end(), [](const RateReport& r) { return r.pass; });
}

// ---------------------------------------------------------------- sweep

ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log) {
  config.validate();
  require(!config.estimators.empty(), "run_experiment: no estimator selected");
  const fs::path dir(config.output);
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "config.json");
    cfg << config_to_json(config).dump(2) << '\n';
  }
  ExperimentResult result;
  result.ledger = dir / "ledger.csv";
  result.summary = dir / "posterior_summary.csv";
  const fs::path marginal_path = dir / "posterior_j_marginal.csv";

  std::set<std::string> done;
  std::vector<LedgerRow> previous = read_ledger(result.ledger);
  for (const auto& r : previous)
    if (r.complete()) done.insert(key_of(r.n, r.replicate, r.estimator));
  write_ledger(result.ledger, previous);

  struct Task {
    Index n;
    Index replicate;
    std::vector<std::string> todo;
  };
  std::vector<Task> tasks;
  for (Index n : config.n_grid) {
    for (Index rep = 0; rep < config.replicates; ++rep) {
      Task t{n, rep, {}};
      for (const auto& e : config.estimators)
        if (!done.count(key_of(n, rep, e))) t.todo.push_back(e);
      if (!t.todo.empty()) tasks.push_back(std::move(t));
    }
  }
  // large n first so the slowest cells start early
  std::stable_sort(tasks.begin(), tasks.end(), [](const Task& a, const Task& b) { return a.n > b.n; });

  std::mutex writer;
  std::ofstream ledger(result.ledger, std::ios::app);
  const bool new_summary = !fs::exists(result.summary);
  std::ofstream summary(result.summary, std::ios::app);
  if (new_summary) summary << kSummaryHeader << '\n';
  const bool new_marginal = !fs::exists(marginal_path);
  std::ofstream marginal(marginal_path, std::ios::app);
  if (new_marginal) marginal << kMarginalHeader << '\n';

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> failures{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& t = tasks[i];
      const auto start = std::chrono::steady_clock::now();
      CellOutput out;
      std::string error;
      try {
        out = run_cell(config, t.n, t.replicate, t.todo);
      } catch (const std::exception& e) {
        error = e.what();
        out = {};
        for (const auto& est : t.todo)
          out.rows.push_back({t.n, config.big_n_for(t.n), 0, kNaN, config.beta, t.replicate, kNaN, kNaN, est});
        failures += t.todo.size();
      }
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::lock_guard lock(writer);
      for (const auto& r : out.rows) ledger << format_ledger_row(r) << '\n';
      for (const auto& s : out.summaries) summary << s << '\n';
      for (const auto& m : out.marginals) marginal << m << '\n';
      ledger.flush();
      summary.flush();
      marginal.flush();
      if (log) {
        *log << "cell n=" << t.n << " rep=" << t.replicate << " " << std::fixed << std::setprecision(2) << secs << "s";
        if (!error.empty()) *log << " FAILED: " << error;
        *log << std::defaultfloat << '\n';
      }
    }
  };
  const int workers = std::min<int>(worker_count(config.jobs), static_cast<int>(std::max<std::size_t>(1, tasks.size())));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  ledger.close();
  summary.close();
  marginal.close();

  write_ledger(result.ledger, read_ledger(result.ledger));
  rewrite_sorted(result.summary, kSummaryHeader, 4);
  rewrite_sorted(marginal_path, kMarginalHeader, 3);
  result.failures = failures;

  const std::vector<LedgerRow> rows = read_ledger(result.ledger);
  json rates = json::array();
  for (const auto& e : config.estimators) {
    const auto bounds = config.rate_bounds.count(e) ? config.rate_bounds.at(e) : std::make_pair(-1e300, 1e300);
    try {
      RateReport r = rate_from_ledger(rows, e, config.beta, config.manifold.intrinsic_dim(), bounds,
                                      std::min<std::size_t>(10, static_cast<std::size_t>(config.replicates)));
      r.ledger = result.ledger.filename().string();
      result.rates.push_back(r);
      rates.push_back(r);
    } catch (const Error& err) {
      RateReport r;
      r.estimator = e;
      r.slope = kNaN;
      r.target = -config.beta / (2.0 * config.beta + config.manifold.intrinsic_dim());
      r.lower = bounds.first;
      r.upper = bounds.second;
      r.pass = false;
      result.rates.push_back(r);
      rates.push_back({{"estimator", e}, {"error", err.what()}, {"pass", false}});
    }
  }
  std::ofstream rj(dir / "rates.json");
  rj << std::setprecision(17) << rates.dump(2) << '\n';
  return result;
}

// ---------------------------------------------------------------- diagnostics

DiagnosticsReport run_diagnostics(const json& checks, std::uint64_t seed, std::ostream* log) {
  DiagnosticsReport report;
  if (checks.is_null()) return report;
  require(checks.is_array(), "diagnostics: 'checks' must be an array");
  std::uint64_t index = 0;
  for (const auto& entry : checks) {
    ++index;
    const auto kind = entry.at("kind").get<std::string>();
    const auto start = std::chrono::steady_clock::now();
    ManifoldSpec spec = entry.at("manifold").get<ManifoldSpec>();
    if (!entry.at("manifold").contains("seed")) spec.seed = split_seed(seed, index);
    const int d = spec.intrinsic_dim();
    const json opts = entry.value("options", json::object());
    const DecomposeOptions eigen = parse_eigen(entry.value("eigen", json()));
    CheckResult c;

    if (kind == "weyl") {
      WeylOptions o;
      o.lo_min = opts.value("lo_min", o.lo_min);
      o.lo_scale = opts.value("lo_scale", o.lo_scale);
      o.hi_scale = opts.value("hi_scale", o.hi_scale);
      o.tolerance = opts.value("tolerance", o.tolerance);
      const Index big_n = entry.at("N").get<Index>();
      const double h = entry.at("h").get<double>();
      const IndexWindow w = weyl_window(big_n, h, d, o);
      const Index j_max = std::clamp<Index>(w.hi, 1, big_n);
      const PointCloud cloud = sample_cloud(spec, big_n);
      const LaplacianOperator op(build_graph(cloud.points, h));
      c = check_weyl(decompose(op, j_max, eigen), d, o);
      c.metadata["connected"] = op.graph().connected();
    } else if (kind == "heat_bounds") {
      HeatBoundOptions o;
      o.a0 = opts.value("a0", o.a0);
      o.t_max = opts.value("t_max", o.t_max);
      o.grid_points = opts.value("grid_points", o.grid_points);
      o.slope_tolerance = opts.value("slope_tolerance", o.slope_tolerance);
      o.band = opts.value("band", o.band);
      const Index big_n = entry.at("N").get<Index>();
      const PointCloud cloud = sample_cloud(spec, big_n);
      const LaplacianOperator op(build_graph(cloud.points, entry.at("h").get<double>()));
      const Index j_max = std::min<Index>(entry.value("j_max", big_n), big_n);
      c = check_heat_bounds(decompose(op, j_max, eigen), d, o);
    } else if (kind == "concentration") {
      const TruthFamily truth = entry.at("truth").get<TruthFamily>();
      const double h = entry.at("h").get<double>();
      ConcentrationOptions o;
      o.m_mc = entry.value("m_mc", o.m_mc);
      const Index reps = entry.value("replicates", Index{1});
      std::vector<CheckResult> entries;
      for (Index big_n : entry.at("N_grid").get<std::vector<Index>>()) {
        for (Index r = 0; r < reps; ++r) {
          ManifoldSpec s = spec;
          s.seed = split_seed(spec.seed, {static_cast<std::uint64_t>(big_n), static_cast<std::uint64_t>(r)});
          o.seed = split_seed(s.seed, 99);
          entries.push_back(check_concentration(sample_cloud(s, big_n, truth), h, truth, o));
        }
      }
      c = concentration_trend(entries, entry.value("tolerance", 0.3));
      json raw = json::array();
      for (const auto& e : entries) raw.push_back({{"N", e.metadata["N"]}, {"deviation", e.statistic}, {"ratio", e.metadata["ratio"]}});
      c.metadata["entries"] = raw;
    } else if (kind == "approximation") {
      const TruthFamily truth = entry.at("truth").get<TruthFamily>();
      const Index big_n = entry.at("N").get<Index>();
      const PointCloud cloud = sample_cloud(spec, big_n, truth);
      const LaplacianOperator op(build_graph(cloud.points, entry.at("h").get<double>()));
      const Index j_max = std::min<Index>(entry.value("j_max", big_n), big_n);
      const SpectralBasis basis = decompose(op, j_max, eigen);
      ApproximationOptions o;
      o.c = entry.value("c", o.c);
      o.band = entry.value("band", o.band);
      const double beta = entry.value("beta", truth.smoothness() < 1e300 ? truth.smoothness() : 2.0);
      c = check_approximation(op, basis, *cloud.true_values, beta, d, entry.at("j_grid").get<std::vector<Index>>(), o);
      if (j_max == big_n) {
        const double zero = approximation_error(op, basis, *cloud.true_values, beta, big_n, 0.0);
        const double tol = entry.value("zero_tolerance", 1e-8);
        c.metadata["zero_case_error"] = zero;
        c.metadata["zero_tolerance"] = tol;
        c.pass = c.pass && zero <= tol;
      }
    } else if (kind == "norm_comparison") {
      const Index big_n = entry.at("N").get<Index>();
      const auto grid = entry.at("j_grid").get<std::vector<Index>>();
      const PointCloud cloud = sample_cloud(spec, big_n);
      const LaplacianOperator op(build_graph(cloud.points, entry.at("h").get<double>()));
      NormComparisonOptions o;
      o.trials = entry.value("trials", o.trials);
      o.max_slope = entry.value("max_slope", o.max_slope);
      o.seed = split_seed(seed, {index, 5});
      c = check_norm_comparison(decompose(op, *std::max_element(grid.begin(), grid.end()), eigen), d, grid, o);
    } else if (kind == "volume_regularity") {
      VolumeOptions o;
      o.r_min_scale = opts.value("r_min_scale", o.r_min_scale);
      o.diameter = opts.value("diameter", o.diameter);
      o.max_ratio = opts.value("max_ratio", o.max_ratio);
      c = check_volume_regularity(sample_cloud(spec, entry.at("N").get<Index>()).points, d, o);
    } else {
      throw Error("unknown diagnostic kind '" + kind + "'");
    }
    if (entry.contains("name")) c.name = entry.at("name").get<std::string>();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.metadata["runtime_seconds"] = secs;
    c.metadata["manifold"] = spec;
    if (log) *log << "diagnostic " << c.name << " done in " << std::fixed << std::setprecision(2) << secs << "s\n"
                  << std::defaultfloat;
    report.checks.push_back(std::move(c));
  }
  return report;
}

// ---------------------------------------------------------------- plots

void emit_plots(const fs::path& ledger, const fs::path& out_dir, const fs::path& spectrum_csv,
                const fs::path& marginal_csv) {
  fs::create_directories(out_dir);
  const auto rows = read_ledger(ledger);
  require(!rows.empty() || fs::exists(ledger), "emit_plots: ledger " + ledger.string() + " not found");
  std::map<std::pair<std::string, Index>, std::vector<double>> groups;
  for (const auto& r : rows)
    if (r.complete()) groups[{r.estimator, r.n}].push_back(r.loss_n);
  {
    std::ofstream out(out_dir / "rate_plot.csv");
    out << "log_n,log_loss,series\n" << std::setprecision(17);
    for (const auto& [key, losses] : groups) {
      double mean = 0.0;
      for (double l : losses) mean += l;
      mean /= static_cast<double>(losses.size());
      out << std::log(static_cast<double>(key.second)) << ',' << std::log(mean) << ',' << key.first << '\n';
    }
  }
  if (!spectrum_csv.empty() && fs::exists(spectrum_csv)) {
    std::ifstream in(spectrum_csv);
    std::ofstream out(out_dir / "spectrum_plot.csv");
    out << "log_j,log_lambda,series\n" << std::setprecision(17);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto f = split_csv(line);
      if (f.size() < 2) continue;
      const double j = std::stod(f[0]), lambda = std::stod(f[1]);
      if (lambda > 0.0) out << std::log(j) << ',' << std::log(lambda) << ",spectrum\n";
    }
  }
  if (!marginal_csv.empty() && fs::exists(marginal_csv)) {
    std::ifstream in(marginal_csv);
    std::string line;
    std::getline(in, line);
    std::map<std::tuple<std::string, Index, Index>, double> sums;
    std::map<std::pair<std::string, Index>, std::set<Index>> reps;
    while (std::getline(in, line)) {
      const auto f = split_csv(line);
      if (f.size() < 5) continue;
      const Index n = std::stoll(f[0]), rep = std::stoll(f[1]), j = std::stoll(f[3]);
      sums[{f[2], n, j}] += std::stod(f[4]);
      reps[{f[2], n}].insert(rep);
    }
    std::ofstream out(out_dir / "posterior_weights.csv");
    out << "J,weight,series\n" << std::setprecision(17);
    for (const auto& [key, s] : sums) {
      const auto& [est, n, j] = key;
      out << j << ',' << s / static_cast<double>(reps[{est, n}].size()) << ',' << est << " n=" << n << '\n';
    }
  }
}

}  // namespace lapreg
