// lapreg: command-line front end for sampling, spectra, fits, posteriors and sweeps.

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "lapreg/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lapreg;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int jobs = -1;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "experiment config JSON (defaults to the standard circle experiment)");
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--jobs", c.jobs, "worker threads (0: all cores)");
  app->add_option("--set", c.overrides, "override a config key: /json/pointer=value")->take_all();
}

json config_json(const Common& c) {
  json j = c.config.empty() ? default_config_json() : load_json(c.config);
  j = apply_overrides(j, c.overrides);
  if (c.seed) j["seed"] = *c.seed;
  if (!c.out.empty()) j["output"] = c.out;
  if (c.jobs >= 0) j["jobs"] = c.jobs;
  return j;
}

ExperimentConfig load_config(const Common& c) {
  json j = config_json(c);
  if (c.seed) j["manifold"]["seed"] = *c.seed;
  return parse_config(j);
}

fs::path out_dir(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.output);
  return cfg.output;
}

PointCloud cloud_for(const ExperimentConfig& cfg, Index n, const std::string& cloud_prefix) {
  if (!cloud_prefix.empty()) return read_cloud(cloud_prefix + ".csv", cloud_prefix + ".json");
  return sample_cloud(cfg.manifold, cfg.big_n_for(n), cfg.truth);
}

void write_vector(const fs::path& path, const std::string& header, const Vector& v) {
  std::ofstream out(path);
  out << header << '\n' << std::setprecision(17);
  for (Index i = 0; i < v.size(); ++i) out << v(i) << '\n';
}

Tuning tuning_for(const ExperimentConfig& cfg, Index n, std::optional<Index> j, std::optional<double> h) {
  Tuning t;
  if (cfg.tuning.explicit_values) {
    t = {cfg.tuning.j, cfg.tuning.h};
  } else {
    t = tune_jh(static_cast<double>(n), static_cast<double>(cfg.big_n_for(n)), cfg.manifold.intrinsic_dim(), cfg.beta,
                cfg.tuning.tau, cfg.tuning.rule);
  }
  if (j) t.j = *j;
  if (h) t.h = *h;
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-Laplacian spectral regression on point clouds"};
  app.require_subcommand(1);

  Common common;
  Index n = 400;
  std::optional<Index> j_opt;
  std::optional<double> h_opt;
  std::string cloud_prefix;

  auto* sample = app.add_subcommand("sample", "sample a point cloud with its truth values");
  add_common(sample, common);
  sample->add_option("-n,--points", n, "number of points");

  auto* graph = app.add_subcommand("graph", "build the radius graph of a cloud");
  add_common(graph, common);
  graph->add_option("-n,--points", n, "number of points (when sampling)");
  graph->add_option("--cloud", cloud_prefix, "read <prefix>.csv and <prefix>.json instead of sampling");
  graph->add_option("--radius", h_opt, "radius")->required();

  auto* spectrum = app.add_subcommand("spectrum", "leading eigenpairs of the scaled Laplacian");
  add_common(spectrum, common);
  spectrum->add_option("-n,--points", n, "number of points (when sampling)");
  spectrum->add_option("--cloud", cloud_prefix, "read <prefix>.csv and <prefix>.json instead of sampling");
  spectrum->add_option("--radius", h_opt, "radius")->required();
  spectrum->add_option("--j-max", j_opt, "number of eigenpairs")->required();

  std::string estimator = "pcr-le";
  auto* fit = app.add_subcommand("fit", "fit one estimator on one synthetic dataset");
  add_common(fit, common);
  fit->add_option("-n,--labeled", n, "labeled sample size");
  fit->add_option("--J", j_opt, "truncation level (default: tuning rule)");
  fit->add_option("--radius", h_opt, "radius (default: tuning rule)");
  fit->add_option("--estimator", estimator, "pcr-le | prior1 | prior2")
      ->check(CLI::IsMember({"pcr-le", "prior1", "prior2"}));

  std::string sampler = "gaussian";
  std::string prior_kind = "prior2";
  auto* posterior = app.add_subcommand("posterior", "posterior over (J, h, z) on one synthetic dataset");
  add_common(posterior, common);
  posterior->add_option("-n,--labeled", n, "labeled sample size");
  posterior->add_option("--prior", prior_kind, "prior1 | prior2")->check(CLI::IsMember({"prior1", "prior2"}));
  posterior->add_option("--sampler", sampler, "gaussian (exact mixture) | mh")
      ->check(CLI::IsMember({"gaussian", "mh"}));

  std::string checks_path;
  auto* diagnose = app.add_subcommand("diagnose", "run the diagnostics checks listed in the config");
  add_common(diagnose, common);
  diagnose->add_option("--checks", checks_path, "JSON file with {\"checks\": [...]} (overrides the config)");

  auto* rates = app.add_subcommand("rates", "run the replicate sweep and fit rate slopes");
  add_common(rates, common);

  std::string ledger_path, spectrum_csv, marginal_csv;
  auto* plots = app.add_subcommand("plots", "emit tidy plot data from a ledger");
  add_common(plots, common);
  plots->add_option("--ledger", ledger_path, "ledger CSV")->required();
  plots->add_option("--spectrum", spectrum_csv, "spectrum CSV (j,lambda_j)");
  plots->add_option("--marginal", marginal_csv, "posterior_j_marginal.csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sample) {
      const ExperimentConfig cfg = load_config(common);
      const fs::path dir = out_dir(cfg);
      const PointCloud cloud = sample_cloud(cfg.manifold, n, cfg.truth);
      write_cloud(cloud, dir / "cloud.csv", dir / "cloud.json");
      std::cout << "wrote " << (dir / "cloud.csv").string() << " (" << cloud.size() << " points)\n";
      return 0;
    }
    if (*graph) {
      const ExperimentConfig cfg = load_config(common);
      const fs::path dir = out_dir(cfg);
      const PointCloud cloud = cloud_for(cfg, n, cloud_prefix);
      const RadiusGraph g = build_graph(cloud.points, *h_opt);
      write_graph(g, dir / "edges.txt", dir / "graph.json");
      std::cout << "N=" << cloud.size() << " h=" << *h_opt << " connected=" << (g.connected() ? "yes" : "no") << '\n';
      return 0;
    }
    if (*spectrum) {
      const ExperimentConfig cfg = load_config(common);
      const fs::path dir = out_dir(cfg);
      const PointCloud cloud = cloud_for(cfg, n, cloud_prefix);
      const LaplacianOperator op(build_graph(cloud.points, *h_opt));
      const SpectralBasis basis = decompose(op, std::min(*j_opt, cloud.size()), cfg.eigen);
      write_spectrum(basis, dir / "spectrum.csv", dir / "eigenvectors.csv", dir / "spectrum.json");
      std::cout << "J=" << basis.j_max() << " max residual=" << basis.residuals.maxCoeff() << '\n';
      return 0;
    }
    if (*fit || *posterior) {
      const ExperimentConfig cfg = load_config(common);
      const fs::path dir = out_dir(cfg);
      const PointCloud cloud = sample_cloud(cfg.manifold, cfg.big_n_for(n), cfg.truth);
      const RegressionDataset data = make_synthetic_dataset(cloud, n, cfg.sigma, split_seed(cfg.seed, 2));
      const Tuning t = tuning_for(cfg, n, j_opt, h_opt);
      const std::string which = *fit ? estimator : prior_kind;

      if (which == "pcr-le") {
        const BasisProvider provider(cloud.points, t.j, cfg.eigen);
        const FitReport r = pcr_le(data, *provider.get(t.h), t.j);
        write_vector(dir / "estimate.csv", "f_hat", r.estimate);
        const json summary = {{"estimator", "pcr-le"}, {"n", n}, {"N", data.big_n()}, {"J", r.j}, {"h", r.h},
                              {"loss_n", r.loss_n}, {"loss_N", r.loss_big_n}, {"runtime_seconds", r.runtime_seconds}};
        std::ofstream(dir / "fit.json") << summary.dump(2) << '\n';
        std::cout << summary.dump(2) << '\n';
        return 0;
      }

      PriorSpec prior;
      prior.psi = cfg.prior.psi;
      prior.sigma = cfg.sigma;
      if (which == "prior1") {
        prior.j_prior = JPrior::fixed(t.j);
        prior.h_prior = HPrior::fixed(t.h);
        prior.j_cap = t.j;
      } else {
        const auto [h_star, levels] = default_dyadic_grid(n, cfg.manifold.ambient_dim, cfg.prior.m_n, cfg.prior.h_max);
        prior.j_prior = cfg.prior.j_prior;
        prior.h_prior = HPrior::dyadic_grid(h_star, levels, cfg.prior.lambda_h, cfg.prior.a);
        prior.j_cap = cfg.j_cap_for(n);
      }
      const BasisProvider provider(cloud.points, prior.j_cap, cfg.eigen);
      PosteriorResult post;
      if (sampler == "mh" && *posterior) {
        MhOptions o;
        o.seed = split_seed(cfg.seed, 4);
        post = posterior_mh(data, prior, provider, o);
      } else {
        GaussianPosteriorOptions o;
        o.draws = cfg.prior.draws;
        o.seed = split_seed(cfg.seed, 4);
        post = posterior_gaussian(data, prior, provider, o);
      }
      FitReport r;
      r.estimate = post.posterior_mean;
      attach_losses(r, data);
      write_vector(dir / "posterior_mean.csv", "f_mean", post.posterior_mean);

      json summary = {{"estimator", which}, {"sampler", *fit ? "gaussian" : sampler}, {"n", n}, {"N", data.big_n()},
                      {"loss_n", r.loss_n}, {"loss_N", r.loss_big_n}, {"modal_J", post.modal_j()},
                      {"acceptance_z", post.acceptance_z}, {"acceptance_model", post.acceptance_model},
                      {"warnings", post.warnings}};
      json weights = json::array();
      for (const auto& m : post.models)
        weights.push_back({{"J", m.j}, {"h", m.h}, {"log_prior", m.log_prior}, {"log_evidence", m.log_evidence},
                           {"weight", m.weight}});
      summary["weights"] = weights;
      json marginal = json::object();
      for (const auto& [j, w] : post.j_marginal()) marginal[std::to_string(j)] = w;
      summary["j_marginal"] = marginal;
      if (post.draw_values.cols() >= 50) {
        for (double alpha : {0.5, 0.9, 0.95}) {
          const CredibleRadius cr = credible_radius(post, data, alpha);
          std::ostringstream key;
          key << alpha;
          summary["credible_radius"][key.str()] = {{"n", cr.radius_n}, {"N", cr.radius_big_n}};
        }
      }
      std::ofstream(dir / "posterior_summary.json") << summary.dump(2) << '\n';
      std::cout << "loss_n=" << r.loss_n << " modal J=" << post.modal_j() << " (" << dir.string()
                << "/posterior_summary.json)\n";
      return 0;
    }
    if (*diagnose) {
      const json j = config_json(common);
      json checks = checks_path.empty() ? j.value("diagnostics", json::object()) : load_json(checks_path);
      const fs::path dir = j.value("output", std::string("out"));
      fs::create_directories(dir);
      const DiagnosticsReport report =
          run_diagnostics(checks.value("checks", json::array()), j.value("seed", std::uint64_t{20240601}), &std::cerr);
      std::ofstream(dir / "diagnostics.json") << json(report).dump(2) << '\n';
      std::cout << report.table();
      return report.all_pass() ? 0 : 1;
    }
    if (*rates) {
      const ExperimentConfig cfg = load_config(common);
      const ExperimentResult result = run_experiment(cfg, &std::cerr);
      for (const auto& r : result.rates) {
        std::cout << std::left << std::setw(8) << r.estimator << " slope " << std::setprecision(4) << r.slope
                  << " ± " << r.slope_se << "  target " << r.target << "  band [" << r.lower << ", " << r.upper
                  << "]  " << (r.pass ? "PASS" : "FAIL") << '\n';
      }
      if (result.failures) std::cout << result.failures << " failed cells (see ledger)\n";
      return result.all_pass() ? 0 : 1;
    }
    if (*plots) {
      const fs::path dir = common.out.empty() ? fs::path(ledger_path).parent_path() / "plots" : fs::path(common.out);
      emit_plots(ledger_path, dir, spectrum_csv, marginal_csv);
      std::cout << "wrote plot data to " << dir.string() << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
