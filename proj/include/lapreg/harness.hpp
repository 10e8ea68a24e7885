#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "lapreg/bayes.hpp"
#include "lapreg/diagnostics.hpp"
#include "lapreg/estimators.hpp"
#include "lapreg/manifold.hpp"

namespace lapreg {

void to_json(nlohmann::json& j, const PsiSpec& psi);
void from_json(const nlohmann::json& j, PsiSpec& psi);
void to_json(nlohmann::json& j, const JPrior& prior);
void from_json(const nlohmann::json& j, JPrior& prior);
void to_json(nlohmann::json& j, const RateReport& r);

struct ExperimentConfig {
  ManifoldSpec manifold;
  TruthFamily truth = TruthFamily::trig(2);
  double beta = 2.0;  // smoothness used for tuning
  double sigma = 0.1;
  std::vector<Index> n_grid;
  double n_exponent = 1.0;  // N = ⌈n^b⌉
  std::vector<std::string> estimators;  // pcr-le | prior1 | prior2

  struct Tuning {
    bool explicit_values = false;
    Index j = 0;
    double h = 0.0;
    double tau = 1.0;
    TuningRule rule;
  } tuning;

  struct Prior {
    PsiSpec psi = PsiSpec::gaussian(1.0);
    JPrior j_prior = JPrior::geometric(0.1);
    double m_n = 1.0;
    double h_max = 1.0;
    double lambda_h = 1.0;
    double a = 1.0;
    double j_cap_factor = 4.0;  // J_cap = min(N, ⌊factor n^{d/(2+d)}⌋)
    Index draws = 200;
  } prior;

  Index replicates = 20;
  std::uint64_t seed = 20240601;
  int jobs = 0;  // 0: hardware concurrency
  std::string output = "out";
  DecomposeOptions eigen;
  std::map<std::string, std::pair<double, double>> rate_bounds;
  nlohmann::json diagnostics = nlohmann::json::object();

  Index big_n_for(Index n) const;
  Index j_cap_for(Index n) const;
  void validate() const;
};

/// The standard circle experiment.
nlohmann::json default_config_json();
ExperimentConfig parse_config(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);
/// Applies `/json/pointer=value` overrides; values parse as JSON, falling back to strings.
nlohmann::json apply_overrides(nlohmann::json base, const std::vector<std::string>& overrides);
nlohmann::json load_json(const std::filesystem::path& path);

struct LedgerRow {
  Index n = 0;
  Index big_n = 0;
  Index j = 0;
  double h = 0.0;
  double beta = 0.0;
  Index replicate = 0;
  double loss_n = 0.0;
  double loss_big_n = 0.0;
  std::string estimator;

  bool complete() const;
};

inline constexpr const char* kLedgerHeader = "n,N,J,h,beta,replicate,loss_n,loss_N,estimator";

std::vector<LedgerRow> read_ledger(const std::filesystem::path& path);
void write_ledger(const std::filesystem::path& path, std::vector<LedgerRow> rows);
std::string format_ledger_row(const LedgerRow& row);

/// Mean loss_n per (estimator, n) from completed rows, then the log-log slope.
RateReport rate_from_ledger(const std::vector<LedgerRow>& rows, const std::string& estimator, double beta, int d,
                            std::pair<double, double> bounds, std::size_t min_replicates);

struct ExperimentResult {
  std::vector<RateReport> rates;
  std::filesystem::path ledger;
  std::filesystem::path summary;
  std::size_t failures = 0;
  bool all_pass() const;
};

/// Sweeps (n, replicate) cells through a worker pool. Completed ledger rows are
/// skipped on rerun, failed cells are recorded with NaN losses and retried.
/// Writes ledger.csv, posterior_summary.csv, posterior_j_marginal.csv, rates.json.
ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

/// Runs each entry of `checks` (see the "checks" array of docs/experiment_config.schema.json); an empty list gives an empty report.
DiagnosticsReport run_diagnostics(const nlohmann::json& checks, std::uint64_t seed, std::ostream* log = nullptr);

/// rate_plot.csv (`log_n,log_loss,series`), plus spectrum_plot.csv and
/// posterior_weights.csv when the optional inputs exist.
void emit_plots(const std::filesystem::path& ledger, const std::filesystem::path& out_dir,
                const std::filesystem::path& spectrum_csv = {}, const std::filesystem::path& marginal_csv = {});

}  // namespace lapreg
