#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "lapreg/harness.hpp"

using namespace lapreg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lapreg_test_" + name);
  fs::remove_all(p);
  return p;
}

json small_config(const fs::path& out) {
  json j = default_config_json();
  j["n_grid"] = {60, 90, 130, 200};
  j["replicates"] = 2;
  j["jobs"] = 2;
  j["output"] = out.string();
  return j;
}

}  // namespace

TEST_CASE("default config parses and round-trips") {
  const ExperimentConfig c = parse_config(default_config_json());
  CHECK(c.manifold.kind == ManifoldKind::circle);
  CHECK(c.manifold.ambient_dim == 3);
  CHECK(c.n_grid == std::vector<Index>{100, 200, 400, 800, 1600});
  CHECK(c.replicates == 20);
  CHECK(c.sigma == doctest::Approx(0.1));
  const ExperimentConfig back = parse_config(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
}

TEST_CASE("overrides") {
  json j = apply_overrides(default_config_json(), {"/sigma=0.25", "replicates=3", "/manifold/kind=sphere2",
                                                   "/estimators=[\"prior2\"]"});
  const ExperimentConfig c = parse_config(j);
  CHECK(c.sigma == doctest::Approx(0.25));
  CHECK(c.replicates == 3);
  CHECK(c.manifold.kind == ManifoldKind::sphere2);
  CHECK(c.estimators == std::vector<std::string>{"prior2"});
  CHECK_THROWS_AS(apply_overrides(default_config_json(), {"no-equals-sign"}), Error);
}

TEST_CASE("invalid configs are rejected") {
  json j = default_config_json();
  j["n_grid"] = {100, 100, 200};
  CHECK_THROWS_AS(parse_config(j), Error);
  j = default_config_json();
  j["N_rule"] = {{"kind", "power"}, {"exponent", 0.5}};
  CHECK_THROWS_AS(parse_config(j), Error);
  j = default_config_json();
  j["estimators"] = {"ridge"};
  CHECK_THROWS_AS(parse_config(j), Error);
}

TEST_CASE("N rule") {
  json j = default_config_json();
  j["N_rule"] = {{"kind", "power"}, {"exponent", 1.2}};
  const ExperimentConfig c = parse_config(j);
  CHECK(c.big_n_for(100) == 252);  // 100^1.2 = 251.19
  CHECK(c.j_cap_for(1000) == 40);
}

TEST_CASE("ledger formatting and reading") {
  const fs::path dir = scratch("ledger");
  fs::create_directories(dir);
  std::vector<LedgerRow> rows = {{200, 200, 7, 0.3, 2.0, 1, 0.05, 0.05, "pcr-le"},
                                 {100, 100, 5, 0.4, 2.0, 0, std::nan(""), std::nan(""), "pcr-le"},
                                 {100, 100, 5, 0.4, 2.0, 0, 0.07, 0.07, "pcr-le"}};
  write_ledger(dir / "l.csv", rows);
  const auto back = read_ledger(dir / "l.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].n == 100);
  CHECK(back[0].complete());
  CHECK(slurp(dir / "l.csv").rfind(std::string(kLedgerHeader) + "\n", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("experiment is deterministic, resumable and plot data matches") {
  const fs::path a = scratch("run_a"), b = scratch("run_b");
  const ExperimentResult ra = run_experiment(parse_config(small_config(a)));
  const ExperimentResult rb = run_experiment(parse_config(small_config(b)));
  CHECK(ra.failures == 0);
  CHECK(slurp(ra.ledger) == slurp(rb.ledger));
  CHECK(read_ledger(ra.ledger).size() == 8);

  // drop half of the rows and resume
  auto rows = read_ledger(rb.ledger);
  rows.resize(3);
  write_ledger(rb.ledger, rows);
  const ExperimentResult resumed = run_experiment(parse_config(small_config(b)));
  CHECK(slurp(resumed.ledger) == slurp(ra.ledger));

  emit_plots(ra.ledger, a / "plots");
  std::ifstream in(a / "plots" / "rate_plot.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "log_n,log_loss,series");
  std::vector<double> x, y;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string f1, f2, f3;
    std::getline(ss, f1, ',');
    std::getline(ss, f2, ',');
    std::getline(ss, f3, ',');
    CHECK(f3 == "pcr-le");
    x.push_back(std::stod(f1));
    y.push_back(std::stod(f2));
  }
  CHECK(x.size() == 4);
  CHECK(std::abs(fit_line(x, y).slope - ra.rates.at(0).slope) < 1e-12);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("failed cells are recorded and the sweep continues") {
  const fs::path dir = scratch("fail");
  json j = small_config(dir);
  // an unreachable Krylov tolerance makes every cell throw
  j["eigen"] = {{"method", "krylov"}, {"tolerance", 1e-300}};
  const ExperimentResult r = run_experiment(parse_config(j));
  CHECK(r.failures == 8);
  CHECK_FALSE(r.all_pass());
  const auto rows = read_ledger(r.ledger);
  CHECK(rows.size() == 8);
  for (const auto& row : rows) CHECK_FALSE(row.complete());
  fs::remove_all(dir);
}

TEST_CASE("adaptive prior stays within 1.5x of the tuned fixed prior") {
  const fs::path dir = scratch("adapt");
  json j = default_config_json();
  j["n_grid"] = {100, 200, 400, 800};
  j["replicates"] = 3;
  j["estimators"] = {"prior1", "prior2"};
  j["output"] = dir.string();
  const ExperimentResult r = run_experiment(parse_config(j));
  REQUIRE(r.failures == 0);
  REQUIRE(r.rates.size() == 2);
  const RateReport& p1 = r.rates[0].estimator == "prior1" ? r.rates[0] : r.rates[1];
  const RateReport& p2 = r.rates[0].estimator == "prior2" ? r.rates[0] : r.rates[1];
  for (std::size_t i = 0; i < p1.mean_losses.size(); ++i) CHECK(p2.mean_losses[i] <= 1.5 * p1.mean_losses[i]);
  CHECK(fs::exists(dir / "posterior_summary.csv"));
  CHECK(fs::exists(dir / "posterior_j_marginal.csv"));
  CHECK(fs::exists(dir / "rates.json"));
  emit_plots(r.ledger, dir / "plots", {}, dir / "posterior_j_marginal.csv");
  std::ifstream in(dir / "plots" / "posterior_weights.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "J,weight,series");
  fs::remove_all(dir);
}

TEST_CASE("diagnostics dispatch") {
  CHECK(run_diagnostics(json::array(), 1).checks.empty());
  const json checks = json::parse(R"([
    {"kind": "volume_regularity", "name": "vol", "N": 500,
     "manifold": {"kind": "circle", "ambient_dim": 2, "density": "uniform", "density_params": [], "seed": 3}},
    {"kind": "weyl", "N": 300, "h": 0.9,
     "manifold": {"kind": "sphere2", "ambient_dim": 3, "density": "uniform", "density_params": [], "seed": 4}}
  ])");
  const DiagnosticsReport rep = run_diagnostics(checks, 7);
  REQUIRE(rep.checks.size() == 2);
  CHECK(rep.checks[0].name == "vol");
  CHECK_FALSE(rep.checks[1].applicable);
  const json round = json::parse(json(rep).dump());
  CHECK(round.get<DiagnosticsReport>().checks.size() == 2);
  CHECK_THROWS_AS(run_diagnostics(json::parse(R"([{"kind": "nope", "manifold": {"kind": "circle"}}])"), 1), std::exception);
}
