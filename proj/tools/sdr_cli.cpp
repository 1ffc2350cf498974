// Benchmark driver for the strategic doubly robust estimator.
//
// Subcommands:
//   generate     emit one synthetic dataset (observed CSV + oracle JSON)
//   estimate     run one method on one dataset file, print a report as JSON
//   sweep        replication sweep over a scenario grid, emit metrics rows
//   sensitivity  confounding-strength bounds over a gamma grid
//   selftest     fast built-in property suites
//
// All state flows through flags and config files; no environment variables.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sdr/sdr.hpp"

namespace {

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& csv,
                                  const std::string& flag) {
  std::vector<double> out;
  for (const auto& s : split_list(csv)) {
    try {
      out.push_back(std::stod(s));
    } catch (const std::exception&) {
      throw CLI::ValidationError(flag, "not a number: " + s);
    }
  }
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& csv,
                                     const std::string& flag) {
  std::vector<std::size_t> out;
  for (const auto& s : split_list(csv)) {
    try {
      out.push_back(static_cast<std::size_t>(std::stoull(s)));
    } catch (const std::exception&) {
      throw CLI::ValidationError(flag, "not an integer: " + s);
    }
  }
  return out;
}

// Shared flag set for sweep-like subcommands; flags override config values.
struct ScenarioFlags {
  std::string config_path;
  std::string alpha_grid, n_grid, d_grid, methods, spec_cells, gamma_grid;
  int replications = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path,
                    "scenario config as JSON (flags override)");
    cmd->add_option("--alpha-grid", alpha_grid, "comma list of alphas");
    cmd->add_option("--n-grid", n_grid, "comma list of sample sizes");
    cmd->add_option("--d-grid", d_grid, "comma list of dimensions");
    cmd->add_option("--replications", replications, "replications per cell");
    cmd->add_option("--methods", methods, "comma list of method names");
    cmd->add_option("--spec-cells", spec_cells,
                    "comma list of specification scenarios");
    cmd->add_option("--gamma-grid", gamma_grid,
                    "comma list of confounding strengths (>= 1)");
    cmd->add_option("--seed", seed, "master seed")
        ->each([this](const std::string&) { seed_set = true; });
  }

  sdr::ScenarioConfig resolve() const {
    sdr::ScenarioConfig cfg;
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      if (!is)
        throw std::runtime_error(config_path + ": cannot open config file");
      nlohmann::json j;
      is >> j;
      cfg = sdr::scenario_from_json(j);
    }
    if (!alpha_grid.empty())
      cfg.alpha_grid = parse_doubles(alpha_grid, "--alpha-grid");
    if (!n_grid.empty()) cfg.n_grid = parse_sizes(n_grid, "--n-grid");
    if (!d_grid.empty()) cfg.d_grid = parse_sizes(d_grid, "--d-grid");
    if (replications >= 0) cfg.replications = replications;
    if (!methods.empty()) cfg.methods = split_list(methods);
    if (!spec_cells.empty()) {
      cfg.spec_cells.clear();
      for (const auto& s : split_list(spec_cells))
        cfg.spec_cells.push_back(sdr::parse_spec_cell(s));
    }
    if (!gamma_grid.empty())
      cfg.gamma_grid = parse_doubles(gamma_grid, "--gamma-grid");
    if (seed_set) cfg.master_seed = seed;
    sdr::validate_scenario(cfg);
    return cfg;
  }
};

void write_text(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream os(out_path);
  if (!os) throw std::runtime_error(out_path + ": cannot open for writing");
  os << text;
  if (!os) throw std::runtime_error(out_path + ": write failed");
}

int cmd_generate(std::size_t n, std::size_t d, double alpha,
                 std::uint64_t seed, const std::string& out_path) {
  const auto params = sdr::PayoffParameters::defaults(d, alpha);
  const auto ds = sdr::gen_dataset(sdr::DataGenConfig(n, d, params, seed));
  sdr::write_dataset_csv(ds, out_path);
  std::filesystem::path sidecar(out_path);
  sidecar.replace_extension(".oracle.json");
  {
    std::ofstream os(sidecar);
    if (!os)
      throw std::runtime_error(sidecar.string() + ": cannot open for writing");
    os << sdr::oracle_to_json(ds, params, seed).dump(2) << '\n';
  }
  std::cerr << "wrote " << out_path << " and " << sidecar.string() << "\n";
  return 0;
}

int cmd_estimate(const std::string& data_path, const std::string& method,
                 const std::string& spec_cell, const std::string& out_path) {
  const auto ds = sdr::read_dataset_csv(data_path);
  sdr::SdrConfig cfg;
  sdr::apply_spec_cell(cfg, sdr::parse_spec_cell(spec_cell));
  const auto rpt = sdr::estimate_with(method, ds.observed(), cfg);
  write_text(out_path, sdr::report_to_json(rpt).dump(2) + "\n");
  return 0;
}

int cmd_sweep(const ScenarioFlags& flags, int jobs, const std::string& out,
              const std::string& format, bool dump_replications) {
  const auto cfg = flags.resolve();
  const auto res = sdr::run_sweep(cfg, jobs);
  std::vector<sdr::MetricsRow> rows;
  rows.reserve(res.cells.size());
  for (const auto& c : res.cells) rows.push_back(c.row);

  if (format == "csv") {
    std::ostringstream os;
    sdr::write_metrics_csv(rows, os);
    write_text(out, os.str());
  } else {
    write_text(out, sdr::metrics_to_json(rows).dump(2) + "\n");
  }
  if (dump_replications) {
    if (out.empty())
      throw std::runtime_error("--dump-replications requires --out");
    std::filesystem::path p(out);
    p.replace_extension(".replications.csv");
    sdr::write_replications_csv(res.cells, p.string());
    std::cerr << "wrote " << p.string() << "\n";
  }
  std::cerr << res.cells.size() << " cells, " << res.failed_cells
            << " over the error budget\n";
  return res.failed_cells == 0 ? 0 : 1;
}

int cmd_sensitivity(const ScenarioFlags& flags, int jobs,
                    const std::string& out, const std::string& format) {
  const auto cfg = flags.resolve();
  const auto rows = sdr::run_sensitivity(cfg, jobs);
  if (format == "csv") {
    std::ostringstream os;
    sdr::write_sensitivity_csv(rows, os);
    write_text(out, os.str());
  } else {
    write_text(out, sdr::sensitivity_to_json(rows).dump(2) + "\n");
  }
  std::size_t failed = 0;
  for (const auto& r : rows) {
    const std::size_t errors =
        static_cast<std::size_t>(cfg.replications) - r.replications_used;
    if (errors * 10 > static_cast<std::size_t>(cfg.replications)) ++failed;
  }
  std::cerr << rows.size() << " rows, " << failed
            << " over the error budget\n";
  return failed == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// selftest: fast property suites
// ---------------------------------------------------------------------------

bool suite_estimating_equation() {
  // Two hand-checkable units: influence values (0, 2), so the estimate is 1,
  // the standard error is 1/sqrt(2), and the 95% interval is 1 +- 1.38590...
  const std::vector<double> y = {2.0, 0.0};
  const std::vector<int> t = {1, 0};
  const std::vector<double> e = {0.5, 0.5};
  const std::vector<double> mu1 = {2.0, 1.0};
  const std::vector<double> mu0 = {2.0, 1.0};
  const auto [tau, psi] = sdr::sdr_point_estimate(y, t, e, mu1, mu0);
  if (std::abs(psi[0] - 0.0) > 1e-12) return false;
  if (std::abs(psi[1] - 2.0) > 1e-12) return false;
  if (std::abs(tau - 1.0) > 1e-12) return false;
  const auto inf = sdr::inference(psi, 0.95);
  if (std::abs(inf.std_error - 0.7071067811865476) > 1e-12) return false;
  if (std::abs(inf.ci_low - (1.0 - 1.3859038243496777)) > 1e-10) return false;
  if (std::abs(inf.ci_high - (1.0 + 1.3859038243496777)) > 1e-10) return false;
  return true;
}

bool suite_equilibrium_nash() {
  sdr::RngStream rng(2024, 1);
  for (int rep = 0; rep < 60; ++rep) {
    const std::size_t n = 4 + static_cast<std::size_t>(rep % 7);
    const double alpha = (rep % 3 == 0) ? 0.3 : (rep % 3 == 1 ? 0.6 : 0.9);
    const auto p = sdr::PayoffParameters::defaults(2, alpha);
    sdr::Matrix x(n, 2);
    for (auto& v : x.data()) v = rng.normal();
    std::vector<double> u(n), eps(n);
    for (auto& v : u) v = rng.normal();
    for (auto& v : eps) v = rng.logistic(p.payoff_noise);
    std::vector<int> init(n);
    for (auto& v : init) v = rng.bernoulli(0.5) ? 1 : 0;
    const sdr::PayoffInputs in{x, u, eps};
    const auto [t, st] = sdr::solve_equilibrium(in, p, init, 100);
    if (!st.converged) continue;
    const auto nash = sdr::brute_force_nash(in, p);
    if (std::find(nash.begin(), nash.end(), t) == nash.end()) return false;
  }
  return true;
}

bool suite_nuisance_recovery() {
  sdr::RngStream rng(7, 3);
  const std::size_t n = 4000;
  const sdr::FeatureMapSpec map{false, sdr::FeatureTransform::identity};
  sdr::EquilibriumState state;
  state.s.assign(n, 0.0);
  sdr::Matrix x(n, 1);
  std::vector<int> t(n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    t[i] = rng.bernoulli(sdr::sigmoid(0.5 + x(i, 0))) ? 1 : 0;
    y[i] = 1.0 + 2.0 * x(i, 0);
  }
  const sdr::Observed obs{y, t, x};
  const auto coefs = sdr::fit_propensity(obs, state, map, 1e-8);
  if (std::abs(coefs[0] - 0.5) > 0.15) return false;
  if (std::abs(coefs[1] - 1.0) > 0.15) return false;

  // Same rows, treated arm only: the linear fit must recover y = 1 + 2x.
  const auto beta = sdr::fit_outcome_arm(obs, state, 1, map, 1e-10);
  return std::abs(beta[0] - 1.0) < 1e-6 && std::abs(beta[1] - 2.0) < 1e-6;
}

bool suite_determinism() {
  const sdr::DataGenConfig dcfg(
      120, 3, sdr::PayoffParameters::defaults(3, 0.5), 11);
  const auto a = sdr::gen_dataset(dcfg);
  const auto b = sdr::gen_dataset(dcfg);
  if (a.y != b.y || a.t != b.t || a.x.data() != b.x.data()) return false;

  sdr::ScenarioConfig cfg;
  cfg.alpha_grid = {0.5};
  cfg.n_grid = {60};
  cfg.d_grid = {3};
  cfg.replications = 3;
  cfg.methods = {"SDR"};
  const sdr::CellSpec spec{"SDR", 0.5, 60, 3, sdr::SpecCell::both_correct};
  return sdr::run_cell(cfg, spec).row == sdr::run_cell(cfg, spec).row;
}

bool suite_serialization() {
  sdr::ScenarioConfig cfg;
  cfg.alpha_grid = {0.5};
  cfg.n_grid = {50};
  cfg.d_grid = {2};
  cfg.replications = 2;
  cfg.methods = {"DR"};
  const auto res = sdr::run_sweep(cfg);
  std::vector<sdr::MetricsRow> rows;
  for (const auto& c : res.cells) rows.push_back(c.row);

  std::ostringstream os;
  sdr::write_metrics_csv(rows, os);
  std::istringstream is(os.str());
  if (sdr::read_metrics_csv(is, "selftest") != rows) return false;
  if (sdr::metrics_from_json(sdr::metrics_to_json(rows)) != rows) return false;

  const auto ds = sdr::gen_dataset(
      sdr::DataGenConfig(20, 2, sdr::PayoffParameters::defaults(2, 0.5), 5));
  std::ostringstream dos;
  sdr::write_dataset_csv(ds, dos);
  std::istringstream dis(dos.str());
  const auto back = sdr::read_dataset_csv(dis, "selftest");
  return back.y == ds.y && back.t == ds.t && back.x.data() == ds.x.data();
}

int cmd_selftest() {
  struct Suite {
    const char* name;
    bool (*fn)();
  };
  const Suite suites[] = {
      {"estimating-equation micro-oracles", suite_estimating_equation},
      {"equilibrium fixed points are Nash", suite_equilibrium_nash},
      {"nuisance model recovery", suite_nuisance_recovery},
      {"determinism", suite_determinism},
      {"serialization round-trips", suite_serialization},
  };
  int failures = 0;
  for (const auto& s : suites) {
    bool ok = false;
    std::string err;
    try {
      ok = s.fn();
    } catch (const std::exception& e) {
      err = e.what();
    }
    if (ok) {
      std::cout << "PASS  " << s.name << "\n";
    } else {
      ++failures;
      std::cout << "FAIL  " << s.name << (err.empty() ? "" : ": " + err)
                << "\n";
    }
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"strategic doubly robust estimation benchmarks"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "emit one synthetic dataset");
  std::size_t gen_n = 100, gen_d = 5;
  double gen_alpha = 0.5;
  std::uint64_t gen_seed = 42;
  std::string gen_out;
  gen->add_option("--n", gen_n, "agents")->check(CLI::PositiveNumber);
  gen->add_option("--d", gen_d, "covariates")->check(CLI::PositiveNumber);
  gen->add_option("--alpha", gen_alpha, "strategic strength in [0,1]");
  gen->add_option("--seed", gen_seed, "dataset seed");
  gen->add_option("--out", gen_out, "output CSV path")->required();

  // estimate
  auto* est = app.add_subcommand("estimate", "run one method on one dataset");
  std::string est_data, est_method = "SDR", est_cell = "both_correct",
              est_out;
  est->add_option("data", est_data, "dataset CSV path")->required();
  est->add_option("--method", est_method, "method name");
  est->add_option("--spec-cell", est_cell, "specification scenario");
  est->add_option("--out", est_out, "output path (default stdout)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "replication sweep over a grid");
  ScenarioFlags sweep_flags;
  sweep_flags.attach(sweep);
  int sweep_jobs = 1;
  std::string sweep_out, sweep_format = "csv";
  bool dump_replications = false;
  sweep->add_option("--jobs", sweep_jobs, "worker threads")
      ->check(CLI::PositiveNumber);
  sweep->add_option("--out", sweep_out, "output path (default stdout)");
  sweep->add_option("--format", sweep_format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  sweep->add_flag("--dump-replications", dump_replications,
                  "also write per-replication estimates");

  // sensitivity
  auto* sens =
      app.add_subcommand("sensitivity", "confounding-strength bounds");
  ScenarioFlags sens_flags;
  sens_flags.attach(sens);
  int sens_jobs = 1;
  std::string sens_out, sens_format = "csv";
  sens->add_option("--jobs", sens_jobs, "worker threads")
      ->check(CLI::PositiveNumber);
  sens->add_option("--out", sens_out, "output path (default stdout)");
  sens->add_option("--format", sens_format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));

  // selftest
  app.add_subcommand("selftest", "run the built-in property suites");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_generate(gen_n, gen_d, gen_alpha, gen_seed, gen_out);
    if (est->parsed())
      return cmd_estimate(est_data, est_method, est_cell, est_out);
    if (sweep->parsed())
      return cmd_sweep(sweep_flags, sweep_jobs, sweep_out, sweep_format,
                       dump_replications);
    if (sens->parsed())
      return cmd_sensitivity(sens_flags, sens_jobs, sens_out, sens_format);
    return cmd_selftest();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
