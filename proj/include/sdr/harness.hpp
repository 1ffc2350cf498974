#pragma once

// Experiment orchestration: replication sweeps over (method, alpha, n, d,
// specification scenario) cells, metric aggregation, sensitivity sweeps, and
// the machine-readable CSV/JSON formats the CLI emits.
//
// Reproducibility model: every replication's dataset seed is a pure function
// of (master_seed, alpha, n, d, replication index).  Methods and
// specification scenarios therefore score against identical draws (paired
// comparisons), removing one cell from a sweep cannot change another, and
// results are byte-identical for any thread count or execution order.

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "sdr/baselines.hpp"
#include "sdr/datagen.hpp"
#include "sdr/estimator.hpp"

namespace sdr {

// ---------------------------------------------------------------------------
// Specification scenarios
// ---------------------------------------------------------------------------

// Which nuisance models the estimator gets wrong.  A misspecified side sees
// kang-schafer-transformed features; the generator never changes.
enum class SpecCell {
  both_correct,
  outcome_misspecified,
  propensity_misspecified,
  both_misspecified,
};

inline constexpr const char* kSpecCellNames[] = {
    "both_correct",
    "outcome_misspecified",
    "propensity_misspecified",
    "both_misspecified",
};

inline const char* spec_cell_name(SpecCell c) {
  return kSpecCellNames[static_cast<int>(c)];
}

inline SpecCell parse_spec_cell(const std::string& s) {
  for (int i = 0; i < 4; ++i)
    if (s == kSpecCellNames[i]) return static_cast<SpecCell>(i);
  throw std::invalid_argument("unknown spec cell: " + s);
}

inline void apply_spec_cell(SdrConfig& cfg, SpecCell cell) {
  cfg.propensity_map.transform = FeatureTransform::identity;
  cfg.outcome_map.transform = FeatureTransform::identity;
  if (cell == SpecCell::propensity_misspecified ||
      cell == SpecCell::both_misspecified)
    cfg.propensity_map.transform = FeatureTransform::kang_schafer;
  if (cell == SpecCell::outcome_misspecified ||
      cell == SpecCell::both_misspecified)
    cfg.outcome_map.transform = FeatureTransform::kang_schafer;
}

// ---------------------------------------------------------------------------
// Method registry
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> methods = {
      "SDR", "DR", "IPW", "AIPW", "Matching", "S-Learner", "T-Learner"};
  return methods;
}

inline EstimateReport estimate_with(const std::string& method,
                                    const Observed& obs,
                                    const SdrConfig& cfg) {
  if (method == "SDR") return run_sdr(obs, cfg);
  if (method == "DR") return run_dr_nonstrategic(obs, cfg);
  if (method == "IPW") return estimate_ipw(obs, cfg);
  if (method == "AIPW") return estimate_aipw(obs, cfg);
  if (method == "Matching") return estimate_matching(obs, cfg);
  if (method == "S-Learner") return estimate_s_learner(obs, cfg);
  if (method == "T-Learner") return estimate_t_learner(obs, cfg);
  throw std::invalid_argument("unknown method: " + method);
}

// ---------------------------------------------------------------------------
// Scenario configuration
// ---------------------------------------------------------------------------

struct ScenarioConfig {
  std::vector<double> alpha_grid = {0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<std::size_t> n_grid = {10, 50, 100, 250, 500};
  std::vector<std::size_t> d_grid = {2, 5, 10, 20};
  int replications = 200;
  std::uint64_t master_seed = 42;
  std::vector<std::string> methods = known_methods();
  std::vector<SpecCell> spec_cells = {SpecCell::both_correct};
  std::vector<double> gamma_grid;  // used by sensitivity sweeps only
};

inline void validate_scenario(const ScenarioConfig& cfg) {
  if (cfg.alpha_grid.empty() || cfg.n_grid.empty() || cfg.d_grid.empty())
    throw std::invalid_argument("ScenarioConfig: empty grid");
  for (double a : cfg.alpha_grid)
    if (!(a >= 0.0 && a <= 1.0))
      throw std::invalid_argument("ScenarioConfig: alpha outside [0, 1]");
  for (std::size_t n : cfg.n_grid)
    if (n < 2) throw std::invalid_argument("ScenarioConfig: n < 2");
  for (std::size_t d : cfg.d_grid)
    if (d < 1) throw std::invalid_argument("ScenarioConfig: d < 1");
  if (cfg.replications < 1)
    throw std::invalid_argument("ScenarioConfig: replications < 1");
  if (cfg.methods.empty())
    throw std::invalid_argument("ScenarioConfig: no methods");
  const auto& known = known_methods();
  for (const auto& m : cfg.methods)
    if (std::find(known.begin(), known.end(), m) == known.end())
      throw std::invalid_argument("ScenarioConfig: unknown method " + m);
  if (cfg.spec_cells.empty())
    throw std::invalid_argument("ScenarioConfig: no spec cells");
  for (double g : cfg.gamma_grid)
    if (!(g >= 1.0))
      throw std::invalid_argument("ScenarioConfig: gamma < 1");
}

// JSON keys mirror the field names; "spec_cells" accepts a single string or
// an array of strings, and every key is optional (defaults apply).
inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  ScenarioConfig cfg;
  if (j.contains("alpha_grid"))
    cfg.alpha_grid = j.at("alpha_grid").get<std::vector<double>>();
  if (j.contains("n_grid"))
    cfg.n_grid = j.at("n_grid").get<std::vector<std::size_t>>();
  if (j.contains("d_grid"))
    cfg.d_grid = j.at("d_grid").get<std::vector<std::size_t>>();
  if (j.contains("replications"))
    cfg.replications = j.at("replications").get<int>();
  if (j.contains("master_seed"))
    cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
  if (j.contains("methods"))
    cfg.methods = j.at("methods").get<std::vector<std::string>>();
  if (j.contains("spec_cells")) {
    cfg.spec_cells.clear();
    const auto& sc = j.at("spec_cells");
    if (sc.is_string()) {
      cfg.spec_cells.push_back(parse_spec_cell(sc.get<std::string>()));
    } else {
      for (const auto& v : sc)
        cfg.spec_cells.push_back(parse_spec_cell(v.get<std::string>()));
    }
  }
  if (j.contains("gamma_grid"))
    cfg.gamma_grid = j.at("gamma_grid").get<std::vector<double>>();
  return cfg;
}

// ---------------------------------------------------------------------------
// Cells, rows, and replication records
// ---------------------------------------------------------------------------

struct CellSpec {
  std::string method;
  double alpha = 0.5;
  std::size_t n = 100;
  std::size_t d = 5;
  SpecCell cell = SpecCell::both_correct;
};

struct RepRecord {
  int rep = 0;  // 1-based replication index
  double tau_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct MetricsRow {
  std::string method;
  double alpha = 0.0;
  std::size_t n = 0;
  std::size_t d = 0;
  SpecCell cell = SpecCell::both_correct;
  double mean_abs_bias = 0.0;
  double sd_abs_bias = 0.0;
  double mean_bias = 0.0;
  double mse = 0.0;
  double ci_coverage = 0.0;
  double mean_iterations = 0.0;
  double convergence_rate = 0.0;
  std::size_t replications_used = 0;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

struct CellResult {
  MetricsRow row;
  std::size_t failures = 0;   // replications that threw
  bool budget_ok = true;      // false when failures exceed 10% of the budget
  std::vector<RepRecord> reps;  // surviving replications, in index order
};

// Deterministic seed for one replication's dataset.  Depends only on the
// master seed and the data-shape coordinates (alpha, n, d, r): methods and
// specification scenarios share draws, so cross-method comparisons are
// paired and cells never interact.
inline std::uint64_t replication_seed(std::uint64_t master, double alpha,
                                      std::size_t n, std::size_t d, int r) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
  std::uint64_t bits;
  static_assert(sizeof bits == sizeof alpha);
  std::memcpy(&bits, &alpha, sizeof bits);
  std::uint64_t k = mix(master ^ bits);
  k = mix(k ^ static_cast<std::uint64_t>(n));
  k = mix(k ^ static_cast<std::uint64_t>(d));
  return mix(k ^ static_cast<std::uint64_t>(r));
}

namespace detail {

// Aggregates surviving replications into a MetricsRow.  Kept separate from
// the generation loop so the degenerate conventions (one replication, empty
// cell) and the error-budget rule are directly testable.
inline CellResult aggregate_cell(const CellSpec& spec, double tau_true,
                                 std::vector<RepRecord> reps,
                                 std::size_t failures, int replications) {
  CellResult out;
  out.reps = std::move(reps);
  out.failures = failures;
  // Integer form of "more than 10% of replications errored".
  out.budget_ok = failures * 10 <= static_cast<std::size_t>(replications);

  MetricsRow& row = out.row;
  row.method = spec.method;
  row.alpha = spec.alpha;
  row.n = spec.n;
  row.d = spec.d;
  row.cell = spec.cell;
  row.replications_used = out.reps.size();
  const double used = static_cast<double>(out.reps.size());
  if (out.reps.empty()) return out;

  double sum_abs = 0.0, sum_err = 0.0, sum_sq = 0.0;
  double covered = 0.0, iters = 0.0, conv = 0.0;
  for (const auto& r : out.reps) {
    const double err = r.tau_hat - tau_true;
    sum_abs += std::abs(err);
    sum_err += err;
    sum_sq += err * err;
    covered += (r.ci_low <= tau_true && tau_true <= r.ci_high);
    iters += r.iterations;
    conv += r.converged;
  }
  row.mean_abs_bias = sum_abs / used;
  row.mean_bias = sum_err / used;
  row.mse = sum_sq / used;
  row.ci_coverage = covered / used;
  row.mean_iterations = iters / used;
  row.convergence_rate = conv / used;
  if (out.reps.size() >= 2) {
    double ss = 0.0;
    for (const auto& r : out.reps) {
      const double dev = std::abs(r.tau_hat - tau_true) - row.mean_abs_bias;
      ss += dev * dev;
    }
    row.sd_abs_bias = std::sqrt(ss / (used - 1.0));
  }  // single replication: sd_abs_bias stays 0 by convention
  return out;
}

// Runs fn(0..count-1) on up to `jobs` threads.  Work items land in
// caller-owned slots keyed by index, so scheduling cannot affect results.
inline void parallel_for(std::size_t count, int jobs,
                         const std::function<void(std::size_t)>& fn) {
  if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
  if (jobs == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1))
      fn(i);
  };
  std::vector<std::thread> pool;
  const std::size_t spawn =
      std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
  pool.reserve(spawn);
  for (std::size_t k = 0; k < spawn; ++k) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace detail

// Runs every replication of one (method, alpha, n, d, spec-cell) cell.
// Individual replication failures are counted and excluded; the cell's
// error budget fails only when more than 10% of replications throw.
inline CellResult run_cell(const ScenarioConfig& cfg, const CellSpec& spec) {
  validate_scenario(cfg);
  const PayoffParameters params =
      PayoffParameters::defaults(spec.d, spec.alpha);
  SdrConfig est_cfg;
  apply_spec_cell(est_cfg, spec.cell);

  std::vector<RepRecord> reps;
  reps.reserve(static_cast<std::size_t>(cfg.replications));
  std::size_t failures = 0;
  for (int r = 1; r <= cfg.replications; ++r) {
    const std::uint64_t seed =
        replication_seed(cfg.master_seed, spec.alpha, spec.n, spec.d, r);
    const Dataset ds = gen_dataset(DataGenConfig(spec.n, spec.d, params, seed));
    try {
      const EstimateReport rpt = estimate_with(spec.method, ds.observed(), est_cfg);
      reps.push_back(RepRecord{r, rpt.tau_hat, rpt.ci_low, rpt.ci_high,
                               rpt.iterations, rpt.converged});
    } catch (const std::exception&) {
      ++failures;
    }
  }
  return detail::aggregate_cell(spec, params.tau_direct, std::move(reps),
                                failures, cfg.replications);
}

struct SweepResult {
  std::vector<CellResult> cells;  // lexicographic (method, alpha, n, d, cell)
  std::size_t failed_cells = 0;   // cells that blew the 10% error budget
};

// Cartesian product of methods x alpha_grid x n_grid x d_grid x spec_cells.
// Cells execute concurrently up to `jobs`; output order and content are
// independent of the schedule.
inline SweepResult run_sweep(const ScenarioConfig& cfg, int jobs = 1) {
  validate_scenario(cfg);
  std::vector<CellSpec> specs;
  for (const auto& m : cfg.methods)
    for (double a : cfg.alpha_grid)
      for (std::size_t n : cfg.n_grid)
        for (std::size_t d : cfg.d_grid)
          for (SpecCell c : cfg.spec_cells)
            specs.push_back(CellSpec{m, a, n, d, c});
  std::sort(specs.begin(), specs.end(), [](const auto& l, const auto& r) {
    return std::tie(l.method, l.alpha, l.n, l.d, l.cell) <
           std::tie(r.method, r.alpha, r.n, r.d, r.cell);
  });

  SweepResult out;
  out.cells.resize(specs.size());
  detail::parallel_for(specs.size(), jobs, [&](std::size_t i) {
    out.cells[i] = run_cell(cfg, specs[i]);
  });
  for (const auto& c : out.cells) out.failed_cells += !c.budget_ok;
  return out;
}

// ---------------------------------------------------------------------------
// Sensitivity sweeps
// ---------------------------------------------------------------------------

struct SensitivityRow {
  double alpha = 0.0;
  std::size_t n = 0;
  std::size_t d = 0;
  SpecCell cell = SpecCell::both_correct;
  double gamma = 1.0;
  double tau_low = 0.0;   // bound endpoints averaged over replications
  double tau_high = 0.0;
  std::size_t replications_used = 0;

  friend bool operator==(const SensitivityRow&, const SensitivityRow&) =
      default;
};

// Confounding-strength sweep for the strategic estimator: per replication,
// recomputes the estimate under odds tilts of each gamma and averages the
// bound endpoints.  Shares the replication seeding (and hence datasets) with
// run_cell.
inline std::vector<SensitivityRow> run_sensitivity(const ScenarioConfig& cfg,
                                                   int jobs = 1) {
  validate_scenario(cfg);
  if (cfg.gamma_grid.empty())
    throw std::invalid_argument("run_sensitivity: gamma_grid is empty");

  struct Task {
    double alpha;
    std::size_t n, d;
    SpecCell cell;
  };
  std::vector<Task> tasks;
  for (double a : cfg.alpha_grid)
    for (std::size_t n : cfg.n_grid)
      for (std::size_t d : cfg.d_grid)
        for (SpecCell c : cfg.spec_cells) tasks.push_back(Task{a, n, d, c});
  std::sort(tasks.begin(), tasks.end(), [](const auto& l, const auto& r) {
    return std::tie(l.alpha, l.n, l.d, l.cell) <
           std::tie(r.alpha, r.n, r.d, r.cell);
  });

  const std::size_t g_count = cfg.gamma_grid.size();
  std::vector<SensitivityRow> rows(tasks.size() * g_count);
  detail::parallel_for(tasks.size(), jobs, [&](std::size_t ti) {
    const Task& t = tasks[ti];
    const PayoffParameters params = PayoffParameters::defaults(t.d, t.alpha);
    SdrConfig est_cfg;
    apply_spec_cell(est_cfg, t.cell);

    std::vector<double> lo_sum(g_count, 0.0), hi_sum(g_count, 0.0);
    std::size_t used = 0;
    for (int r = 1; r <= cfg.replications; ++r) {
      const std::uint64_t seed =
          replication_seed(cfg.master_seed, t.alpha, t.n, t.d, r);
      const Dataset ds =
          gen_dataset(DataGenConfig(t.n, t.d, params, seed));
      try {
        std::vector<std::pair<double, double>> bounds(g_count);
        for (std::size_t gi = 0; gi < g_count; ++gi)
          bounds[gi] =
              sensitivity_bounds(ds.observed(), est_cfg, cfg.gamma_grid[gi]);
        for (std::size_t gi = 0; gi < g_count; ++gi) {
          lo_sum[gi] += bounds[gi].first;
          hi_sum[gi] += bounds[gi].second;
        }
        ++used;
      } catch (const std::exception&) {
      }
    }
    for (std::size_t gi = 0; gi < g_count; ++gi) {
      SensitivityRow& row = rows[ti * g_count + gi];
      row.alpha = t.alpha;
      row.n = t.n;
      row.d = t.d;
      row.cell = t.cell;
      row.gamma = cfg.gamma_grid[gi];
      row.replications_used = used;
      if (used > 0) {
        row.tau_low = lo_sum[gi] / static_cast<double>(used);
        row.tau_high = hi_sum[gi] / static_cast<double>(used);
      }
    }
  });
  return rows;
}

// ---------------------------------------------------------------------------
// Serialization: 17-significant-digit CSV and key-stable JSON
// ---------------------------------------------------------------------------

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline constexpr const char* kMetricsCsvHeader =
    "method,alpha,n,d,spec_cell,mean_abs_bias,sd_abs_bias,mean_bias,mse,"
    "ci_coverage,mean_iterations,convergence_rate,replications_used";

inline void write_metrics_csv(const std::vector<MetricsRow>& rows,
                              std::ostream& os) {
  os << kMetricsCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.method << ',' << format_g17(r.alpha) << ',' << r.n << ',' << r.d
       << ',' << spec_cell_name(r.cell) << ',' << format_g17(r.mean_abs_bias)
       << ',' << format_g17(r.sd_abs_bias) << ',' << format_g17(r.mean_bias)
       << ',' << format_g17(r.mse) << ',' << format_g17(r.ci_coverage) << ','
       << format_g17(r.mean_iterations) << ','
       << format_g17(r.convergence_rate) << ',' << r.replications_used
       << '\n';
  }
}

namespace detail {

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error(path + ": cannot open for writing");
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error(path + ": cannot open for reading");
  return is;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline double parse_double(const std::string& s, const std::string& ctx) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(ctx + ": bad numeric field '" + s + "'");
  }
}

inline std::size_t parse_size(const std::string& s, const std::string& ctx) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw std::runtime_error(ctx + ": bad integer field '" + s + "'");
  }
}

}  // namespace detail

inline void write_metrics_csv(const std::vector<MetricsRow>& rows,
                              const std::string& path) {
  auto os = detail::open_out(path);
  write_metrics_csv(rows, os);
  if (!os) throw std::runtime_error(path + ": write failed");
}

inline std::vector<MetricsRow> read_metrics_csv(std::istream& is,
                                                const std::string& ctx) {
  std::string line;
  if (!std::getline(is, line) || line != kMetricsCsvHeader)
    throw std::runtime_error(ctx + ": missing or unexpected CSV header");
  std::vector<MetricsRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 13)
      throw std::runtime_error(ctx + ": expected 13 fields, got " +
                               std::to_string(f.size()));
    MetricsRow r;
    r.method = f[0];
    r.alpha = detail::parse_double(f[1], ctx);
    r.n = detail::parse_size(f[2], ctx);
    r.d = detail::parse_size(f[3], ctx);
    r.cell = parse_spec_cell(f[4]);
    r.mean_abs_bias = detail::parse_double(f[5], ctx);
    r.sd_abs_bias = detail::parse_double(f[6], ctx);
    r.mean_bias = detail::parse_double(f[7], ctx);
    r.mse = detail::parse_double(f[8], ctx);
    r.ci_coverage = detail::parse_double(f[9], ctx);
    r.mean_iterations = detail::parse_double(f[10], ctx);
    r.convergence_rate = detail::parse_double(f[11], ctx);
    r.replications_used = detail::parse_size(f[12], ctx);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  auto is = detail::open_in(path);
  return read_metrics_csv(is, path);
}

inline nlohmann::ordered_json metrics_to_json(
    const std::vector<MetricsRow>& rows) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json o;
    o["method"] = r.method;
    o["alpha"] = r.alpha;
    o["n"] = r.n;
    o["d"] = r.d;
    o["spec_cell"] = spec_cell_name(r.cell);
    o["mean_abs_bias"] = r.mean_abs_bias;
    o["sd_abs_bias"] = r.sd_abs_bias;
    o["mean_bias"] = r.mean_bias;
    o["mse"] = r.mse;
    o["ci_coverage"] = r.ci_coverage;
    o["mean_iterations"] = r.mean_iterations;
    o["convergence_rate"] = r.convergence_rate;
    o["replications_used"] = r.replications_used;
    arr.push_back(std::move(o));
  }
  return arr;
}

inline std::vector<MetricsRow> metrics_from_json(const nlohmann::json& arr) {
  std::vector<MetricsRow> rows;
  for (const auto& o : arr) {
    MetricsRow r;
    r.method = o.at("method").get<std::string>();
    r.alpha = o.at("alpha").get<double>();
    r.n = o.at("n").get<std::size_t>();
    r.d = o.at("d").get<std::size_t>();
    r.cell = parse_spec_cell(o.at("spec_cell").get<std::string>());
    r.mean_abs_bias = o.at("mean_abs_bias").get<double>();
    r.sd_abs_bias = o.at("sd_abs_bias").get<double>();
    r.mean_bias = o.at("mean_bias").get<double>();
    r.mse = o.at("mse").get<double>();
    r.ci_coverage = o.at("ci_coverage").get<double>();
    r.mean_iterations = o.at("mean_iterations").get<double>();
    r.convergence_rate = o.at("convergence_rate").get<double>();
    r.replications_used = o.at("replications_used").get<std::size_t>();
    rows.push_back(std::move(r));
  }
  return rows;
}

inline void write_metrics_json(const std::vector<MetricsRow>& rows,
                               const std::string& path) {
  auto os = detail::open_out(path);
  os << metrics_to_json(rows).dump(2) << '\n';
  if (!os) throw std::runtime_error(path + ": write failed");
}

inline std::vector<MetricsRow> read_metrics_json(const std::string& path) {
  auto is = detail::open_in(path);
  nlohmann::json j;
  is >> j;
  return metrics_from_json(j);
}

inline constexpr const char* kSensitivityCsvHeader =
    "alpha,n,d,spec_cell,gamma,tau_low,tau_high,replications_used";

inline void write_sensitivity_csv(const std::vector<SensitivityRow>& rows,
                                  std::ostream& os) {
  os << kSensitivityCsvHeader << '\n';
  for (const auto& r : rows) {
    os << format_g17(r.alpha) << ',' << r.n << ',' << r.d << ','
       << spec_cell_name(r.cell) << ',' << format_g17(r.gamma) << ','
       << format_g17(r.tau_low) << ',' << format_g17(r.tau_high) << ','
       << r.replications_used << '\n';
  }
}

inline void write_sensitivity_csv(const std::vector<SensitivityRow>& rows,
                                  const std::string& path) {
  auto os = detail::open_out(path);
  write_sensitivity_csv(rows, os);
  if (!os) throw std::runtime_error(path + ": write failed");
}

inline nlohmann::ordered_json sensitivity_to_json(
    const std::vector<SensitivityRow>& rows) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json o;
    o["alpha"] = r.alpha;
    o["n"] = r.n;
    o["d"] = r.d;
    o["spec_cell"] = spec_cell_name(r.cell);
    o["gamma"] = r.gamma;
    o["tau_low"] = r.tau_low;
    o["tau_high"] = r.tau_high;
    o["replications_used"] = r.replications_used;
    arr.push_back(std::move(o));
  }
  return arr;
}

inline constexpr const char* kReplicationsCsvHeader =
    "method,alpha,n,d,spec_cell,rep,tau_hat,ci_low,ci_high,iterations,"
    "converged";

// Per-replication estimates of every surviving replication; enables post-hoc
// recomputation of any aggregate and debugging of outlier seeds.
inline void write_replications_csv(const std::vector<CellResult>& cells,
                                   std::ostream& os) {
  os << kReplicationsCsvHeader << '\n';
  for (const auto& c : cells) {
    for (const auto& r : c.reps) {
      os << c.row.method << ',' << format_g17(c.row.alpha) << ',' << c.row.n
         << ',' << c.row.d << ',' << spec_cell_name(c.row.cell) << ','
         << r.rep << ',' << format_g17(r.tau_hat) << ','
         << format_g17(r.ci_low) << ',' << format_g17(r.ci_high) << ','
         << r.iterations << ',' << (r.converged ? 1 : 0) << '\n';
    }
  }
}

inline void write_replications_csv(const std::vector<CellResult>& cells,
                                   const std::string& path) {
  auto os = detail::open_out(path);
  write_replications_csv(cells, os);
  if (!os) throw std::runtime_error(path + ": write failed");
}

// ---------------------------------------------------------------------------
// Dataset files: observed CSV plus oracle JSON sidecar
// ---------------------------------------------------------------------------

inline void write_dataset_csv(const Dataset& ds, std::ostream& os) {
  os << "y,t";
  for (std::size_t j = 1; j <= ds.d; ++j) os << ",x" << j;
  os << '\n';
  for (std::size_t i = 0; i < ds.n; ++i) {
    os << format_g17(ds.y[i]) << ',' << ds.t[i];
    for (std::size_t j = 0; j < ds.d; ++j)
      os << ',' << format_g17(ds.x(i, j));
    os << '\n';
  }
}

inline void write_dataset_csv(const Dataset& ds, const std::string& path) {
  auto os = detail::open_out(path);
  write_dataset_csv(ds, os);
  if (!os) throw std::runtime_error(path + ": write failed");
}

// Reads the observed triple back; the result carries no oracle block.
inline Dataset read_dataset_csv(std::istream& is, const std::string& ctx) {
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error(ctx + ": empty dataset file");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 3 || header[0] != "y" || header[1] != "t")
    throw std::runtime_error(ctx + ": expected header y,t,x1,...");
  const std::size_t d = header.size() - 2;
  for (std::size_t j = 0; j < d; ++j)
    if (header[j + 2] != "x" + std::to_string(j + 1))
      throw std::runtime_error(ctx + ": unexpected covariate column '" +
                               header[j + 2] + "'");
  std::vector<double> y;
  std::vector<int> t;
  std::vector<double> xflat;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != d + 2)
      throw std::runtime_error(ctx + ": row with " + std::to_string(f.size()) +
                               " fields, expected " + std::to_string(d + 2));
    y.push_back(detail::parse_double(f[0], ctx));
    const std::size_t ti = detail::parse_size(f[1], ctx);
    if (ti > 1) throw std::runtime_error(ctx + ": treatment not in {0, 1}");
    t.push_back(static_cast<int>(ti));
    for (std::size_t j = 0; j < d; ++j)
      xflat.push_back(detail::parse_double(f[j + 2], ctx));
  }
  Dataset ds;
  ds.n = y.size();
  ds.d = d;
  ds.y = std::move(y);
  ds.t = std::move(t);
  ds.x = Matrix(ds.n, d);
  std::copy(xflat.begin(), xflat.end(), ds.x.data().begin());
  return ds;
}

inline Dataset read_dataset_csv(const std::string& path) {
  auto is = detail::open_in(path);
  return read_dataset_csv(is, path);
}

inline nlohmann::ordered_json oracle_to_json(const Dataset& ds,
                                             const PayoffParameters& params,
                                             std::uint64_t seed) {
  if (!ds.oracle)
    throw MissingOracle("oracle_to_json: dataset carries no oracle block");
  const OracleInfo& o = *ds.oracle;
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["n"] = ds.n;
  j["d"] = ds.d;
  j["tau_true"] = o.tau_true;
  j["equilibrium_converged"] = o.equilibrium_converged;
  j["params"] = {{"tau_direct", params.tau_direct},
                 {"alpha", params.alpha},
                 {"beta", params.beta},
                 {"gamma", params.gamma},
                 {"sigma_noise", params.sigma_noise},
                 {"payoff_noise", params.payoff_noise}};
  j["t_star"] = o.t_star;
  j["s_true"] = o.s_true.s;
  j["u"] = o.u;
  j["y1"] = o.y1;
  j["y0"] = o.y0;
  return j;
}

inline nlohmann::ordered_json report_to_json(const EstimateReport& rpt) {
  nlohmann::ordered_json j;
  j["method"] = rpt.method_name;
  j["tau_hat"] = rpt.tau_hat;
  j["std_error"] = rpt.std_error;
  j["ci_low"] = rpt.ci_low;
  j["ci_high"] = rpt.ci_high;
  j["iterations"] = rpt.iterations;
  j["converged"] = rpt.converged;
  j["state_change_trace"] = rpt.state_change_trace;
  j["influence"] = rpt.influence;
  return j;
}

}  // namespace sdr
