#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sdr/domain.hpp"
#include "sdr/numerics.hpp"

namespace sdr {

// Synthetic population description.  Construction validates the invariants so
// downstream code can assume a sane configuration.
struct DataGenConfig {
  std::size_t n;
  std::size_t d;
  PayoffParameters params;
  std::uint64_t seed = 0;
  int max_br_iterations = 100;

  DataGenConfig(std::size_t n_, std::size_t d_, PayoffParameters params_,
                std::uint64_t seed_ = 0, int max_br_iterations_ = 100)
      : n(n_), d(d_), params(std::move(params_)), seed(seed_),
        max_br_iterations(max_br_iterations_) {
    if (n < 2) throw std::invalid_argument("DataGenConfig: n must be >= 2");
    if (d < 1) throw std::invalid_argument("DataGenConfig: d must be >= 1");
    if (params.beta.size() != d || params.gamma.size() != d)
      throw std::invalid_argument("DataGenConfig: beta/gamma length != d");
    if (!(params.alpha >= 0.0 && params.alpha <= 1.0))
      throw std::invalid_argument("DataGenConfig: alpha outside [0, 1]");
    if (!(params.sigma_noise > 0.0))
      throw std::invalid_argument("DataGenConfig: sigma_noise must be > 0");
    if (!(params.payoff_noise > 0.0))
      throw std::invalid_argument("DataGenConfig: payoff_noise must be > 0");
    if (max_br_iterations < 1)
      throw std::invalid_argument("DataGenConfig: max_br_iterations < 1");
  }
};

// Realized per-agent payoff primitives: covariate rows plus the confounder
// and taste-shock draws.  Everything a best response needs.
struct PayoffInputs {
  const Matrix& x;
  const std::vector<double>& u;
  const std::vector<double>& eps;
};

// Utility of choosing t_i against a leave-one-out adoption rate.  Declining
// (t_i = 0) is the normalized outside option worth exactly zero.
inline double payoff(int t_i, double mean_others, std::span<const double> x_i,
                     double u_i, double eps_i, const PayoffParameters& p) {
  if (t_i == 0) return 0.0;
  double v = p.tau_direct + p.alpha * mean_others + u_i + eps_i;
  for (std::size_t j = 0; j < x_i.size(); ++j) v += p.beta[j] * x_i[j];
  return v;
}

inline Matrix gen_covariates(const DataGenConfig& cfg, RngStream& rng) {
  Matrix x(cfg.n, cfg.d);
  for (auto& v : x.data()) v = rng.normal();
  return x;
}

// Best-response dynamics over ascending agent indices.  Each agent adopts
// exactly when the realized payoff is strictly positive (ties resolve to the
// outside option).  With nonnegative peer effects this is a potential game,
// so the sweeps terminate at a pure strategy equilibrium; `converged` records
// whether a full sweep passed with no flips inside the iteration budget.
inline std::pair<std::vector<int>, EquilibriumState> solve_equilibrium(
    const PayoffInputs& in, const PayoffParameters& p, std::vector<int> init_t,
    int max_iter) {
  const std::size_t n = in.u.size();
  if (n < 2) throw std::invalid_argument("solve_equilibrium: need n >= 2");
  if (init_t.size() != n)
    throw std::invalid_argument("solve_equilibrium: init_t length mismatch");

  // fixed per-agent part of the adoption payoff
  std::vector<double> base(n);
  for (std::size_t i = 0; i < n; ++i)
    base[i] = p.tau_direct + dot(in.x.row(i), p.beta) + in.u[i] + in.eps[i];

  std::vector<int> t = std::move(init_t);
  int adopters = std::accumulate(t.begin(), t.end(), 0);
  const double inv = 1.0 / static_cast<double>(n - 1);

  int sweeps = 0;
  bool converged = false;
  while (sweeps < max_iter) {
    ++sweeps;
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const double mean_others = (adopters - t[i]) * inv;
      const int best = (base[i] + p.alpha * mean_others > 0.0) ? 1 : 0;
      if (best != t[i]) {
        adopters += best - t[i];
        t[i] = best;
        changed = true;
      }
    }
    if (!changed) {
      converged = true;
      break;
    }
  }

  EquilibriumState st;
  st.s.resize(n);
  for (std::size_t i = 0; i < n; ++i) st.s[i] = (adopters - t[i]) * inv;
  st.mean_rate = static_cast<double>(adopters) / static_cast<double>(n);
  st.iterations = sweeps;
  st.converged = converged;
  return {std::move(t), std::move(st)};
}

struct Outcomes {
  std::vector<double> y;   // realized
  std::vector<double> y1;  // potential outcome under adoption
  std::vector<double> y0;  // potential outcome under the outside option
};

// Potential outcomes share one noise draw per agent and hold the equilibrium
// adoption rate fixed, so y1 - y0 == tau_direct identically.
inline Outcomes gen_outcomes(const std::vector<int>& t_star, const Matrix& x,
                             const std::vector<double>& u,
                             const PayoffParameters& p, RngStream& rng) {
  const std::size_t n = t_star.size();
  const double tbar =
      std::accumulate(t_star.begin(), t_star.end(), 0.0) / double(n);
  Outcomes out;
  out.y.resize(n);
  out.y1.resize(n);
  out.y0.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double noise = p.sigma_noise * rng.normal();
    const double level = p.alpha * tbar + dot(x.row(i), p.gamma) + u[i] + noise;
    out.y0[i] = level;
    out.y1[i] = p.tau_direct + level;
    out.y[i] = t_star[i] ? out.y1[i] : out.y0[i];
  }
  return out;
}

// Full pipeline: covariates and shocks, best-response equilibrium from a fair
// coin profile, then outcomes.  Dedicated sub-streams per component keep every
// piece independent and the whole dataset a pure function of cfg.seed.
inline Dataset gen_dataset(const DataGenConfig& cfg) {
  RngStream root(cfg.seed);
  auto rng_x = root.substream(1);
  auto rng_u = root.substream(2);
  auto rng_eps = root.substream(3);
  auto rng_init = root.substream(4);
  auto rng_y = root.substream(5);

  Dataset ds;
  ds.n = cfg.n;
  ds.d = cfg.d;
  ds.x = gen_covariates(cfg, rng_x);
  std::vector<double> u = sample_standard_normal(rng_u, cfg.n);
  std::vector<double> eps(cfg.n);
  for (auto& e : eps) e = rng_eps.logistic(cfg.params.payoff_noise);
  std::vector<int> init(cfg.n);
  for (auto& v : init) v = rng_init.bernoulli(0.5) ? 1 : 0;

  auto [t_star, state] =
      solve_equilibrium(PayoffInputs{ds.x, u, eps}, cfg.params,
                        std::move(init), cfg.max_br_iterations);
  auto outs = gen_outcomes(t_star, ds.x, u, cfg.params, rng_y);

  ds.y = std::move(outs.y);
  ds.t = t_star;

  OracleInfo oracle;
  oracle.u = std::move(u);
  oracle.y1 = std::move(outs.y1);
  oracle.y0 = std::move(outs.y0);
  oracle.t_star = std::move(t_star);
  oracle.equilibrium_converged = state.converged;
  oracle.s_true = std::move(state);
  oracle.tau_true = cfg.params.tau_direct;
  ds.oracle = std::move(oracle);
  return ds;
}

// Sample average treatment effect from the stored potential outcomes.
inline double true_sate(const Dataset& ds) {
  if (!ds.oracle) throw MissingOracle("true_sate: dataset carries no oracle");
  const auto& o = *ds.oracle;
  double s = 0.0;
  for (std::size_t i = 0; i < o.y1.size(); ++i) s += o.y1[i] - o.y0[i];
  return s / static_cast<double>(o.y1.size());
}

}  // namespace sdr
