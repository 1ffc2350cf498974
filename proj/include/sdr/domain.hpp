#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sdr/errors.hpp"
#include "sdr/numerics.hpp"

namespace sdr {

// Strategic equilibrium summary: s[i] is agent i's leave-one-out mean
// treatment exposure (or a model-implied iterate of it).
struct EquilibriumState {
  std::vector<double> s;
  double mean_rate = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Structural constants of the agents' decision problem and of the outcome
// equation.  `alpha` scales the peer exposure term in both.
struct PayoffParameters {
  double tau_direct = 2.0;          // direct benefit of adopting
  double alpha = 0.5;               // peer effect weight, in [0, 1]
  std::vector<double> beta;         // covariate weights in the payoff
  std::vector<double> gamma;        // covariate weights in the outcome
  double sigma_noise = 1.0;         // outcome noise scale, > 0
  double payoff_noise = 3.0;        // logistic taste shock scale, > 0

  // Defaults used throughout the benchmarks: beta == gamma with entries
  // 3/sqrt(d), i.e. covariate-signal norm 3 at every d.  That scale makes
  // observable confounding dominate the naive comparison (so adjustment
  // visibly matters), keeps equilibrium propensities inside roughly
  // (0.05, 0.95), and gives misspecified feature maps a measurable penalty.
  static PayoffParameters defaults(std::size_t d, double alpha) {
    PayoffParameters p;
    p.alpha = alpha;
    const double w = 3.0 / std::sqrt(static_cast<double>(d));
    p.beta.assign(d, w);
    p.gamma.assign(d, w);
    return p;
  }
};

// Ground truth carried by synthetic datasets only.  Estimators never see it;
// tests and metric aggregation do.
struct OracleInfo {
  std::vector<double> u;       // unobserved confounder
  std::vector<double> y1, y0;  // both potential outcomes
  std::vector<int> t_star;     // equilibrium treatment profile
  EquilibriumState s_true;     // leave-one-out state of t_star
  double tau_true = 0.0;
  bool equilibrium_converged = false;
};

// The projection estimators are allowed to read: outcomes, treatments,
// covariates.  Keeping entry points on this view (rather than Dataset) makes
// oracle leakage a compile error instead of a code-review item.
struct Observed {
  const std::vector<double>& y;
  const std::vector<int>& t;
  const Matrix& x;

  std::size_t n() const { return y.size(); }
  std::size_t dim() const { return x.cols(); }
};

// Every estimator needs someone in each arm before any fit can start; a
// single-class treatment vector would otherwise surface as an obscure
// optimizer failure much deeper in the stack.
inline void require_both_arms(const Observed& obs) {
  std::size_t treated = 0;
  for (int v : obs.t) treated += (v == 1);
  if (treated == 0)
    throw ArmTooSmall("no treated units in the sample");
  if (treated == obs.t.size())
    throw ArmTooSmall("no control units in the sample");
}

struct Dataset {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> y;
  std::vector<int> t;
  Matrix x;  // n rows, d columns
  std::optional<OracleInfo> oracle;

  Observed observed() const { return Observed{y, t, x}; }
};

// Structural checks; returns one human-readable violation per problem, empty
// when the dataset is usable.  Each message names the field and first index
// at fault.
inline std::vector<std::string> validate_dataset(const Dataset& ds) {
  std::vector<std::string> out;
  const std::size_t n = ds.n;
  if (n < 2) out.push_back("n: fewer than 2 agents");
  if (ds.d < 1) out.push_back("d: no covariates");
  if (ds.y.size() != n)
    out.push_back("y: length " + std::to_string(ds.y.size()) + " != n");
  if (ds.t.size() != n)
    out.push_back("t: length " + std::to_string(ds.t.size()) + " != n");
  if (ds.x.rows() != n || ds.x.cols() != ds.d)
    out.push_back("x: shape " + std::to_string(ds.x.rows()) + "x" +
                  std::to_string(ds.x.cols()) + " != n x d");
  for (std::size_t i = 0; i < ds.t.size(); ++i) {
    if (ds.t[i] != 0 && ds.t[i] != 1) {
      out.push_back("t: non-binary value at index " + std::to_string(i));
      break;
    }
  }
  for (std::size_t i = 0; i < ds.y.size(); ++i) {
    if (!std::isfinite(ds.y[i])) {
      out.push_back("y: non-finite value at index " + std::to_string(i));
      break;
    }
  }
  for (std::size_t i = 0; i < ds.x.data().size(); ++i) {
    if (!std::isfinite(ds.x.data()[i])) {
      out.push_back("x: non-finite value at flat index " + std::to_string(i));
      break;
    }
  }
  if (ds.t.size() == n && n >= 2) {
    std::size_t ones = 0;
    for (int v : ds.t) ones += (v == 1);
    if (ones == 0) out.push_back("t: no treated units");
    if (ones == n) out.push_back("t: no control units");
  }
  if (ds.oracle) {
    const auto& o = *ds.oracle;
    if (o.u.size() != n || o.y1.size() != n || o.y0.size() != n ||
        o.t_star.size() != n || o.s_true.s.size() != n)
      out.push_back("oracle: field lengths != n");
    if (!std::isfinite(o.tau_true)) out.push_back("oracle: tau_true non-finite");
  }
  return out;
}

// Point estimate with influence-function inference, common to every method.
struct EstimateReport {
  double tau_hat = 0.0;
  double std_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::vector<double> influence;  // mean equals tau_hat by construction
  int iterations = 0;
  bool converged = true;
  std::string method_name;
  // Relative equilibrium-state change per outer iteration (iterative methods
  // only); handy for diagnosing the fixed point search.
  std::vector<double> state_change_trace;
};

}  // namespace sdr
