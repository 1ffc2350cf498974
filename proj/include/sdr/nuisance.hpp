#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "sdr/domain.hpp"
#include "sdr/errors.hpp"
#include "sdr/numerics.hpp"

namespace sdr {

// Feature map for the working models.  `identity` keeps raw covariates and
// optionally appends the equilibrium state; `kang_schafer` feeds exp(x/2)
// through instead and always drops the state, giving a controlled form of
// misspecification for the benchmark scenarios.
enum class FeatureTransform { identity, kang_schafer };

struct FeatureMapSpec {
  bool include_state = true;
  FeatureTransform transform = FeatureTransform::identity;
};

inline std::size_t feature_count(std::size_t d, const FeatureMapSpec& map) {
  if (map.transform == FeatureTransform::kang_schafer) return 1 + d;
  return 1 + d + (map.include_state ? 1 : 0);
}

// Writes (intercept, transformed covariates[, state]) into `out`.
inline void build_features(std::span<const double> x_i, double s_i,
                           const FeatureMapSpec& map, std::span<double> out) {
  out[0] = 1.0;
  if (map.transform == FeatureTransform::kang_schafer) {
    for (std::size_t j = 0; j < x_i.size(); ++j)
      out[1 + j] = std::exp(0.5 * x_i[j]);
    return;
  }
  for (std::size_t j = 0; j < x_i.size(); ++j) out[1 + j] = x_i[j];
  if (map.include_state) out[1 + x_i.size()] = s_i;
}

inline Matrix build_feature_matrix(const Matrix& x,
                                   std::span<const double> s,
                                   const FeatureMapSpec& map) {
  const std::size_t n = x.rows();
  Matrix f(n, feature_count(x.cols(), map));
  for (std::size_t i = 0; i < n; ++i)
    build_features(x.row(i), s.empty() ? 0.0 : s[i], map, f.row(i));
  return f;
}

namespace detail {

// Penalized logistic regression by damped Newton (IRLS with step halving).
// The ridge penalty applies to every coefficient except the intercept, which
// keeps the optimum finite even under perfect separation.  Convergence is a
// relative coefficient-change test; when no step length improves the
// penalized log-likelihood any more we are at the numerical optimum and also
// stop.  Hitting the iteration cap raises DidNotConverge.
inline std::vector<double> logistic_irls(const Matrix& f,
                                         const std::vector<int>& t,
                                         double ridge,
                                         const std::vector<double>* warm,
                                         int max_iter = 100) {
  const std::size_t n = f.rows(), p = f.cols();
  std::vector<double> beta(p, 0.0);
  if (warm && warm->size() == p) beta = *warm;

  std::vector<double> eta(n), prob(n), grad(p), step;
  Matrix h(p, p);

  auto objective = [&](const std::vector<double>& b) {
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = dot(f.row(i), b);
      obj += t[i] * e - softplus(e);
    }
    for (std::size_t j = 1; j < p; ++j) obj -= 0.5 * ridge * b[j] * b[j];
    return obj;
  };

  double obj = objective(beta);
  for (int iter = 1; iter <= max_iter; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      eta[i] = dot(f.row(i), beta);
      prob[i] = sigmoid(eta[i]);
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    for (auto& v : h.data()) v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = t[i] - prob[i];
      const double w = std::max(prob[i] * (1.0 - prob[i]), 1e-10);
      const auto row = f.row(i);
      for (std::size_t a = 0; a < p; ++a) {
        grad[a] += row[a] * r;
        for (std::size_t b = a; b < p; ++b) h(a, b) += w * row[a] * row[b];
      }
    }
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = 0; b < a; ++b) h(a, b) = h(b, a);
    for (std::size_t j = 1; j < p; ++j) {
      grad[j] -= ridge * beta[j];
      h(j, j) += ridge;
    }

    step = solve_spd(h, grad);

    // backtracking line search: enforce monotone ascent
    double scale = 1.0;
    bool accepted = false;
    std::vector<double> cand(p);
    for (int half = 0; half < 60; ++half) {
      for (std::size_t j = 0; j < p; ++j) cand[j] = beta[j] + scale * step[j];
      const double cand_obj = objective(cand);
      if (cand_obj > obj) {
        accepted = true;
        obj = cand_obj;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) return beta;  // numerical optimum reached

    double rel = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      rel = std::max(rel, std::abs(scale * step[j]) /
                              std::max(1.0, std::abs(cand[j])));
    }
    beta = cand;
    if (rel <= 1e-8) return beta;
  }
  throw DidNotConverge("logistic_irls: iteration cap reached");
}

// Ridge least squares via normal equations, intercept unpenalized.
inline std::vector<double> ridge_least_squares(const Matrix& f,
                                               std::span<const double> y,
                                               double ridge) {
  const std::size_t n = f.rows(), p = f.cols();
  Matrix g(p, p);
  std::vector<double> rhs(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = f.row(i);
    for (std::size_t a = 0; a < p; ++a) {
      rhs[a] += row[a] * y[i];
      for (std::size_t b = a; b < p; ++b) g(a, b) += row[a] * row[b];
    }
  }
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = 0; b < a; ++b) g(a, b) = g(b, a);
  for (std::size_t j = 1; j < p; ++j) g(j, j) += ridge;
  return solve_spd(g, rhs);
}

}  // namespace detail

// Treatment-choice probability model fitted on (1, x[, s]).
inline std::vector<double> fit_propensity(
    const Observed& obs, const EquilibriumState& state,
    const FeatureMapSpec& map, double ridge,
    const std::vector<double>* warm_start = nullptr) {
  const Matrix f = build_feature_matrix(obs.x, state.s, map);
  return detail::logistic_irls(f, obs.t, ridge, warm_start);
}

inline double predict_propensity(std::span<const double> coefs,
                                 std::span<const double> x_i, double s_i,
                                 const FeatureMapSpec& map, double trunc_lo,
                                 double trunc_hi) {
  std::vector<double> feat(coefs.size());
  build_features(x_i, s_i, map, feat);
  return std::clamp(sigmoid(dot(feat, coefs)), trunc_lo, trunc_hi);
}

// Outcome regression on the units with t == arm.  Any nonempty arm fits when
// ridge > 0 (the penalty makes the normal equations positive definite);
// rank-deficient unpenalized fits surface as NotPositiveDefinite.
inline std::vector<double> fit_outcome_arm(const Observed& obs,
                                           const EquilibriumState& state,
                                           int arm, const FeatureMapSpec& map,
                                           double ridge) {
  const std::size_t n = obs.n();
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) count += (obs.t[i] == arm);
  if (count == 0)
    throw ArmTooSmall("fit_outcome_arm: arm " + std::to_string(arm) +
                      " has no units");

  const std::size_t p = feature_count(obs.dim(), map);
  Matrix f(count, p);
  std::vector<double> y(count);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (obs.t[i] != arm) continue;
    build_features(obs.x.row(i), state.s.empty() ? 0.0 : state.s[i], map,
                   f.row(k));
    y[k] = obs.y[i];
    ++k;
  }
  return detail::ridge_least_squares(f, y, ridge);
}

inline double predict_outcome(std::span<const double> coefs,
                              std::span<const double> x_i, double s_i,
                              const FeatureMapSpec& map) {
  std::vector<double> feat(coefs.size());
  build_features(x_i, s_i, map, feat);
  return dot(feat, coefs);
}

// Fitted working models plus the settings needed to evaluate them.
struct NuisanceModels {
  std::vector<double> propensity;
  std::vector<double> mu1;
  std::vector<double> mu0;
  FeatureMapSpec propensity_map;
  FeatureMapSpec outcome_map;
  double trunc_lo = 0.01;
  double trunc_hi = 0.99;
};

}  // namespace sdr
