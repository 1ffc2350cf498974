#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "sdr/domain.hpp"
#include "sdr/estimator.hpp"
#include "sdr/nuisance.hpp"

namespace sdr {

// Classical estimators for the benchmark comparisons.  All of them condition
// on covariates only: the equilibrium state never enters their models, which
// is exactly the blind spot the strategic estimator addresses.  Feature
// transforms still follow cfg so the misspecification scenarios apply to
// every method alike.

inline EstimateReport estimate_ipw(const Observed& obs, const SdrConfig& cfg) {
  validate_config(cfg);
  require_both_arms(obs);
  FeatureMapSpec map = cfg.propensity_map;
  map.include_state = false;

  EquilibriumState unused;
  unused.s.assign(obs.n(), 0.0);
  const auto coefs = fit_propensity(obs, unused, map, cfg.ridge);
  const Matrix f = build_feature_matrix(obs.x, unused.s, map);

  const std::size_t n = obs.n();
  std::vector<double> psi(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e =
        std::clamp(sigmoid(dot(f.row(i), coefs)), cfg.trunc_lo, cfg.trunc_hi);
    psi[i] = obs.t[i] ? obs.y[i] / e : -obs.y[i] / (1.0 - e);
    sum += psi[i];
  }
  return detail::make_report(sum / static_cast<double>(n), std::move(psi),
                             cfg.ci_level, 1, true, "IPW");
}

// Augmented IPW is the non-strategic doubly robust estimator by definition;
// sharing the code path keeps the two numerically identical.
inline EstimateReport estimate_aipw(const Observed& obs,
                                    const SdrConfig& cfg) {
  return run_dr_nonstrategic(obs, cfg, "AIPW");
}

// Nearest-neighbor propensity score matching with replacement, one match per
// treated unit; ties resolve to the lower control index.  The estimand is the
// effect on the treated, flagged in the method name.
inline EstimateReport estimate_matching(const Observed& obs,
                                        const SdrConfig& cfg) {
  validate_config(cfg);
  require_both_arms(obs);
  FeatureMapSpec map = cfg.propensity_map;
  map.include_state = false;

  EquilibriumState unused;
  unused.s.assign(obs.n(), 0.0);
  const auto coefs = fit_propensity(obs, unused, map, cfg.ridge);
  const Matrix f = build_feature_matrix(obs.x, unused.s, map);

  const std::size_t n = obs.n();
  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i)
    score[i] = std::clamp(sigmoid(dot(f.row(i), coefs)), cfg.trunc_lo,
                          cfg.trunc_hi);

  std::vector<std::size_t> treated, controls;
  for (std::size_t i = 0; i < n; ++i)
    (obs.t[i] ? treated : controls).push_back(i);
  if (treated.empty()) throw ArmTooSmall("estimate_matching: no treated units");
  if (controls.empty()) throw ArmTooSmall("estimate_matching: no controls");

  std::vector<double> diff(treated.size());
  for (std::size_t k = 0; k < treated.size(); ++k) {
    const std::size_t i = treated[k];
    std::size_t best = controls[0];
    double best_dist = std::abs(score[i] - score[best]);
    for (std::size_t j : controls) {  // ascending index: ties keep the first
      const double dist = std::abs(score[i] - score[j]);
      if (dist < best_dist) {
        best_dist = dist;
        best = j;
      }
    }
    diff[k] = obs.y[i] - obs.y[best];
  }

  double tau = 0.0;
  for (double v : diff) tau += v;
  tau /= static_cast<double>(diff.size());

  // Influence scaled so its dispersion reproduces the matched-pair-difference
  // variance over the treated count, while its mean stays the estimate.
  std::vector<double> psi(n, tau);
  const double scale =
      static_cast<double>(n) / static_cast<double>(treated.size());
  for (std::size_t k = 0; k < treated.size(); ++k)
    psi[treated[k]] = tau + scale * (diff[k] - tau);
  return detail::make_report(tau, std::move(psi), cfg.ci_level, 1, true,
                             "Matching(ATT)");
}

// One pooled ridge regression of y on (1, x, t); the effect estimate is the
// treatment coefficient, with a regression-coefficient influence function.
inline EstimateReport estimate_s_learner(const Observed& obs,
                                         const SdrConfig& cfg) {
  validate_config(cfg);
  require_both_arms(obs);
  FeatureMapSpec map = cfg.outcome_map;
  map.include_state = false;

  const std::size_t n = obs.n();
  const std::size_t base = feature_count(obs.dim(), map);
  const std::size_t p = base + 1;  // + treatment column
  Matrix f(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    build_features(obs.x.row(i), 0.0, map, f.row(i).subspan(0, base));
    f(i, base) = static_cast<double>(obs.t[i]);
  }
  const auto beta = detail::ridge_least_squares(f, obs.y, cfg.ridge);
  const double tau = beta[base];

  // influence of the t-coefficient: z' f_i r_i with (G + ridge D) z = n e_t
  Matrix g(p, p);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = f.row(i);
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = a; b < p; ++b) g(a, b) += row[a] * row[b];
  }
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = 0; b < a; ++b) g(a, b) = g(b, a);
  for (std::size_t j = 1; j < p; ++j) g(j, j) += cfg.ridge;
  std::vector<double> unit(p, 0.0);
  unit[base] = static_cast<double>(n);
  const auto z = solve_spd(g, unit);

  std::vector<double> psi(n);
  double mean_c = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double resid = obs.y[i] - dot(f.row(i), beta);
    psi[i] = dot(f.row(i), z) * resid;
    mean_c += psi[i];
  }
  mean_c /= static_cast<double>(n);
  for (auto& v : psi) v = tau + (v - mean_c);
  return detail::make_report(tau, std::move(psi), cfg.ci_level, 1, true,
                             "S-Learner");
}

// Separate per-arm ridge regressions on (1, x); the estimate averages the
// predicted outcome contrast over all units.
inline EstimateReport estimate_t_learner(const Observed& obs,
                                         const SdrConfig& cfg) {
  validate_config(cfg);
  require_both_arms(obs);
  FeatureMapSpec map = cfg.outcome_map;
  map.include_state = false;

  EquilibriumState unused;
  unused.s.assign(obs.n(), 0.0);
  const auto c1 = fit_outcome_arm(obs, unused, 1, map, cfg.ridge);
  const auto c0 = fit_outcome_arm(obs, unused, 0, map, cfg.ridge);
  const Matrix f = build_feature_matrix(obs.x, unused.s, map);

  const std::size_t n = obs.n();
  std::vector<double> psi(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    psi[i] = dot(f.row(i), c1) - dot(f.row(i), c0);
    sum += psi[i];
  }
  return detail::make_report(sum / static_cast<double>(n), std::move(psi),
                             cfg.ci_level, 1, true, "T-Learner");
}

}  // namespace sdr
