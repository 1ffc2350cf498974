#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "sdr/datagen.hpp"
#include "sdr/domain.hpp"
#include "sdr/nuisance.hpp"
#include "sdr/numerics.hpp"

namespace sdr {

// Leave-one-out mean treatment exposure of an observed profile.
inline EquilibriumState state_from_treatments(const std::vector<int>& t) {
  const std::size_t n = t.size();
  if (n < 2)
    throw std::invalid_argument("state_from_treatments: need n >= 2");
  const int total = std::accumulate(t.begin(), t.end(), 0);
  EquilibriumState st;
  st.s.resize(n);
  const double inv = 1.0 / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) st.s[i] = (total - t[i]) * inv;
  st.mean_rate = static_cast<double>(total) / static_cast<double>(n);
  st.iterations = 0;
  st.converged = true;
  return st;
}

// Structural choice model: logistic log-likelihood of the observed decisions
// on (intercept, covariates, state), maximized by the shared penalized IRLS.
// Returns the coefficient vector (length 2 + d).
inline std::vector<double> estimate_payoff_params(
    const std::vector<int>& t, const Matrix& x, const EquilibriumState& state,
    double ridge = 1e-6, const std::vector<double>* warm_start = nullptr) {
  const FeatureMapSpec map{/*include_state=*/true, FeatureTransform::identity};
  const Matrix f = build_feature_matrix(x, state.s, map);
  return detail::logistic_irls(f, t, ridge, warm_start);
}

// One damped mean-field step: each agent's state moves toward the
// leave-one-out mean of the model-implied choice probabilities.
inline EquilibriumState update_equilibrium(const std::vector<double>& theta,
                                           const Matrix& x,
                                           const EquilibriumState& prev,
                                           double damping) {
  const std::size_t n = x.rows(), d = x.cols();
  if (theta.size() != d + 2)
    throw std::invalid_argument("update_equilibrium: theta length != d + 2");
  if (prev.s.size() != n)
    throw std::invalid_argument("update_equilibrium: state length != n");
  if (!(damping > 0.0 && damping <= 1.0))
    throw std::invalid_argument("update_equilibrium: damping outside (0, 1]");

  std::vector<double> prob(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double eta = theta[0] + theta[d + 1] * prev.s[i];
    const auto row = x.row(i);
    for (std::size_t j = 0; j < d; ++j) eta += theta[1 + j] * row[j];
    prob[i] = sigmoid(eta);
    total += prob[i];
  }

  EquilibriumState next;
  next.s.resize(n);
  const double denom = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double target = (total - prob[i]) / denom;
    next.s[i] = (1.0 - damping) * prev.s[i] + damping * target;
  }
  next.mean_rate = total / static_cast<double>(n);
  next.iterations = prev.iterations + 1;
  next.converged = false;
  return next;
}

// Exhaustive pure-strategy Nash enumeration for oracle tests.  A profile is
// an equilibrium when no agent has a strictly improving unilateral deviation
// under the realized payoffs.  Refuses instances beyond n = 20.
inline std::vector<std::vector<int>> brute_force_nash(
    const PayoffInputs& in, const PayoffParameters& p) {
  const std::size_t n = in.u.size();
  if (n > 20)
    throw TooLarge("brute_force_nash: 2^n enumeration refused for n > 20");
  if (n < 2) throw std::invalid_argument("brute_force_nash: need n >= 2");

  const double inv = 1.0 / static_cast<double>(n - 1);
  std::vector<std::vector<int>> found;
  std::vector<int> t(n);
  for (std::uint64_t mask = 0; mask < (1ull << n); ++mask) {
    int adopters = 0;
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = static_cast<int>((mask >> i) & 1ull);
      adopters += t[i];
    }
    bool nash = true;
    for (std::size_t i = 0; i < n && nash; ++i) {
      const double mean_others = (adopters - t[i]) * inv;
      const double cur = payoff(t[i], mean_others, in.x.row(i), in.u[i],
                                in.eps[i], p);
      const double dev = payoff(1 - t[i], mean_others, in.x.row(i), in.u[i],
                                in.eps[i], p);
      nash = !(dev > cur);
    }
    if (nash) found.push_back(t);
  }
  return found;
}

}  // namespace sdr
