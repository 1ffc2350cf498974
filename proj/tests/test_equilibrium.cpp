#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sdr/datagen.hpp"
#include "sdr/equilibrium.hpp"

using namespace sdr;

TEST_CASE("state_from_treatments is the leave-one-out adoption rate") {
  const auto st = state_from_treatments({1, 0, 1});
  REQUIRE(st.s.size() == 3);
  CHECK(st.s[0] == 0.5);
  CHECK(st.s[1] == 1.0);
  CHECK(st.s[2] == 0.5);
  CHECK_THAT(st.mean_rate, Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-15));
  CHECK(st.iterations == 0);
  CHECK(st.converged);
  CHECK_THROWS_AS(state_from_treatments({1}), std::invalid_argument);
}

TEST_CASE("leave-one-out identity holds for random profiles") {
  RngStream rng(5, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 2 + rng.next_u64() % 40;
    std::vector<int> t(n);
    for (auto& v : t) v = rng.bernoulli(0.3) ? 1 : 0;
    const int total = std::accumulate(t.begin(), t.end(), 0);
    const auto st = state_from_treatments(t);
    for (std::size_t i = 0; i < n; ++i)
      CHECK_THAT(st.s[i] * double(n - 1) + t[i],
                 Catch::Matchers::WithinAbs(double(total), 1e-12));
  }
}

TEST_CASE("choice model recovers the coefficients it was fit on") {
  const std::size_t n = 20000, d = 2;
  const std::vector<double> truth = {0.5, 1.0, -1.0, 0.8};
  RngStream rng(17, 0);
  Matrix x(n, d);
  for (auto& v : x.data()) v = rng.normal();
  EquilibriumState state;
  state.s.resize(n);
  for (auto& s : state.s) s = rng.uniform01();
  std::vector<int> t(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double eta =
        truth[0] + truth[1] * x(i, 0) + truth[2] * x(i, 1) + truth[3] * state.s[i];
    t[i] = rng.bernoulli(sigmoid(eta)) ? 1 : 0;
  }
  const auto coef = estimate_payoff_params(t, x, state);
  REQUIRE(coef.size() == d + 2);
  for (std::size_t j = 0; j < coef.size(); ++j)
    CHECK_THAT(coef[j], Catch::Matchers::WithinAbs(truth[j], 0.15));
}

TEST_CASE("choice model fits near zero on pure noise") {
  const std::size_t n = 20000, d = 2;
  RngStream rng(29, 0);
  Matrix x(n, d);
  for (auto& v : x.data()) v = rng.normal();
  EquilibriumState state;
  state.s.assign(n, 0.0);
  for (auto& s : state.s) s = rng.uniform01();
  std::vector<int> t(n);
  for (auto& v : t) v = rng.bernoulli(0.5) ? 1 : 0;
  const auto coef = estimate_payoff_params(t, x, state);
  for (double c : coef) CHECK_THAT(c, Catch::Matchers::WithinAbs(0.0, 0.1));
}

TEST_CASE("degenerate column needs the ridge") {
  const std::size_t n = 200, d = 2;
  RngStream rng(31, 0);
  Matrix x(n, d, 0.0);
  for (std::size_t i = 0; i < n; ++i) x(i, 0) = rng.normal();
  // column 1 stays identically zero
  EquilibriumState state;
  state.s.resize(n);
  for (auto& s : state.s) s = rng.uniform01();
  std::vector<int> t(n);
  for (auto& v : t) v = rng.bernoulli(0.5) ? 1 : 0;

  CHECK_THROWS_AS(estimate_payoff_params(t, x, state, 0.0),
                  NotPositiveDefinite);
  const auto coef = estimate_payoff_params(t, x, state, 1e-6);
  for (double c : coef) CHECK(std::isfinite(c));
}

TEST_CASE("null coefficients pull the state to one half exactly") {
  const std::size_t n = 50, d = 3;
  Matrix x(n, d, 0.7);
  EquilibriumState prev;
  prev.s.assign(n, 0.123);
  prev.iterations = 4;
  const std::vector<double> theta(d + 2, 0.0);
  const auto next = update_equilibrium(theta, x, prev, 1.0);
  for (double s : next.s) CHECK(s == 0.5);
  CHECK_THAT(next.mean_rate, Catch::Matchers::WithinAbs(0.5, 1e-15));
  CHECK(next.iterations == 5);
  CHECK_FALSE(next.converged);
}

TEST_CASE("update_equilibrium validates its inputs") {
  Matrix x(4, 2, 0.0);
  EquilibriumState prev;
  prev.s.assign(4, 0.5);
  const std::vector<double> theta(4, 0.0);
  CHECK_THROWS_AS(update_equilibrium({0.0, 0.0}, x, prev, 0.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(update_equilibrium(theta, x, prev, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(update_equilibrium(theta, x, prev, 1.5),
                  std::invalid_argument);
  EquilibriumState bad;
  bad.s.assign(3, 0.5);
  CHECK_THROWS_AS(update_equilibrium(theta, x, bad, 0.5),
                  std::invalid_argument);
}

TEST_CASE("damped mean-field iteration settles at a fixed point") {
  const std::size_t n = 300, d = 2;
  RngStream rng(41, 0);
  Matrix x(n, d);
  for (auto& v : x.data()) v = rng.normal();
  const std::vector<double> theta = {0.2, 0.6, -0.4, 0.8};

  EquilibriumState a;
  a.s.assign(n, 0.0);
  EquilibriumState b;
  b.s.assign(n, 1.0);
  for (int k = 0; k < 400; ++k) {
    a = update_equilibrium(theta, x, a, 0.5);
    b = update_equilibrium(theta, x, b, 0.5);
  }
  CHECK(a.iterations == 400);

  // one more step barely moves it, and both starts found the same limit
  const auto a2 = update_equilibrium(theta, x, a, 0.5);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK_THAT(a2.s[i], Catch::Matchers::WithinAbs(a.s[i], 1e-12));
    CHECK_THAT(b.s[i], Catch::Matchers::WithinAbs(a.s[i], 1e-10));
  }
}

TEST_CASE("dominant adoption leaves a single equilibrium") {
  const std::size_t n = 2;
  Matrix x(n, 1, 0.0);
  const std::vector<double> u(n, 0.0), eps(n, 0.0);
  PayoffParameters p;
  p.tau_direct = 2.0;
  p.alpha = 0.5;
  p.beta = {0.0};
  p.gamma = {0.0};
  const auto nash = brute_force_nash(PayoffInputs{x, u, eps}, p);
  REQUIRE(nash.size() == 1);
  CHECK(nash[0] == std::vector<int>{1, 1});
}

TEST_CASE("coordination payoffs admit both corner equilibria") {
  const std::size_t n = 2;
  Matrix x(n, 1, 0.0);
  const std::vector<double> u(n, 0.0), eps(n, 0.0);
  PayoffParameters p;
  p.tau_direct = -0.4;
  p.alpha = 0.8;
  p.beta = {0.0};
  p.gamma = {0.0};
  auto nash = brute_force_nash(PayoffInputs{x, u, eps}, p);
  std::sort(nash.begin(), nash.end());
  REQUIRE(nash.size() == 2);
  CHECK(nash[0] == std::vector<int>{0, 0});
  CHECK(nash[1] == std::vector<int>{1, 1});
}

TEST_CASE("enumeration refuses instances past twenty agents") {
  const std::size_t n = 21;
  Matrix x(n, 1, 0.0);
  const std::vector<double> u(n, 0.0), eps(n, 0.0);
  CHECK_THROWS_AS(
      brute_force_nash(PayoffInputs{x, u, eps}, PayoffParameters::defaults(1, 0.5)),
      TooLarge);
}

TEST_CASE("best-response dynamics land inside the enumerated Nash set") {
  const std::size_t n = 6, d = 2;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    RngStream rng(seed, 77);
    Matrix x(n, d);
    for (auto& v : x.data()) v = rng.normal();
    std::vector<double> u = sample_standard_normal(rng, n);
    const auto p = PayoffParameters::defaults(d, 0.8);
    std::vector<double> eps(n);
    for (auto& e : eps) e = rng.logistic(p.payoff_noise);
    std::vector<int> init(n);
    for (auto& v : init) v = rng.bernoulli(0.5) ? 1 : 0;

    const PayoffInputs in{x, u, eps};
    const auto [t, st] = solve_equilibrium(in, p, init, 200);
    REQUIRE(st.converged);
    const auto nash = brute_force_nash(in, p);
    CHECK(std::find(nash.begin(), nash.end(), t) != nash.end());
  }
}
