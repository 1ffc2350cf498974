#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sdr/errors.hpp"

namespace sdr {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kSqrt2Pi = 2.50662827463100050242;

// --- scalar helpers ---------------------------------------------------------

// Numerically stable logistic function.  Both branches share exp(-|z|), so
// sigmoid(z) + sigmoid(-z) == 1 up to one rounding each and extreme arguments
// underflow cleanly to 0 or 1 instead of producing NaN.
inline double sigmoid(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow; used by the logistic log-likelihood.
inline double softplus(double z) {
  if (z > 36.0) return z;
  if (z < -36.0) return std::exp(z);
  return std::log1p(std::exp(z));
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / kSqrt2Pi;
}

namespace detail {

// Acklam's rational approximation to the standard normal quantile
// (relative error ~1.15e-9), used as the seed for a Halley refinement.
inline double normal_quantile_seed(double p) {
  static constexpr double a[6] = {
      -3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {
      -5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[6] = {
      -7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {
      7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
            c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
             c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r +
          a[5]) *
         q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace detail

// Standard normal quantile: rational seed plus one Halley step against the
// erfc-based CDF, giving ~1e-15 accuracy over the full open interval.  A pure
// deterministic transform, so sampling built on it is reproducible bit for
// bit across runs.
inline double normal_quantile(double p) {
  const double x0 = detail::normal_quantile_seed(p);
  const double e = normal_cdf(x0) - p;
  const double u = e * kSqrt2Pi * std::exp(0.5 * x0 * x0);
  return x0 - u / (1.0 + 0.5 * x0 * u);
}

// --- deterministic splittable RNG -------------------------------------------

// Counter-based 64-bit generator in the splitmix style: the state walks by a
// fixed odd constant and every output is an avalanche mix of the state.  The
// sequence depends only on (seed, stream_id, draw index), so sub-streams with
// distinct ids are independent and results never depend on thread schedule or
// platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : seed_(seed), stream_id_(stream_id) {
    state_ = mix(seed ^ 0x9e3779b97f4a7c15ull);
    state_ = mix(state_ ^ mix(stream_id ^ 0xbf58476d1ce4e5b9ull));
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  // Uniform on the open interval (0, 1); never returns an exact endpoint, so
  // quantile transforms stay finite.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() { return normal_quantile(uniform01()); }

  // Logistic(0, scale) via inverse CDF.
  double logistic(double scale) {
    const double u = uniform01();
    return scale * std::log(u / (1.0 - u));
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Child stream keyed by `key`; independent of this stream's future draws.
  RngStream substream(std::uint64_t key) const {
    return RngStream(seed_, combine(stream_id_, key));
  }

  // Order-sensitive avalanche combine for building stream ids from several
  // integers (cell coordinates, replication index, ...).
  static std::uint64_t combine(std::uint64_t a, std::uint64_t b) {
    return mix(a + 0x9e3779b97f4a7c15ull * mix(b + 0x632be59bd9b4e019ull));
  }

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t state_;
};

inline std::vector<double> sample_standard_normal(RngStream& rng,
                                                  std::size_t count) {
  std::vector<double> out(count);
  for (auto& v : out) v = rng.normal();
  return out;
}

// --- dense matrix ------------------------------------------------------------

// Minimal row-major dense matrix; just enough for feature building and the
// small normal-equation solves this project needs.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<double> row(std::size_t i) {
    return {data_.data() + i * cols_, cols_};
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Solves a * x = b for symmetric positive definite a by Cholesky
// factorization.  A pivot at or below 1e-12 aborts with NotPositiveDefinite:
// that signals collinear features, and the caller should add a ridge term
// rather than trust a garbage solve.
inline std::vector<double> solve_spd(const Matrix& a,
                                     std::span<const double> b) {
  const std::size_t p = a.rows();
  if (a.cols() != p || b.size() != p)
    throw std::invalid_argument("solve_spd: dimension mismatch");
  constexpr double kPivotFloor = 1e-12;

  Matrix l(p, p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > kPivotFloor))
      throw NotPositiveDefinite("solve_spd: pivot " + std::to_string(diag) +
                                " at column " + std::to_string(j));
    const double ljj = std::sqrt(diag);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < p; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }

  // forward then backward substitution
  std::vector<double> x(b.begin(), b.end());
  for (std::size_t i = 0; i < p; ++i) {
    double s = x[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x[k];
    x[i] = s / l(i, i);
  }
  for (std::size_t ii = p; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t k = ii + 1; k < p; ++k) s -= l(k, ii) * x[k];
    x[ii] = s / l(ii, ii);
  }
  return x;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace sdr
