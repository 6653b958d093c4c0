#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "betareg/error.hpp"
#include "betareg/random.hpp"

namespace betareg {

namespace detail {

inline void require_positive(double x, const char* fn) {
  if (!(x > 0.0) || !std::isfinite(x))
    throw DomainError(std::string(fn) + ": argument must be positive and finite, got " +
                      std::to_string(x));
}

// Arguments at or above this value go straight to the asymptotic series.
inline constexpr double kAsymptoticCutoff = 15.0;

}  // namespace detail

// log Gamma(x) for x > 0: upward recurrence to x >= 15, then Stirling's series.
inline double log_gamma(double x) {
  detail::require_positive(x, "log_gamma");
  double shift = 0.0;
  double prod = 1.0;
  while (x < detail::kAsymptoticCutoff) {
    prod *= x;
    x += 1.0;
    // keep the running product well inside double range
    if (prod > 1e280) {
      shift += std::log(prod);
      prod = 1.0;
    }
  }
  shift += std::log(prod);
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Bernoulli terms B_{2k} / (2k(2k-1) x^{2k-1})
  const double series =
      inv * (1.0 / 12.0 +
             inv2 * (-1.0 / 360.0 +
                     inv2 * (1.0 / 1260.0 +
                             inv2 * (-1.0 / 1680.0 +
                                     inv2 * (1.0 / 1188.0 +
                                             inv2 * (-691.0 / 360360.0 +
                                                     inv2 * (1.0 / 156.0 +
                                                             inv2 * (-3617.0 / 122400.0))))))));
  const double half_log_2pi = 0.91893853320467274178;
  return (x - 0.5) * std::log(x) - x + half_log_2pi + series - shift;
}

// psi(x) = d/dx log Gamma(x).
inline double digamma(double x) {
  detail::require_positive(x, "digamma");
  double acc = 0.0;
  while (x < detail::kAsymptoticCutoff) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv2 = 1.0 / (x * x);
  const double series =
      inv2 * (-1.0 / 12.0 +
              inv2 * (1.0 / 120.0 +
                      inv2 * (-1.0 / 252.0 +
                              inv2 * (1.0 / 240.0 +
                                      inv2 * (-1.0 / 132.0 +
                                              inv2 * (691.0 / 32760.0 + inv2 * (-1.0 / 12.0)))))));
  return acc + std::log(x) - 0.5 / x + series;
}

// psi'(x).
inline double trigamma(double x) {
  detail::require_positive(x, "trigamma");
  double acc = 0.0;
  while (x < detail::kAsymptoticCutoff) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv * (1.0 + inv * (0.5 +
                          inv * (1.0 / 6.0 +
                                 inv2 * (-1.0 / 30.0 +
                                         inv2 * (1.0 / 42.0 +
                                                 inv2 * (-1.0 / 30.0 +
                                                         inv2 * (5.0 / 66.0 +
                                                                 inv2 * (-691.0 / 2730.0 +
                                                                         inv2 * (7.0 / 6.0)))))))));
  return acc + series;
}

// Beta law in the mean/precision parameterization: Beta(mu*phi, (1-mu)*phi).
class BetaParams {
 public:
  BetaParams(double mu, double phi) : mu_(mu), phi_(phi) {
    if (!(mu > 0.0 && mu < 1.0))
      throw DomainError("beta mean must lie in (0,1), got " + std::to_string(mu));
    if (!(phi > 0.0) || !std::isfinite(phi))
      throw DomainError("beta precision must be positive, got " + std::to_string(phi));
  }

  double mu() const noexcept { return mu_; }
  double phi() const noexcept { return phi_; }
  double shape_a() const noexcept { return mu_ * phi_; }
  double shape_b() const noexcept { return (1.0 - mu_) * phi_; }
  double variance() const noexcept { return mu_ * (1.0 - mu_) / (1.0 + phi_); }

 private:
  double mu_;
  double phi_;
};

inline double beta_log_density(double y, const BetaParams& p) {
  if (!(y > 0.0 && y < 1.0))
    throw DomainError("beta response must lie in (0,1), got " + std::to_string(y));
  const double a = p.shape_a();
  const double b = p.shape_b();
  return log_gamma(p.phi()) - log_gamma(a) - log_gamma(b) + (a - 1.0) * std::log(y) +
         (b - 1.0) * std::log1p(-y);
}

// Two-gamma construction. Draws that round to exactly 0 or 1 (possible only
// for very small shapes) are redrawn so the result stays in the open interval.
inline double beta_sample(const BetaParams& p, RandomStream& stream) {
  for (;;) {
    const double x = stream.gamma(p.shape_a());
    const double z = stream.gamma(p.shape_b());
    const double y = x / (x + z);
    if (y > 0.0 && y < 1.0) return y;
  }
}

}  // namespace betareg
