#pragma once

#include <cmath>
#include <limits>

#include "pore/common.hpp"

namespace pore {

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 100000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b) for a, b > 0.
inline double incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error("incomplete_beta: shapes must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

struct QuantileBracket {
  double lo;  // I_lo(a, b) <= beta
  double hi;  // I_hi(a, b) >= beta
};

/// Bisection bracket of width <= 2^-45 around the beta-quantile of
/// Beta(a, b). A fixed number of halvings keeps the result monotone in beta.
inline QuantileBracket beta_quantile_bracket(double beta, double a, double b) {
  if (!(beta > 0.0 && beta < 1.0)) throw Error("beta_quantile: level must lie in (0, 1)");
  if (!(a > 0.0) || !(b > 0.0)) throw Error("beta_quantile: shapes must be positive");
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 45; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (incomplete_beta(mid, a, b) < beta)
      lo = mid;
    else
      hi = mid;
  }
  return {lo, hi};
}

/// x with I_x(a, b) = beta, to absolute tolerance 1e-12.
inline double beta_quantile(double beta, double a, double b) {
  const auto br = beta_quantile_bracket(beta, a, b);
  return 0.5 * (br.lo + br.hi);
}

}  // namespace pore
