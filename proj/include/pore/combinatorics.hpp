#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>

#include <boost/multiprecision/cpp_int.hpp>

#include "pore/common.hpp"

namespace pore {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

/// Exact C(n, k).
inline BigInt binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  BigInt result = 1;
  for (std::uint64_t j = 1; j <= k; ++j) {
    result *= n - k + j;
    result /= j;  // exact: result is C(n-k+j, j) here
  }
  return result;
}

/// C(n, k) in 64 bits, or nullopt on overflow.
inline std::optional<std::uint64_t> binomial_u64(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 result = 1;
  for (std::uint64_t j = 1; j <= k; ++j) {
    result = result * (n - k + j) / j;
    if (result > std::numeric_limits<std::uint64_t>::max()) return std::nullopt;
  }
  return static_cast<std::uint64_t>(result);
}

/// Exact value of a finite double as a rational.
inline Rational to_rational(double x) {
  if (!std::isfinite(x)) throw Error("to_rational: non-finite value");
  if (x == 0.0) return Rational(0);
  int exp = 0;
  const double mant = std::frexp(x, &exp);  // x = mant * 2^exp, 0.5 <= |mant| < 1
  const auto scaled = static_cast<std::int64_t>(std::ldexp(mant, 53));
  exp -= 53;
  BigInt num = scaled;
  if (exp >= 0) return Rational(num << exp);
  return Rational(num, BigInt(1) << (-exp));
}

/// Nearest double to a rational of any magnitude (relative error <= 2^-52).
inline double to_double(const Rational& q) {
  BigInt num = boost::multiprecision::numerator(q);
  const BigInt den = boost::multiprecision::denominator(q);
  if (num == 0) return 0.0;
  const bool negative = num < 0;
  if (negative) num = -num;
  const long shift = 64 + static_cast<long>(boost::multiprecision::msb(den)) -
                     static_cast<long>(boost::multiprecision::msb(num));
  const BigInt quotient = shift >= 0 ? BigInt((num << shift) / den) : BigInt((num >> -shift) / den);
  const double value = std::ldexp(quotient.convert_to<double>(), static_cast<int>(-shift));
  return negative ? -value : value;
}

/// ln(C(n+e, s) / C(n, s)) = sum_{j<s} ln((n+e-j)/(n-j)).
inline double log_binomial_ratio(std::uint64_t n, std::uint64_t e, std::uint64_t s) {
  double acc = 0.0;
  for (std::uint64_t j = 0; j < s; ++j)
    acc += std::log1p(static_cast<double>(e) / static_cast<double>(n - j));
  return acc;
}

/// Sampling constants for certifying against e injected users when each
/// submatrix holds s of the n genuine users.
struct CombinatoricContext {
  std::uint64_t n = 0;
  std::uint64_t e = 0;
  std::uint64_t s = 0;
  double log_ratio = 0.0;       // ln(C(n', s) / C(n, s)), n' = n + e
  double sigma_estimate = 0.0;  // (s/n') C(n',s)/C(n,s) - s/n in doubles, +inf on overflow
  double sigma = 0.0;           // sigma_estimate rounded upward by (1 + 1e-12)
  bool exact = false;
  // Exact-mode members.
  BigInt c_n_s;
  BigInt c_np_s;
  Rational sigma_exact;

  std::uint64_t n_prime() const noexcept { return n + e; }
};

inline constexpr double kSigmaGuard = 1e-12;

inline CombinatoricContext make_context(std::uint64_t n, std::uint64_t e, std::uint64_t s,
                                        bool exact_mode) {
  if (s < 1 || s > n) throw Error("make_context: need 1 <= s <= n");
  CombinatoricContext ctx;
  ctx.n = n;
  ctx.e = e;
  ctx.s = s;
  ctx.exact = exact_mode;
  const double sd = static_cast<double>(s);
  const double np = static_cast<double>(n + e);
  if (e == 0) {
    ctx.log_ratio = 0.0;
    ctx.sigma_estimate = ctx.sigma = 0.0;
  } else {
    ctx.log_ratio = log_binomial_ratio(n, e, s);
    // exp overflows past ~709.78; s/n' < 1 cannot bring it back into range.
    if (ctx.log_ratio > 709.0) {
      ctx.sigma_estimate = ctx.sigma = kInf;
    } else {
      ctx.sigma_estimate = sd / np * std::exp(ctx.log_ratio) - sd / static_cast<double>(n);
      ctx.sigma = ctx.sigma_estimate * (1.0 + kSigmaGuard);
    }
  }
  if (exact_mode) {
    ctx.c_n_s = binomial(n, s);
    ctx.c_np_s = binomial(n + e, s);
    ctx.sigma_exact = Rational(BigInt(s) * ctx.c_np_s, BigInt(n + e) * ctx.c_n_s) - Rational(s, n);
  }
  return ctx;
}

/// floor(p * C(n,s)) / C(n,s).
inline Rational round_lower_star(const Rational& p, const CombinatoricContext& ctx) {
  if (!ctx.exact) throw Error("round_lower_star: exact mode context required");
  const BigInt scaled = boost::multiprecision::numerator(p) * ctx.c_n_s;
  const BigInt& den = boost::multiprecision::denominator(p);
  BigInt q = scaled / den;
  if (scaled < 0 && q * den != scaled) q -= 1;
  return Rational(q, ctx.c_n_s);
}

/// ceil(p * C(n,s)) / C(n,s).
inline Rational round_upper_star(const Rational& p, const CombinatoricContext& ctx) {
  if (!ctx.exact) throw Error("round_upper_star: exact mode context required");
  const BigInt scaled = boost::multiprecision::numerator(p) * ctx.c_n_s;
  const BigInt& den = boost::multiprecision::denominator(p);
  BigInt q = scaled / den;
  if (scaled > 0 && q * den != scaled) q += 1;
  return Rational(q, ctx.c_n_s);
}

// Approximate mode leaves probabilities on the real line: the rounding moves
// a value by less than 1/C(n,s), far below double resolution for every
// dataset-scale configuration.
inline double round_lower_star(double p, const CombinatoricContext&) { return p; }
inline double round_upper_star(double p, const CombinatoricContext&) { return p; }

}  // namespace pore
