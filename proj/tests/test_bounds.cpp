#include <gtest/gtest.h>

#include <boost/math/special_functions/beta.hpp>
#include <cmath>

#include "pore/bounds.hpp"
#include "pore/combinatorics.hpp"
#include "pore/rng.hpp"

using namespace pore;

namespace {

// Plain bisection on boost's regularized incomplete beta.
double boost_quantile(double beta, double a, double b) {
  double lo = 0, hi = 1;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (boost::math::ibeta(a, b, mid) < beta)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(IncompleteBeta, MatchesBoost) {
  Rng rng(1);
  for (int k = 0; k < 2000; ++k) {
    const double a = std::exp(rng.uniform(std::log(0.2), std::log(5000.0)));
    const double b = std::exp(rng.uniform(std::log(0.2), std::log(5000.0)));
    const double x = rng.uniform();
    EXPECT_NEAR(incomplete_beta(x, a, b), boost::math::ibeta(a, b, x), 1e-10)
        << "a=" << a << " b=" << b << " x=" << x;
  }
  EXPECT_EQ(incomplete_beta(0.0, 2, 3), 0.0);
  EXPECT_EQ(incomplete_beta(1.0, 2, 3), 1.0);
}

TEST(BetaQuantile, ClosedForms) {
  EXPECT_NEAR(beta_quantile(0.3, 1, 1), 0.3, 1e-12);
  for (double a : {0.5, 1.0, 3.0, 40.0, 1000.0}) EXPECT_NEAR(beta_quantile(0.5, a, a), 0.5, 1e-12);
  EXPECT_NEAR(beta_quantile(0.001, 100, 1), std::pow(0.001, 0.01), 1e-12);
  EXPECT_NEAR(beta_quantile(0.001, 100, 1), 0.93325, 1e-5);
  // Beta(1, b) has CDF 1 - (1 - x)^b.
  EXPECT_NEAR(beta_quantile(0.2, 1, 7), 1 - std::pow(0.8, 1.0 / 7), 1e-12);
}

TEST(BetaQuantile, ResidualAndMonotone) {
  Rng rng(2);
  for (int k = 0; k < 500; ++k) {
    const double a = 1 + static_cast<double>(rng.below(3000));
    const double b = 1 + static_cast<double>(rng.below(3000));
    const double beta = std::exp(rng.uniform(std::log(1e-9), std::log(0.999)));
    const double q = beta_quantile(beta, a, b);
    EXPECT_NEAR(q, boost_quantile(beta, a, b), 1e-10);
    EXPECT_LE(beta_quantile(beta * 0.9, a, b), q);
  }
}

TEST(BetaQuantile, RejectsBadArguments) {
  EXPECT_THROW(beta_quantile(0.0, 1, 1), Error);
  EXPECT_THROW(beta_quantile(1.0, 1, 1), Error);
  EXPECT_THROW(beta_quantile(0.5, 0, 1), Error);
  EXPECT_THROW(beta_quantile(0.5, 1, -1), Error);
}

TEST(ClopperPearson, LowerBound) {
  EXPECT_EQ(cp_lower(0, 100, 0.01), 0.0);
  const double budget = 1e-5 / 1682;
  EXPECT_NEAR(cp_lower(100, 100, budget), std::pow(budget, 0.01), 1e-12);
  EXPECT_NEAR(cp_lower(50, 100, 0.025), 0.3983, 1e-4);
  EXPECT_NEAR(cp_lower(50, 100, 0.025), boost_quantile(0.025, 50, 51), 1e-12);
}

TEST(ClopperPearson, UpperBound) {
  EXPECT_EQ(cp_upper(100, 100, 0.01), 1.0);
  EXPECT_NEAR(cp_upper(0, 200, 0.01), 1 - std::pow(0.01, 1.0 / 200), 1e-15);
  EXPECT_NEAR(cp_upper(0, 200, 0.01, UpperConvention::Textbook), 1 - std::pow(0.01, 1.0 / 200),
              1e-12);
  EXPECT_NEAR(cp_upper(30, 100, 0.01), boost_quantile(0.99, 30, 71), 1e-12);
  EXPECT_NEAR(cp_upper(30, 100, 0.01, UpperConvention::Textbook), boost_quantile(0.99, 31, 70),
              1e-12);
  // default shapes sit below the textbook ones
  EXPECT_LT(cp_upper(30, 100, 0.01), cp_upper(30, 100, 0.01, UpperConvention::Textbook));
}

TEST(ClopperPearson, MonotoneAndOrdered) {
  for (auto conv : {UpperConvention::Paper, UpperConvention::Textbook}) {
    double prev_lo = -1, prev_hi = -1;
    for (std::uint64_t k = 0; k <= 60; ++k) {
      const double lo = cp_lower(k, 60, 1e-4), hi = cp_upper(k, 60, 1e-4, conv);
      EXPECT_GE(lo, prev_lo);
      EXPECT_GE(hi, prev_hi);
      EXPECT_LE(lo, hi);
      EXPECT_LE(lo, static_cast<double>(k) / 60);
      EXPECT_GE(hi, static_cast<double>(k) / 60);
      EXPECT_GE(lo, 0.0);
      EXPECT_LE(hi, 1.0);
      prev_lo = lo;
      prev_hi = hi;
    }
  }
}

TEST(ClopperPearson, ConventionNames) {
  EXPECT_EQ(parse_upper_convention("paper"), UpperConvention::Paper);
  EXPECT_EQ(parse_upper_convention("textbook"), UpperConvention::Textbook);
  EXPECT_THROW(parse_upper_convention("wilson"), Error);
}

TEST(EstimateBounds, ZeroCounts) {
  VoteCounts v(2, 5);
  v.T = 200;
  v.s = 1;
  v.n_prime = 1;
  const std::vector<ItemId> target{1, 3};
  const auto b = estimate_bounds(v, 0, target, 0.05);
  ASSERT_EQ(b.lower.size(), 2u);
  ASSERT_EQ(b.upper.size(), 3u);
  for (const auto& x : b.lower) EXPECT_EQ(x.value, 0.0);
  const double zero_upper = cp_upper(0, 200, 0.05 / 5);
  for (const auto& x : b.upper) EXPECT_EQ(x.value, zero_upper);
  EXPECT_EQ(b.upper[0].item, 0u);
  EXPECT_EQ(b.upper[1].item, 2u);
  EXPECT_EQ(b.upper[2].item, 4u);
  EXPECT_THROW(estimate_bounds(v, 0, {}, 0.05), Error);
  EXPECT_THROW(estimate_bounds(v, 0, target, 0.0), Error);
}

TEST(EstimateBounds, BonferroniBudget) {
  const double alpha_u = 0.001 / 943;
  EXPECT_NEAR(alpha_u, 1.0604e-6, 1e-10);
  VoteCounts v(1, 4);
  v.T = 1000;
  v.counts = {10, 500, 0, 990};
  const std::vector<ItemId> target{1, 3};
  const auto b = estimate_bounds(v, 0, target, alpha_u);
  EXPECT_NEAR(b.alpha_u, alpha_u, 1e-18);
  EXPECT_EQ(b.m, 4u);
  EXPECT_EQ(b.lower[0].value, cp_lower(500, 1000, alpha_u / 4));
  EXPECT_EQ(b.upper[0].value, cp_upper(10, 1000, alpha_u / 4));
  for (const auto& x : b.lower) EXPECT_LE(x.value, v.counts[x.item] / 1000.0);
  for (const auto& x : b.upper) EXPECT_GE(x.value, v.counts[x.item] / 1000.0);
}

TEST(Combinatorics, Binomials) {
  EXPECT_EQ(binomial(5, 2), 10);
  EXPECT_EQ(binomial(6, 0), 1);
  EXPECT_EQ(binomial(3, 5), 0);
  EXPECT_EQ(*binomial_u64(52, 5), 2598960u);
  EXPECT_FALSE(binomial_u64(943, 200).has_value());
  EXPECT_GT(binomial(943, 200), BigInt(1) << 600);
}

TEST(Combinatorics, RationalConversions) {
  EXPECT_EQ(to_rational(0.5), Rational(1, 2));
  EXPECT_EQ(to_rational(-3.0), Rational(-3));
  EXPECT_EQ(to_double(to_rational(0.1)), 0.1);
  EXPECT_EQ(to_double(Rational(1, 3)), 1.0 / 3.0);
  const Rational huge(binomial(943, 200), binomial(943, 199) * 7);
  EXPECT_NEAR(to_double(huge), 744.0 / 200.0 / 7.0, 1e-15);
}

TEST(Context, ZeroAttackHasNoSlack) {
  const auto approx = make_context(943, 0, 200, false);
  EXPECT_EQ(approx.sigma, 0.0);
  EXPECT_EQ(approx.log_ratio, 0.0);
  const auto ctx = make_context(5, 0, 2, true);
  EXPECT_EQ(ctx.sigma_exact, Rational(0));
}

TEST(Context, HandArithmetic) {
  const auto ctx = make_context(5, 1, 2, true);
  EXPECT_EQ(ctx.c_n_s, 10);
  EXPECT_EQ(ctx.c_np_s, 15);
  EXPECT_EQ(ctx.sigma_exact, Rational(1, 10));
  EXPECT_NEAR(std::exp(ctx.log_ratio), 1.5, 1e-15);
  EXPECT_NEAR(ctx.sigma_estimate, 0.1, 1e-15);
  EXPECT_GE(ctx.sigma, ctx.sigma_estimate);
}

TEST(Context, LogSpaceAgreesWithExact) {
  for (std::uint64_t e = 0; e <= 50; ++e) {
    const auto ctx = make_context(943, e, 200, true);
    const double exact = to_double(ctx.sigma_exact);
    if (e == 0) {
      EXPECT_EQ(ctx.sigma_estimate, 0.0);
      continue;
    }
    EXPECT_LE(std::abs(ctx.sigma_estimate - exact) / exact, 1e-12) << "e=" << e;
    const double ratio = to_double(Rational(ctx.c_np_s, ctx.c_n_s));
    EXPECT_LE(std::abs(std::exp(ctx.log_ratio) - ratio) / ratio, 1e-12) << "e=" << e;
  }
}

TEST(Context, SigmaIncreasesWithEAndS) {
  double prev = -1;
  for (std::uint64_t e = 0; e <= 200; ++e) {
    const double s = make_context(943, e, 200, false).sigma_estimate;
    EXPECT_GT(s, prev);
    prev = s;
  }
  prev = -1;
  for (std::uint64_t s = 1; s <= 300; s += 7) {
    const double v = make_context(943, 5, s, false).sigma_estimate;
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(Context, OverflowGivesInfinity) {
  const auto ctx = make_context(943, 100000, 500, false);
  EXPECT_TRUE(std::isinf(ctx.sigma));
  EXPECT_THROW(make_context(5, 1, 6, false), Error);
  EXPECT_THROW(make_context(5, 1, 0, false), Error);
}

TEST(Rounding, FloorAndCeilStar) {
  const auto ctx = make_context(5, 0, 2, true);  // C(5,2) = 10
  EXPECT_EQ(round_lower_star(Rational(1, 2), ctx), Rational(1, 2));
  EXPECT_EQ(round_lower_star(Rational(51, 100), ctx), Rational(1, 2));
  EXPECT_EQ(round_upper_star(Rational(51, 100), ctx), Rational(3, 5));
  for (int p : {0, 1}) {
    EXPECT_EQ(round_lower_star(Rational(p), ctx), Rational(p));
    EXPECT_EQ(round_upper_star(Rational(p), ctx), Rational(p));
  }
  Rng rng(4);
  for (int k = 0; k < 200; ++k) {
    const Rational p = to_rational(rng.uniform());
    const Rational lo = round_lower_star(p, ctx), hi = round_upper_star(p, ctx);
    EXPECT_LE(lo, p);
    EXPECT_GE(hi, p);
    EXPECT_LT(p - lo, Rational(1, 10));
    EXPECT_LT(hi - p, Rational(1, 10));
  }
  const auto approx = make_context(5, 0, 2, false);
  EXPECT_EQ(round_lower_star(0.51, approx), 0.51);
  EXPECT_EQ(round_upper_star(0.51, approx), 0.51);
}
