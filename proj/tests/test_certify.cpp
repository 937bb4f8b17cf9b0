#include <gtest/gtest.h>

#include "pore/certify.hpp"
#include "pore/rng.hpp"

using namespace pore;

namespace {

using ApproxCert = Certifier<ApproxArithmetic>;
using ExactCert = Certifier<ExactArithmetic>;

ProbBounds random_bounds(Rng& rng, std::size_t k, std::size_t m) {
  ProbBounds b;
  b.m = m;
  // a handful of strong items, a long weak tail
  for (std::size_t i = 0; i < m; ++i) {
    const double v = rng.uniform() < 0.3 ? rng.uniform(0.0, 0.6) : rng.uniform(0.0, 0.05);
    if (i < k)
      b.lower.push_back({static_cast<ItemId>(i), v});
    else
      b.upper.push_back({static_cast<ItemId>(i), v});
  }
  return b;
}

std::vector<ItemBound> bounds_of(std::initializer_list<double> values, ItemId first = 0) {
  std::vector<ItemBound> out;
  for (double v : values) out.push_back({first++, v});
  return out;
}

}  // namespace

TEST(Certifier, HandExampleCertifies) {
  ProbBounds b;
  b.lower = bounds_of({0.6});
  b.upper = bounds_of({0.3, 0.05, 0.05}, 1);
  const auto ctx = make_context(100, 0, 10, true);
  EXPECT_TRUE(ApproxCert::from_bounds(b, 1, 1).verify(1, ctx));
  EXPECT_TRUE(ExactCert::from_bounds(b, 1, 1).verify(1, ctx));
  EXPECT_EQ(ApproxCert::from_bounds(b, 1, 1).binary_search(ctx), 1u);
}

TEST(Certifier, HandExampleFailsOnceSlackIsLarge) {
  ProbBounds b;
  b.lower = bounds_of({0.6});
  b.upper = bounds_of({0.3, 0.05, 0.05}, 1);
  // sigma(100, e, 10) passes 0.3 somewhere below e = 10
  std::uint64_t first_fail = 0;
  for (std::uint64_t e = 0; e < 100; ++e) {
    if (!ApproxCert::from_bounds(b, 1, 1).verify(1, make_context(100, e, 10, false))) {
      first_fail = e;
      break;
    }
  }
  ASSERT_GT(first_fail, 0u);
  const auto ctx = make_context(100, first_fail, 10, true);
  EXPECT_FALSE(ExactCert::from_bounds(b, 1, 1).verify(1, ctx));
  EXPECT_GE(ctx.sigma_exact, Rational(3, 10) - Rational(2, 10));
}

TEST(Certifier, ZeroLowerBoundsCertifyNothing) {
  ProbBounds b;
  b.lower = bounds_of({0.0, 0.0, 0.0});
  b.upper = bounds_of({0.0, 0.0}, 3);
  const auto ctx = make_context(50, 0, 5, false);
  EXPECT_EQ(ApproxCert::from_bounds(b, 10, 1).binary_search(ctx), 0u);
}

TEST(Certifier, InfiniteSlackCertifiesNothing) {
  ProbBounds b;
  b.lower = bounds_of({1.0, 1.0});
  b.upper = bounds_of({0.0}, 2);
  const auto ctx = make_context(943, 100000, 500, false);
  ASSERT_TRUE(std::isinf(ctx.sigma));
  EXPECT_EQ(ApproxCert::from_bounds(b, 10, 1).binary_search(ctx), 0u);
}

TEST(Certifier, PerfectBoundsGiveMinOfTargetAndN) {
  for (std::size_t k : {1u, 3u, 12u}) {
    ProbBounds b;
    for (std::size_t i = 0; i < k; ++i) b.lower.push_back({static_cast<ItemId>(i), 1.0});
    for (std::size_t i = 0; i < 20; ++i) b.upper.push_back({static_cast<ItemId>(k + i), 0.0});
    const auto ctx = make_context(100, 0, 10, true);
    EXPECT_EQ(ApproxCert::from_bounds(b, 10, 10).binary_search(ctx), std::min<std::size_t>(k, 10));
    EXPECT_EQ(ExactCert::from_bounds(b, 10, 10).binary_search(ctx), std::min<std::size_t>(k, 10));
  }
}

TEST(Certifier, SmallCatalogueUsesEveryOutsideItem) {
  ProbBounds b;
  b.lower = bounds_of({0.5, 0.4});
  b.upper = bounds_of({0.1}, 2);
  const auto ctx = make_context(20, 0, 4, false);
  EXPECT_EQ(ApproxCert::from_bounds(b, 10, 1).binary_search(ctx), 2u);
  // nothing outside I_u: every item of I_u is trivially kept
  ProbBounds all;
  all.lower = bounds_of({0.0, 0.0});
  EXPECT_EQ(ApproxCert::from_bounds(all, 10, 1).binary_search(ctx), 2u);
}

TEST(Certifier, RejectsBadArguments) {
  EXPECT_THROW(ApproxCert({}, {}, 0, 1), Error);
  EXPECT_THROW(ApproxCert({}, {}, 1, 0), Error);
  const ApproxCert c({0.5}, {{0.1, 1}}, 3, 1);
  const auto ctx = make_context(10, 0, 2, false);
  EXPECT_THROW(c.verify(0, ctx), Error);
  EXPECT_THROW(c.verify(2, ctx), Error);
  EXPECT_THROW(ExactCert({Rational(1, 2)}, {}, 3, 1).verify(1, ctx), Error);
}

TEST(Certifier, BinarySearchMatchesLinearScan) {
  Rng rng(11);
  std::size_t positive = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng.below(15), m = k + 1 + rng.below(40);
    const auto b = random_bounds(rng, k, m);
    const std::size_t N = 1 + rng.below(12), np = 1 + rng.below(3);
    const auto ctx = make_context(200, rng.below(4), 20, false);
    const auto cert = ApproxCert::from_bounds(b, N, np);
    const auto r = cert.binary_search(ctx);
    EXPECT_EQ(r, cert.linear_scan(ctx)) << "trial " << trial;
    for (std::size_t q = 1; q <= cert.max_r(); ++q) EXPECT_EQ(cert.verify(q, ctx), q <= r);
    positive += r > 0;
  }
  EXPECT_GT(positive, 20u);
}

TEST(Certifier, ExactAgreesWithApprox) {
  Rng rng(12);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t k = 1 + rng.below(8), m = k + 1 + rng.below(15);
    const auto b = random_bounds(rng, k, m);
    const std::size_t N = 1 + rng.below(8);
    const auto e = rng.below(3);
    const auto approx = ApproxCert::from_bounds(b, N, 1).binary_search(make_context(60, e, 8, false));
    const auto exact = ExactCert::from_bounds(b, N, 1).binary_search(make_context(60, e, 8, true));
    // rounding onto 1/C(n,s) can only move the exact answer down by a hair
    EXPECT_LE(approx, exact);
    EXPECT_GE(approx + 1, exact);
  }
}

TEST(Certifier, MonotoneInAttackSize) {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const auto b = random_bounds(rng, 8, 40);
    const auto cert = ApproxCert::from_bounds(b, 10, 1);
    std::size_t prev = cert.max_r();
    for (std::uint64_t e = 0; e <= 30; ++e) {
      const auto r = cert.binary_search(make_context(300, e, 30, false));
      EXPECT_LE(r, prev);
      prev = r;
    }
  }
}

TEST(Bagging, HandExample) {
  ProbBounds b;
  b.lower = bounds_of({0.6, 0.25, 0.4});
  b.upper = bounds_of({0.2, 0.1}, 3);
  const auto bag = BaggingCertifier<ApproxArithmetic>::from_bounds(b, 10);
  ContextCache contexts(100, 10, false);
  EXPECT_TRUE(bag.holds(0, contexts.get(0)));
  EXPECT_TRUE(bag.holds(1, contexts.get(0)));
  const auto z = bag.tolerances(contexts, 1000);
  // Z grows with the margin over the top competitor
  EXPECT_GE(z[0], z[2]);
  EXPECT_GE(z[2], z[1]);
  EXPECT_GE(z[1], 0);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_TRUE(bag.holds(k, contexts.get(static_cast<std::uint64_t>(z[k]))));
    EXPECT_FALSE(bag.holds(k, contexts.get(static_cast<std::uint64_t>(z[k]) + 1)));
  }
  EXPECT_EQ(bag.certify(z, 0), 3u);
  EXPECT_EQ(bag.certify(z, static_cast<std::uint64_t>(z[0]) + 1), 0u);
}

TEST(Bagging, FailsWithoutMarginAndRespectsCap) {
  ProbBounds b;
  b.lower = bounds_of({0.1, 1.0});
  b.upper = bounds_of({0.3}, 2);
  const auto bag = BaggingCertifier<ApproxArithmetic>::from_bounds(b, 10);
  ContextCache contexts(50, 1, false);
  EXPECT_EQ(bag.tolerance(0, contexts, 500), -1);
  // s = 1 keeps sigma small, so the strong item reaches the cap
  ProbBounds strong;
  strong.lower = bounds_of({1.0});
  const auto sure = BaggingCertifier<ApproxArithmetic>::from_bounds(strong, 10);
  EXPECT_EQ(sure.tolerance(0, contexts, 500), 500);
}

TEST(Bagging, NeverBeatsPore) {
  Rng rng(14);
  std::size_t strict = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto b = random_bounds(rng, 1 + rng.below(10), 50);
    const auto pore = ApproxCert::from_bounds(b, 10, 1);
    const auto bag = BaggingCertifier<ApproxArithmetic>::from_bounds(b, 10);
    ContextCache contexts(300, 30, false);
    const auto z = bag.tolerances(contexts, 3000);
    for (std::uint64_t e = 0; e <= 20; ++e) {
      const auto rp = pore.binary_search(contexts.get(e));
      const auto rb = bag.certify(z, e);
      EXPECT_LE(rb, rp) << "trial " << trial << " e " << e;
      strict += rb < rp;
    }
  }
  EXPECT_GT(strict, 0u);
}

TEST(ComputeAllR, SkipsEmptyTargetsAndKeepsLayout) {
  VoteCounts v(3, 6);
  v.T = 500;
  v.s = 2;
  v.n_prime = 1;
  v.counts = {500, 0, 0, 0, 0, 0,  //
              0, 0, 0, 0, 0, 0,    //
              0, 250, 250, 0, 0, 0};
  const std::vector<ItemList> targets{{0}, {}, {1, 2, 3}};
  CertifyOptions opt;
  opt.alpha = 0.05;
  opt.N = 2;
  opt.e_list = {0, 1, 5};
  opt.bagging = true;
  const auto rep = compute_all_r(v, targets, opt);
  EXPECT_EQ(rep.skipped, (std::vector<UserId>{1}));
  ASSERT_EQ(rep.pore.size(), 6u);
  ASSERT_EQ(rep.bagging.size(), 6u);
  EXPECT_EQ(rep.pore[0].user, 0u);
  EXPECT_EQ(rep.pore[3].user, 2u);
  EXPECT_EQ(rep.pore[4].e, 1u);
  EXPECT_EQ(rep.pore[0].r, 1u);
  EXPECT_EQ(rep.pore[3].r, 2u);
  for (std::size_t k = 0; k < rep.pore.size(); ++k) {
    EXPECT_LE(rep.bagging[k].r, rep.pore[k].r);
    if (k % 3) EXPECT_LE(rep.pore[k].r, rep.pore[k - 1].r);
  }
}

TEST(ComputeAllR, ExactModeAndThreadsAgree) {
  Rng rng(15);
  VoteCounts v(20, 30);
  v.T = 300;
  v.s = 5;
  v.n_prime = 1;
  std::vector<ItemList> targets(20);
  for (UserId u = 0; u < 20; ++u) {
    for (ItemId i = 0; i < 30; ++i) v.counts[u * 30 + i] = static_cast<std::uint32_t>(rng.below(60));
    for (ItemId i = 0; i < 30; ++i)
      if (rng.below(4) == 0) targets[u].push_back(i);
  }
  CertifyOptions opt;
  opt.alpha = 0.1;
  opt.e_list = {0, 1, 2};
  opt.threads = 1;
  const auto one = compute_all_r(v, targets, opt);
  opt.threads = 4;
  const auto four = compute_all_r(v, targets, opt);
  opt.exact = true;
  const auto exact = compute_all_r(v, targets, opt);
  ASSERT_EQ(one.pore.size(), four.pore.size());
  for (std::size_t k = 0; k < one.pore.size(); ++k) {
    EXPECT_EQ(one.pore[k].r, four.pore[k].r);
    EXPECT_LE(one.pore[k].r, exact.pore[k].r);
    EXPECT_TRUE(exact.pore[k].exact);
  }
}

TEST(ComputeAllR, RejectsBadOptions) {
  VoteCounts v(1, 3);
  v.T = 10;
  v.s = 1;
  v.n_prime = 2;
  const std::vector<ItemList> targets{{0}};
  CertifyOptions opt;
  opt.bagging = true;
  EXPECT_THROW(compute_all_r(v, targets, opt), Error);
  opt.bagging = false;
  opt.alpha = 1.5;
  EXPECT_THROW(compute_all_r(v, targets, opt), Error);
  opt.alpha = 0.1;
  EXPECT_THROW(compute_all_r(v, std::vector<ItemList>{}, opt), Error);
}
