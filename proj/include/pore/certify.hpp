#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pore/bounds.hpp"
#include "pore/combinatorics.hpp"
#include "pore/common.hpp"
#include "pore/ensemble.hpp"
#include "pore/parallel.hpp"

namespace pore {

// ---------------------------------------------------------------------------
// Arithmetic policies

/// Doubles. Probabilities are not snapped to multiples of 1/C(n,s), sigma
/// carries an upward guard, and the final comparison requires the left side
/// to clear the right side by a relative margin, so rounding never certifies
/// more than exact arithmetic would.
struct ApproxArithmetic {
  using Real = double;
  static constexpr const char* name = "approx";
  static constexpr double kCompareGuard = 1e-12;

  static Real from_double(double x) { return x; }
  static Real zero() { return 0.0; }
  static Real floor_star(const Real& p, const CombinatoricContext& ctx) {
    return round_lower_star(p, ctx);
  }
  static Real ceil_star(const Real& p, const CombinatoricContext& ctx) {
    return round_upper_star(p, ctx);
  }
  static Real sigma(const CombinatoricContext& ctx) { return ctx.sigma; }
  static bool exceeds(const Real& lhs, const Real& rhs) {
    if (!(rhs < kInf)) return false;
    return lhs > (rhs > 0 ? rhs * (1.0 + kCompareGuard) : rhs);
  }
};

/// Exact rationals with floor/ceil onto multiples of 1/C(n,s).
struct ExactArithmetic {
  using Real = Rational;
  static constexpr const char* name = "exact";

  static Real from_double(double x) { return to_rational(x); }
  static Real zero() { return Real(0); }
  static Real floor_star(const Real& p, const CombinatoricContext& ctx) {
    return round_lower_star(p, ctx);
  }
  static Real ceil_star(const Real& p, const CombinatoricContext& ctx) {
    return round_upper_star(p, ctx);
  }
  static const Real& sigma(const CombinatoricContext& ctx) {
    if (!ctx.exact) throw Error("exact certification needs an exact-mode context");
    return ctx.sigma_exact;
  }
  static bool exceeds(const Real& lhs, const Real& rhs) { return lhs > rhs; }
};

// ---------------------------------------------------------------------------

/// Certified intersection size search for one user and one target set I_u.
/// Bounds are sorted once; each verify() call then evaluates the constraint
/// for a given r' and attack size (through the context).
template <typename Arith>
class Certifier {
public:
  using Real = typename Arith::Real;

  struct Outside {
    Real upper;
    ItemId item;
  };

  /// `lower` holds the bounds of the k items of I_u (any order); `outside`
  /// the upper bounds of the items outside I_u.
  Certifier(std::vector<Real> lower, std::vector<Outside> outside, std::size_t N,
            std::size_t n_prime)
      : lower_(std::move(lower)), outside_(std::move(outside)), N_(N), n_prime_(n_prime) {
    if (N_ < 1) throw Error("N must be at least 1");
    if (n_prime_ < 1) throw Error("N' must be at least 1");
    std::sort(lower_.begin(), lower_.end(), [](const Real& a, const Real& b) { return a > b; });
    std::sort(outside_.begin(), outside_.end(), [](const Outside& a, const Outside& b) {
      return a.upper != b.upper ? a.upper > b.upper : a.item < b.item;
    });
    Real sum = Arith::zero();
    for (const auto& p : lower_) sum += p;
    cap_ = Real(n_prime_) - sum;
    if (cap_ < Arith::zero()) cap_ = Arith::zero();  // only reachable with invalid bounds
  }

  static Certifier from_bounds(const ProbBounds& bounds, std::size_t N, std::size_t n_prime) {
    std::vector<Real> lower;
    lower.reserve(bounds.lower.size());
    for (const auto& b : bounds.lower) lower.push_back(Arith::from_double(b.value));
    std::vector<Outside> outside;
    outside.reserve(bounds.upper.size());
    for (const auto& b : bounds.upper) outside.push_back({Arith::from_double(b.value), b.item});
    return Certifier(std::move(lower), std::move(outside), N, n_prime);
  }

  std::size_t max_r() const noexcept { return std::min(lower_.size(), N_); }

  /// Whether at least r' items of I_u provably stay in the top-N.
  bool verify(std::size_t r_prime, const CombinatoricContext& ctx) const {
    if (r_prime < 1 || r_prime > max_r()) throw Error("verify: r' out of range");
    const Real lhs = Arith::floor_star(lower_[r_prime - 1], ctx);
    // V: the N - r' + 1 outside items with the largest upper bounds, or all
    // of them when the catalogue is smaller than that.
    const std::size_t width = std::min(N_ - r_prime + 1, outside_.size());
    if (width == 0) return true;
    const auto& sigma = Arith::sigma(ctx);
    Real rhs = Arith::ceil_star(outside_[width - 1].upper, ctx) + sigma;
    // H_c: the c members of V with the smallest upper bounds.
    Real sum = Arith::zero();
    const Real np(n_prime_);
    for (std::size_t c = 1; c <= width; ++c) {
      sum += outside_[width - c].upper;
      const Real joint = sum < cap_ ? sum : cap_;
      const Real term = np * (Arith::ceil_star(joint / np, ctx) + sigma) / Real(c);
      if (term < rhs) rhs = term;
    }
    return Arith::exceeds(lhs, rhs);
  }

  /// Largest r' passing verify() by bisection, or 0.
  std::size_t binary_search(const CombinatoricContext& ctx) const {
    if (max_r() == 0) return 0;
    std::size_t low = 1, high = max_r();
    while (low < high) {
      const std::size_t mid = (low + high + 1) / 2;
      if (verify(mid, ctx))
        low = mid;
      else
        high = mid - 1;
    }
    return verify(low, ctx) ? low : 0;
  }

  /// Largest r' passing verify(), checking every candidate.
  std::size_t linear_scan(const CombinatoricContext& ctx) const {
    std::size_t best = 0;
    for (std::size_t r = 1; r <= max_r(); ++r)
      if (verify(r, ctx)) best = r;
    return best;
  }

  const std::vector<Real>& sorted_lower() const noexcept { return lower_; }
  const std::vector<Outside>& sorted_outside() const noexcept { return outside_; }

private:
  std::vector<Real> lower_;       // descending
  std::vector<Outside> outside_;  // descending upper bound, ties by ascending id
  std::size_t N_;
  std::size_t n_prime_;
  Real cap_;  // max(0, N' - sum of lower bounds)
};

// ---------------------------------------------------------------------------
// Contexts for many attack sizes

/// Memoised contexts keyed by e; safe to share between threads.
class ContextCache {
public:
  ContextCache(std::uint64_t n, std::uint64_t s, bool exact) : n_(n), s_(s), exact_(exact) {}

  const CombinatoricContext& get(std::uint64_t e) const {
    std::lock_guard lock(mutex_);
    auto it = cache_.find(e);
    if (it == cache_.end())
      it = cache_.emplace(e, std::make_unique<CombinatoricContext>(make_context(n_, e, s_, exact_)))
               .first;
    return *it->second;
  }

  std::uint64_t n() const noexcept { return n_; }
  bool exact() const noexcept { return exact_; }

private:
  std::uint64_t n_, s_;
  bool exact_;
  mutable std::mutex mutex_;
  mutable std::map<std::uint64_t, std::unique_ptr<CombinatoricContext>> cache_;
};

// ---------------------------------------------------------------------------
// Bagging baseline: every item of I_u is certified on its own against the
// single strongest outside competitor; requires N' = 1 votes.

template <typename Arith>
class BaggingCertifier {
public:
  using Real = typename Arith::Real;

  BaggingCertifier(std::vector<Real> lower, Real top_outside_upper, std::size_t N)
      : lower_(std::move(lower)), top_(std::move(top_outside_upper)), N_(N) {}

  static BaggingCertifier from_bounds(const ProbBounds& bounds, std::size_t N) {
    std::vector<Real> lower;
    for (const auto& b : bounds.lower) lower.push_back(Arith::from_double(b.value));
    Real top = Arith::zero();
    for (const auto& b : bounds.upper) {
      const Real v = Arith::from_double(b.value);
      if (v > top) top = v;
    }
    return BaggingCertifier(std::move(lower), std::move(top), N);
  }

  /// Whether item k of I_u keeps beating the top competitor with e fake users.
  bool holds(std::size_t k, const CombinatoricContext& ctx) const {
    return Arith::exceeds(Arith::floor_star(lower_[k], ctx),
                          Arith::ceil_star(top_, ctx) + Arith::sigma(ctx));
  }

  /// Z_k: the largest e' <= cap for which holds(k) is true, or -1 if it
  /// fails already without fake users. Doubling, then bisection.
  std::int64_t tolerance(std::size_t k, const ContextCache& contexts, std::uint64_t cap) const {
    if (!holds(k, contexts.get(0))) return -1;
    std::uint64_t good = 0, step = 1;
    std::uint64_t bad = cap + 1;
    while (good < cap) {
      const std::uint64_t probe = std::min(cap, good + step);
      if (holds(k, contexts.get(probe))) {
        good = probe;
        step *= 2;
      } else {
        bad = probe;
        break;
      }
    }
    while (bad - good > 1) {
      const std::uint64_t mid = good + (bad - good) / 2;
      if (holds(k, contexts.get(mid)))
        good = mid;
      else
        bad = mid;
    }
    return static_cast<std::int64_t>(good);
  }

  std::vector<std::int64_t> tolerances(const ContextCache& contexts, std::uint64_t cap) const {
    std::vector<std::int64_t> z(lower_.size());
    for (std::size_t k = 0; k < lower_.size(); ++k) z[k] = tolerance(k, contexts, cap);
    return z;
  }

  /// min(#{k : Z_k >= e}, N).
  std::size_t certify(std::span<const std::int64_t> z, std::uint64_t e) const {
    std::size_t hits = 0;
    for (auto v : z)
      if (v >= 0 && static_cast<std::uint64_t>(v) >= e) ++hits;
    return std::min(hits, N_);
  }

private:
  std::vector<Real> lower_;
  Real top_;
  std::size_t N_;
};

// ---------------------------------------------------------------------------
// Whole-population certification

struct CertResult {
  UserId user = 0;
  std::uint64_t e = 0;
  std::size_t r = 0;
  double alpha = 0.0;
  bool exact = false;
};

struct CertifyOptions {
  double alpha = 0.001;
  std::size_t N = 10;
  std::vector<std::uint64_t> e_list{0};
  bool exact = false;
  UpperConvention convention = UpperConvention::Paper;
  bool bagging = false;
  unsigned threads = 0;
};

struct CertifyReport {
  std::vector<CertResult> pore;     // user-major, e in e_list order
  std::vector<CertResult> bagging;  // same layout, when requested
  std::vector<UserId> skipped;      // users with an empty target set
};

namespace detail {

template <typename Arith>
void certify_user(const ProbBounds& bounds, const CertifyOptions& opt, std::size_t n_prime,
                  std::span<const CombinatoricContext* const> contexts,
                  const ContextCache& bagging_contexts, std::uint64_t bagging_cap,
                  std::span<CertResult> pore_out, std::span<CertResult> bag_out) {
  const auto cert = Certifier<Arith>::from_bounds(bounds, opt.N, n_prime);
  for (std::size_t k = 0; k < contexts.size(); ++k) {
    pore_out[k] = {bounds.user, opt.e_list[k], cert.binary_search(*contexts[k]), opt.alpha,
                   opt.exact};
  }
  if (!opt.bagging) return;
  const auto bag = BaggingCertifier<Arith>::from_bounds(bounds, opt.N);
  const auto z = bag.tolerances(bagging_contexts, bagging_cap);
  for (std::size_t k = 0; k < contexts.size(); ++k)
    bag_out[k] = {bounds.user, opt.e_list[k], bag.certify(z, opt.e_list[k]), opt.alpha, opt.exact};
}

}  // namespace detail

/// Certified intersection sizes for every user with a non-empty target set,
/// at per-user level alpha / n and per-item level alpha / (n m).
inline CertifyReport compute_all_r(const VoteCounts& votes, std::span<const ItemList> targets,
                                   const CertifyOptions& opt) {
  if (targets.size() != votes.n_users) throw Error("one target set per user is required");
  if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
  if (opt.bagging && votes.n_prime != 1) throw Error("the bagging baseline needs N' = 1 votes");
  if (opt.N < 1) throw Error("N must be at least 1");
  const std::size_t n = votes.n_users, m = votes.n_items;
  const double alpha_u = opt.alpha / static_cast<double>(n);
  CpBoundTable table(votes.T, alpha_u / static_cast<double>(m), opt.convention);
  const unsigned threads = resolve_threads(opt.threads);
  table.prepare(votes, threads);

  ContextCache contexts(n, votes.s, opt.exact);
  std::vector<const CombinatoricContext*> ctx_list;
  for (auto e : opt.e_list) ctx_list.push_back(&contexts.get(e));
  const std::uint64_t bagging_cap = 10 * static_cast<std::uint64_t>(n);

  CertifyReport report;
  std::vector<UserId> users;
  for (UserId u = 0; u < n; ++u) {
    if (targets[u].empty())
      report.skipped.push_back(u);
    else
      users.push_back(u);
  }
  const std::size_t width = opt.e_list.size();
  report.pore.resize(users.size() * width);
  if (opt.bagging) report.bagging.resize(users.size() * width);

  parallel_for(users.size(), threads, [&](std::size_t k, unsigned) {
    const UserId u = users[k];
    const auto bounds = estimate_bounds(votes.of(u), u, targets[u], table);
    std::span<CertResult> pore_out(report.pore.data() + k * width, width);
    std::span<CertResult> bag_out;
    if (opt.bagging) bag_out = {report.bagging.data() + k * width, width};
    if (opt.exact)
      detail::certify_user<ExactArithmetic>(bounds, opt, votes.n_prime, ctx_list, contexts,
                                            bagging_cap, pore_out, bag_out);
    else
      detail::certify_user<ApproxArithmetic>(bounds, opt, votes.n_prime, ctx_list, contexts,
                                             bagging_cap, pore_out, bag_out);
  });
  return report;
}

}  // namespace pore
