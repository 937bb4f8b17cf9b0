#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pore/base_rec.hpp"
#include "pore/certify.hpp"
#include "pore/combinatorics.hpp"
#include "pore/common.hpp"
#include "pore/ensemble.hpp"
#include "pore/parallel.hpp"
#include "pore/ratings.hpp"
#include "pore/rng.hpp"

namespace pore {

/// p_i = numerators[u][i] / denominator with denominator = C(n, s).
struct ExactProbs {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t s = 0;
  std::uint32_t denominator = 0;
  std::vector<std::uint32_t> numerators;  // row-major n_users x n_items

  std::span<const std::uint32_t> of(UserId u) const {
    return {numerators.data() + static_cast<std::size_t>(u) * n_items, n_items};
  }
  std::uint32_t numerator(UserId u, ItemId i) const {
    return numerators[static_cast<std::size_t>(u) * n_items + i];
  }
  Rational probability(UserId u, ItemId i) const {
    return Rational(numerator(u, i), denominator);
  }
  double value(UserId u, ItemId i) const {
    return static_cast<double>(numerator(u, i)) / static_cast<double>(denominator);
  }
};

/// Advances `subset` to the next s-subset of {0..n-1} in lexicographic
/// order; false after the last one.
inline bool next_combination(std::vector<UserId>& subset, std::size_t n) {
  const std::size_t s = subset.size();
  std::size_t k = s;
  while (k > 0) {
    --k;
    if (subset[k] < n - s + k) {
      ++subset[k];
      for (std::size_t j = k + 1; j < s; ++j) subset[j] = subset[j - 1] + 1;
      return true;
    }
  }
  return false;
}

/// Exact item probabilities by training one base model on every s-subset of
/// users. Member seeds come from subset contents (see subset_seed), so a
/// subset made only of genuine users gets the same model whether or not
/// fake users were appended to the matrix.
inline ExactProbs exact_item_probs(const RatingMatrix& matrix, const AlgoConfig& cfg,
                                   std::size_t s, std::size_t n_prime,
                                   std::uint64_t master_seed = 0, unsigned threads = 1) {
  const std::size_t n = matrix.n_users(), m = matrix.n_items();
  if (s < 1 || s > n) throw Error("exact_item_probs: need 1 <= s <= n");
  const std::uint64_t total = checked_subset_count(n, s);
  ExactProbs out;
  out.n_users = n;
  out.n_items = m;
  out.s = s;
  out.denominator = static_cast<std::uint32_t>(total);
  out.numerators.assign(n * m, 0);

  // Contiguous rank ranges per worker, each walked with next_combination.
  const unsigned workers = worker_count(total, resolve_threads(threads));
  const std::uint64_t chunk = (total + workers - 1) / workers;
  std::vector<std::vector<std::uint32_t>> partial(workers, std::vector<std::uint32_t>(n * m, 0));
  parallel_for(workers, workers, [&](std::size_t w, unsigned) {
    const std::uint64_t begin = w * chunk;
    const std::uint64_t end = std::min(total, begin + chunk);
    if (begin >= end) return;
    std::vector<UserId> subset = subset_at_rank(n, s, begin);
    std::vector<double> scratch(m, 0.0);
    for (std::uint64_t k = begin; k < end; ++k) {
      const BaseModel model(SubmatrixView{&matrix, subset}, cfg,
                            model_seed(subset_seed(master_seed, subset)));
      for (UserId u : subset)
        for (ItemId i : model.recommend(u, n_prime, scratch))
          ++partial[w][static_cast<std::size_t>(u) * m + i];
      if (k + 1 < end) next_combination(subset, n);
    }
  });
  for (const auto& p : partial)
    for (std::size_t k = 0; k < p.size(); ++k) out.numerators[k] += p[k];
  return out;
}

/// Ensemble top-N for u under exact probabilities (ties by ascending id,
/// items u rated in `matrix` excluded).
inline ItemList exact_ensemble_topn(const ExactProbs& probs, const RatingMatrix& matrix, UserId u,
                                    std::size_t N) {
  return ensemble_recommend(probs.of(u), matrix.items_of(u), N);
}

/// Certified r per user using the exact probabilities as both the lower and
/// upper bounds, in exact arithmetic. Users with an empty target get 0.
inline std::vector<std::size_t> certify_with_exact_probs(const ExactProbs& probs,
                                                         std::span<const ItemList> targets,
                                                         std::size_t N, std::size_t n_prime,
                                                         std::uint64_t e) {
  const auto ctx = make_context(probs.n_users, e, probs.s, true);
  std::vector<std::size_t> r(probs.n_users, 0);
  for (UserId u = 0; u < probs.n_users; ++u) {
    if (targets[u].empty()) continue;
    std::vector<char> in_target(probs.n_items, 0);
    std::vector<Rational> lower;
    for (ItemId i : targets[u]) {
      in_target[i] = 1;
      lower.push_back(probs.probability(u, i));
    }
    std::vector<Certifier<ExactArithmetic>::Outside> outside;
    for (ItemId j = 0; j < probs.n_items; ++j)
      if (!in_target[j]) outside.push_back({probs.probability(u, j), j});
    r[u] = Certifier<ExactArithmetic>(std::move(lower), std::move(outside), N, n_prime)
               .binary_search(ctx);
  }
  return r;
}

/// Random tiny matrix on the rating domain `levels`, every user and item
/// rated at least once.
inline RatingMatrix random_tiny_matrix(std::size_t n, std::size_t m, std::span<const double> levels,
                                       double density, Rng& rng) {
  std::vector<Rating> entries;
  std::vector<char> filled(n * m, 0);
  for (UserId u = 0; u < n; ++u)
    for (ItemId i = 0; i < m; ++i)
      if (rng.uniform() < density) filled[u * m + i] = 1;
  for (UserId u = 0; u < n; ++u) filled[u * m + rng.below(m)] = 1;
  for (ItemId i = 0; i < m; ++i) filled[rng.below(n) * m + i] = 1;
  for (UserId u = 0; u < n; ++u)
    for (ItemId i = 0; i < m; ++i)
      if (filled[u * m + i]) entries.push_back({u, i, levels[rng.below(levels.size())]});
  RatingDomain domain = RatingDomain::enumerated({levels.begin(), levels.end()});
  return RatingMatrix(n, m, std::move(entries), domain);
}

// ---------------------------------------------------------------------------
// Attacks

enum class AttackKind { RandomRatings, CopyPopular, AllMaxOnRandomItems };

inline AttackKind parse_attack(std::string_view name) {
  if (name == "random-ratings") return AttackKind::RandomRatings;
  if (name == "copy-popular") return AttackKind::CopyPopular;
  if (name == "all-max-on-random-items") return AttackKind::AllMaxOnRandomItems;
  throw Error("unknown attack '" + std::string(name) + "'");
}

using FakeRows = std::vector<std::vector<std::pair<ItemId, double>>>;

/// Scores an attacker may use: the enumerated levels, else the integers in
/// the interval, else its two endpoints.
inline std::vector<double> attack_levels(const RatingDomain& domain) {
  if (!domain.levels.empty()) return domain.levels;
  std::vector<double> out;
  for (double v = std::ceil(domain.lo); v <= domain.hi && out.size() < 64; v += 1.0)
    if (v != 0.0) out.push_back(v);
  if (out.empty()) out = {domain.lo, domain.hi};
  return out;
}

inline FakeRows make_attack(const RatingMatrix& matrix, AttackKind kind, std::size_t e, Rng& rng) {
  const std::size_t m = matrix.n_items();
  const auto levels = attack_levels(matrix.domain());
  const double top = matrix.domain().max_score();
  FakeRows rows(e);
  std::vector<ItemId> by_popularity(m);
  if (kind == AttackKind::CopyPopular) {
    std::vector<std::size_t> pop(m, 0);
    for (UserId u = 0; u < matrix.n_users(); ++u)
      for (ItemId i : matrix.items_of(u)) ++pop[i];
    for (ItemId i = 0; i < m; ++i) by_popularity[i] = i;
    std::stable_sort(by_popularity.begin(), by_popularity.end(),
                     [&](ItemId a, ItemId b) { return pop[a] > pop[b]; });
  }
  for (auto& row : rows) {
    switch (kind) {
      case AttackKind::RandomRatings:
        for (ItemId i = 0; i < m; ++i)
          if (rng.below(2)) row.push_back({i, levels[rng.below(levels.size())]});
        break;
      case AttackKind::CopyPopular: {
        const std::size_t count = 1 + rng.below(m);
        for (std::size_t k = 0; k < count; ++k) row.push_back({by_popularity[k], top});
        std::sort(row.begin(), row.end());
        break;
      }
      case AttackKind::AllMaxOnRandomItems:
        for (ItemId i = 0; i < m; ++i)
          if (rng.below(2)) row.push_back({i, top});
        if (row.empty()) row.push_back({static_cast<ItemId>(rng.below(m)), top});
        break;
    }
  }
  return rows;
}

struct Violation {
  std::size_t trial = 0;
  UserId user = 0;
  std::size_t certified = 0;
  std::size_t observed = 0;
};

struct SoundnessReport {
  std::size_t trials = 0;
  std::size_t checks = 0;             // (trial, user) pairs compared
  std::size_t certified_positive = 0; // users with r > 0
  std::vector<Violation> violations;
  /// Smallest observed intersection minus certified r over all checks.
  std::int64_t min_slack = std::numeric_limits<std::int64_t>::max();
  std::size_t min_observed_for_certified = std::numeric_limits<std::size_t>::max();

  bool sound() const noexcept { return violations.empty(); }
};

namespace detail {

inline void check_poisoned(const RatingMatrix& clean, const FakeRows& fake, const AlgoConfig& cfg,
                           std::size_t s, std::size_t n_prime, std::size_t N,
                           std::span<const ItemList> targets, std::span<const std::size_t> r,
                           std::uint64_t master_seed, unsigned threads, std::size_t trial,
                           SoundnessReport& report) {
  const RatingMatrix poisoned = clean.with_appended_users(fake);
  const ExactProbs probs = exact_item_probs(poisoned, cfg, s, n_prime, master_seed, threads);
  for (UserId u = 0; u < clean.n_users(); ++u) {
    if (targets[u].empty()) continue;
    const ItemList top = exact_ensemble_topn(probs, poisoned, u, N);
    std::size_t hit = 0;
    for (ItemId i : top)
      if (std::find(targets[u].begin(), targets[u].end(), i) != targets[u].end()) ++hit;
    ++report.checks;
    report.min_slack = std::min<std::int64_t>(
        report.min_slack, static_cast<std::int64_t>(hit) - static_cast<std::int64_t>(r[u]));
    if (r[u] > 0) report.min_observed_for_certified = std::min(report.min_observed_for_certified, hit);
    if (hit < r[u]) report.violations.push_back({trial, u, r[u], hit});
  }
}

inline std::size_t count_positive(std::span<const std::size_t> r) {
  return static_cast<std::size_t>(std::count_if(r.begin(), r.end(), [](auto v) { return v > 0; }));
}

}  // namespace detail

/// Appends e fake users per `kind`, recomputes the exact poisoned ensemble
/// and checks |I_u ∩ T(M', u)| >= r_u for every genuine user, `trials` times.
/// Can only falsify a certificate, never prove one.
inline SoundnessReport attack_soundness_check(const RatingMatrix& matrix, const AlgoConfig& cfg,
                                              std::size_t s, std::size_t n_prime, std::size_t N,
                                              std::size_t e, AttackKind kind, std::size_t trials,
                                              std::uint64_t seed, std::span<const ItemList> targets,
                                              std::span<const std::size_t> r,
                                              std::uint64_t master_seed = 0, unsigned threads = 1) {
  if (targets.size() != matrix.n_users() || r.size() != matrix.n_users())
    throw Error("attack_soundness_check: one target and one r per user");
  checked_subset_count(matrix.n_users() + e, s);
  SoundnessReport report;
  report.certified_positive = detail::count_positive(r);
  Rng rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    const FakeRows fake = make_attack(matrix, kind, e, rng);
    detail::check_poisoned(matrix, fake, cfg, s, n_prime, N, targets, r, master_seed, threads, t,
                           report);
    ++report.trials;
  }
  return report;
}

/// Every assignment of {unrated} ∪ levels to the e x m fake ratings.
inline SoundnessReport exhaustive_adversary_check(const RatingMatrix& matrix,
                                                  const AlgoConfig& cfg, std::size_t s,
                                                  std::size_t n_prime, std::size_t N,
                                                  std::size_t e, std::span<const double> levels,
                                                  std::span<const ItemList> targets,
                                                  std::span<const std::size_t> r,
                                                  std::uint64_t master_seed = 0,
                                                  unsigned threads = 1) {
  const std::size_t m = matrix.n_items();
  const std::size_t cells = e * m;
  const std::size_t base = levels.size() + 1;
  double total_d = std::pow(static_cast<double>(base), static_cast<double>(cells));
  if (total_d > 1e5) throw Error("exhaustive adversary: too many rating patterns");
  checked_subset_count(matrix.n_users() + e, s);
  const auto total = static_cast<std::size_t>(std::llround(total_d));
  SoundnessReport report;
  report.certified_positive = detail::count_positive(r);
  for (std::size_t code = 0; code < total; ++code) {
    FakeRows fake(e);
    std::size_t rest = code;
    for (std::size_t cell = 0; cell < cells; ++cell) {
      const std::size_t digit = rest % base;
      rest /= base;
      if (digit > 0) fake[cell / m].push_back({static_cast<ItemId>(cell % m), levels[digit - 1]});
    }
    detail::check_poisoned(matrix, fake, cfg, s, n_prime, N, targets, r, master_seed, threads, code,
                           report);
    ++report.trials;
  }
  return report;
}

}  // namespace pore
