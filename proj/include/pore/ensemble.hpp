#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pore/base_rec.hpp"
#include "pore/combinatorics.hpp"
#include "pore/common.hpp"
#include "pore/parallel.hpp"
#include "pore/ratings.hpp"
#include "pore/rng.hpp"

namespace pore {

struct SubmatrixSample {
  std::vector<UserId> users;  // sorted, distinct
  std::uint64_t seed = 0;
};

/// Uniform s-subset of {0..n-1} without replacement.
inline SubmatrixSample sample_submatrix(std::size_t n, std::size_t s, std::uint64_t seed) {
  if (s < 1 || s > n) throw Error("sample_submatrix: need 1 <= s <= n");
  std::vector<UserId> pool(n);
  std::iota(pool.begin(), pool.end(), UserId{0});
  Rng rng(seed);
  partial_shuffle(pool, s, rng);
  pool.resize(s);
  std::sort(pool.begin(), pool.end());
  return {std::move(pool), seed};
}

/// Seed of the t-th ensemble member.
inline std::uint64_t member_seed(std::uint64_t master_seed, std::uint64_t t) {
  return hash_seed(master_seed, t);
}

/// Member seed derived from the subset itself (used by exhaustive ensembles).
inline std::uint64_t subset_seed(std::uint64_t master_seed, std::span<const UserId> users) {
  std::uint64_t h = splitmix64(master_seed ^ 0x5bd1e9955bd1e995ULL);
  for (UserId u : users) h = hash_seed(h, u);
  return h;
}

/// Seed handed to the base algorithm of a member (BPR initialisation and SGD).
inline std::uint64_t model_seed(std::uint64_t member) { return hash_seed(member, 1); }

/// counts[u][i] = number of ensemble members whose top-N' list for u holds i.
struct VoteCounts {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::uint64_t T = 0;
  std::size_t s = 0;
  std::size_t n_prime = 0;
  std::uint64_t master_seed = 0;
  std::string algo;
  std::vector<std::uint32_t> counts;  // row-major n_users x n_items

  VoteCounts() = default;
  VoteCounts(std::size_t users, std::size_t items)
      : n_users(users), n_items(items), counts(users * items, 0) {}

  std::span<const std::uint32_t> of(UserId u) const {
    return {counts.data() + static_cast<std::size_t>(u) * n_items, n_items};
  }
  std::span<std::uint32_t> of(UserId u) {
    return {counts.data() + static_cast<std::size_t>(u) * n_items, n_items};
  }
  std::uint32_t at(UserId u, ItemId i) const {
    return counts[static_cast<std::size_t>(u) * n_items + i];
  }

  /// Adds the votes of a disjoint batch of members built with the same settings.
  VoteCounts& merge(const VoteCounts& other) {
    if (other.n_users != n_users || other.n_items != n_items || other.s != s ||
        other.n_prime != n_prime || other.algo != algo || other.master_seed != master_seed)
      throw Error("cannot merge vote counts built with different settings");
    for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += other.counts[k];
    T += other.T;
    return *this;
  }
};

namespace detail {

inline void add_member_votes(const RatingMatrix& train, const AlgoConfig& cfg,
                             std::span<const UserId> users, std::size_t n_prime,
                             std::uint64_t seed, std::vector<double>& scratch,
                             std::vector<std::uint32_t>& counts) {
  const BaseModel model(SubmatrixView{&train, users}, cfg, seed);
  const std::size_t m = train.n_items();
  for (UserId u : users)
    for (ItemId i : model.recommend(u, n_prime, scratch))
      ++counts[static_cast<std::size_t>(u) * m + i];
}

}  // namespace detail

/// Votes of members t in [t_begin, t_end). Each member samples its users
/// from member_seed(master_seed, t) and workers keep private tallies that
/// are summed at the end, so the result does not depend on scheduling.
inline VoteCounts accumulate_votes(const RatingMatrix& train, const AlgoConfig& cfg,
                                   std::size_t s, std::size_t n_prime,
                                   std::uint64_t master_seed, std::uint64_t t_begin,
                                   std::uint64_t t_end, unsigned threads = 1) {
  if (t_end < t_begin) throw Error("accumulate_votes: empty member range");
  if (n_prime < 1) throw Error("n_prime must be at least 1");
  const std::size_t n = train.n_users(), m = train.n_items();
  if (s < 1 || s > n) throw Error("need 1 <= s <= n_users");
  VoteCounts out(n, m);
  out.T = t_end - t_begin;
  out.s = s;
  out.n_prime = n_prime;
  out.master_seed = master_seed;
  out.algo = std::string(algo_tag(cfg.algo));

  const std::size_t n_tasks = static_cast<std::size_t>(t_end - t_begin);
  const unsigned workers = worker_count(n_tasks, resolve_threads(threads));
  std::vector<std::vector<std::uint32_t>> partial(workers, std::vector<std::uint32_t>(n * m, 0));
  std::vector<std::vector<double>> scratch(workers, std::vector<double>(m, 0.0));
  parallel_for(n_tasks, workers, [&](std::size_t task, unsigned w) {
    const std::uint64_t t = t_begin + task;
    try {
      const std::uint64_t seed = member_seed(master_seed, t);
      const auto sample = sample_submatrix(n, s, seed);
      detail::add_member_votes(train, cfg, sample.users, n_prime, model_seed(seed), scratch[w],
                               partial[w]);
    } catch (const std::exception& ex) {
      throw Error("base model t=" + std::to_string(t) + ": " + ex.what());
    }
  });
  for (const auto& p : partial)
    for (std::size_t k = 0; k < p.size(); ++k) out.counts[k] += p[k];
  return out;
}

inline VoteCounts build_vote_counts(const RatingMatrix& train, const AlgoConfig& cfg,
                                    std::uint64_t T, std::size_t s, std::size_t n_prime,
                                    std::uint64_t master_seed, unsigned threads = 1) {
  if (T < 1) throw Error("T must be at least 1");
  return accumulate_votes(train, cfg, s, n_prime, master_seed, 0, T, threads);
}

// ---------------------------------------------------------------------------
// Exhaustive ensembles (every s-subset once), for small instances.

inline constexpr std::uint64_t kMaxEnumeratedSubsets = 1'000'000;

/// The rank-th s-subset of {0..n-1} in lexicographic order.
inline std::vector<UserId> subset_at_rank(std::size_t n, std::size_t s, std::uint64_t rank) {
  std::vector<UserId> out;
  out.reserve(s);
  std::size_t next = 0;
  for (std::size_t left = s; left > 0; --left) {
    for (;; ++next) {
      // Subsets whose next element is `next`.
      const std::uint64_t block = *binomial_u64(n - next - 1, left - 1);
      if (rank < block) break;
      rank -= block;
    }
    out.push_back(static_cast<UserId>(next++));
  }
  return out;
}

inline std::uint64_t checked_subset_count(std::size_t n, std::size_t s) {
  const auto total = binomial_u64(n, s);
  if (!total || *total > kMaxEnumeratedSubsets)
    throw Error("C(" + std::to_string(n) + "," + std::to_string(s) + ") exceeds the enumeration limit");
  return *total;
}

/// Votes with one member per s-subset (T = C(n, s)), each seeded with
/// subset_seed(master_seed, subset).
inline VoteCounts build_vote_counts_exhaustive(const RatingMatrix& train, const AlgoConfig& cfg,
                                               std::size_t s, std::size_t n_prime,
                                               std::uint64_t master_seed, unsigned threads = 1) {
  const std::size_t n = train.n_users(), m = train.n_items();
  if (s < 1 || s > n) throw Error("need 1 <= s <= n_users");
  const std::uint64_t total = checked_subset_count(n, s);
  VoteCounts out(n, m);
  out.T = total;
  out.s = s;
  out.n_prime = n_prime;
  out.master_seed = master_seed;
  out.algo = std::string(algo_tag(cfg.algo));
  const unsigned workers = worker_count(total, resolve_threads(threads));
  std::vector<std::vector<std::uint32_t>> partial(workers, std::vector<std::uint32_t>(n * m, 0));
  std::vector<std::vector<double>> scratch(workers, std::vector<double>(m, 0.0));
  parallel_for(total, workers, [&](std::size_t k, unsigned w) {
    const auto users = subset_at_rank(n, s, k);
    detail::add_member_votes(train, cfg, users, n_prime, model_seed(subset_seed(master_seed, users)),
                             scratch[w], partial[w]);
  });
  for (const auto& p : partial)
    for (std::size_t k = 0; k < p.size(); ++k) out.counts[k] += p[k];
  return out;
}

// ---------------------------------------------------------------------------

/// Top-N items for u by vote count (ties by ascending id), skipping items u
/// rated in training. Zero-vote items fill the tail when fewer than N items
/// received votes.
inline ItemList ensemble_recommend(std::span<const std::uint32_t> user_counts,
                                   std::span<const ItemId> rated, std::size_t N) {
  ItemList candidates;
  candidates.reserve(user_counts.size());
  std::size_t r = 0;
  for (ItemId i = 0; i < user_counts.size(); ++i) {
    while (r < rated.size() && rated[r] < i) ++r;
    if (r < rated.size() && rated[r] == i) continue;
    candidates.push_back(i);
  }
  auto cmp = [&](ItemId a, ItemId b) {
    return user_counts[a] != user_counts[b] ? user_counts[a] > user_counts[b] : a < b;
  };
  if (candidates.size() > N) {
    std::nth_element(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(N),
                     candidates.end(), cmp);
    candidates.resize(N);
  }
  std::sort(candidates.begin(), candidates.end(), cmp);
  return candidates;
}

inline ItemList ensemble_recommend(const VoteCounts& votes, const RatingMatrix& train, UserId u,
                                   std::size_t N) {
  if (N > votes.n_items) throw Error("N exceeds the number of items");
  return ensemble_recommend(votes.of(u), train.items_of(u), N);
}

}  // namespace pore
