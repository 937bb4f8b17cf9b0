#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "pore/common.hpp"

namespace pore {

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Worst-case metric floors from a certified intersection size r:
/// (r/N, r/|E_u|, 2r/(|E_u|+N)). F1 uses the closed form, not the harmonic
/// mean of rounded precision and recall.
inline PrecisionRecall certified_metrics(std::size_t r, std::size_t N, std::size_t test_size) {
  if (test_size == 0) throw Error("certified_metrics: empty test set");
  if (N == 0) throw Error("certified_metrics: N must be positive");
  if (r > std::min(N, test_size)) throw Error("certified_metrics: r exceeds min(N, |E_u|)");
  const double rd = static_cast<double>(r);
  return {rd / static_cast<double>(N), rd / static_cast<double>(test_size),
          2.0 * rd / static_cast<double>(test_size + N)};
}

/// Hits of a top-N list against E_u (sorted), scored as above.
inline PrecisionRecall standard_metrics(std::span<const ItemId> recommended,
                                        std::span<const ItemId> test_items, std::size_t N) {
  if (test_items.empty()) throw Error("standard_metrics: empty test set");
  if (N == 0) throw Error("standard_metrics: N must be positive");
  std::size_t hits = 0;
  for (ItemId i : recommended)
    if (std::binary_search(test_items.begin(), test_items.end(), i)) ++hits;
  const double h = static_cast<double>(hits);
  return {h / static_cast<double>(N), h / static_cast<double>(test_items.size()),
          2.0 * h / static_cast<double>(test_items.size() + N)};
}

struct MetricRow {
  std::uint64_t e = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t n_users = 0;
};

/// Unweighted mean over users.
inline MetricRow average_over_users(std::span<const PrecisionRecall> rows, std::uint64_t e = 0) {
  if (rows.empty()) throw Error("average_over_users: no eligible users");
  MetricRow out;
  out.e = e;
  out.n_users = rows.size();
  for (const auto& r : rows) {
    out.precision += r.precision;
    out.recall += r.recall;
    out.f1 += r.f1;
  }
  const double k = static_cast<double>(rows.size());
  out.precision /= k;
  out.recall /= k;
  out.f1 /= k;
  return out;
}

}  // namespace pore
