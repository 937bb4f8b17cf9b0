#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pore/beta.hpp"
#include "pore/common.hpp"
#include "pore/ensemble.hpp"
#include "pore/parallel.hpp"

namespace pore {

/// Shape pair used for the upper confidence bound.
///  - Paper:    Beta(1 - b; T_j, T - T_j + 1), with T_j = 0 mapped to 1 - b^(1/T)
///  - Textbook: Beta(1 - b; T_j + 1, T - T_j)
enum class UpperConvention { Paper, Textbook };

inline UpperConvention parse_upper_convention(std::string_view name) {
  if (name == "paper") return UpperConvention::Paper;
  if (name == "textbook") return UpperConvention::Textbook;
  throw Error("unknown upper-bound convention '" + std::string(name) + "'");
}

inline std::string_view convention_name(UpperConvention c) {
  return c == UpperConvention::Paper ? "paper" : "textbook";
}

/// One-sided Clopper-Pearson lower bound on a binomial proportion at tail
/// level `beta`. Uses the low end of the quantile bracket.
inline double cp_lower(std::uint64_t successes, std::uint64_t trials, double beta) {
  if (successes > trials) throw Error("cp_lower: successes exceed trials");
  if (successes == 0) return 0.0;
  return beta_quantile_bracket(beta, static_cast<double>(successes),
                               static_cast<double>(trials - successes + 1))
      .lo;
}

/// One-sided upper bound at tail level `beta`. Uses the high end of the
/// quantile bracket.
inline double cp_upper(std::uint64_t successes, std::uint64_t trials, double beta,
                       UpperConvention convention = UpperConvention::Paper) {
  if (successes > trials) throw Error("cp_upper: successes exceed trials");
  if (successes == trials) return 1.0;
  if (!(beta > 0.0 && beta < 1.0)) throw Error("cp_upper: level must lie in (0, 1)");
  const double k = static_cast<double>(successes), t = static_cast<double>(trials);
  if (convention == UpperConvention::Paper) {
    // Shape T_j = 0 is degenerate; use the zero-count bound, which is what
    // the textbook shapes (1, T) give in closed form.
    if (successes == 0) return -std::expm1(std::log(beta) / t);
    return beta_quantile_bracket(1.0 - beta, k, t - k + 1.0).hi;
  }
  return beta_quantile_bracket(1.0 - beta, k + 1.0, t - k).hi;
}

/// Lower and upper bounds for every count 0..T at a fixed per-item level,
/// computed on demand for the counts that actually occur.
class CpBoundTable {
public:
  CpBoundTable(std::uint64_t T, double per_item_beta, UpperConvention convention)
      : T_(T), beta_(per_item_beta), convention_(convention), lower_(T + 1, -1.0),
        upper_(T + 1, -1.0) {
    if (!(per_item_beta > 0.0 && per_item_beta < 1.0))
      throw Error("per-item confidence level must lie in (0, 1)");
  }

  /// Fills the entries for every count present in `votes`.
  void prepare(const VoteCounts& votes, unsigned threads = 1) {
    std::vector<char> present(T_ + 1, 0);
    for (auto c : votes.counts) present[std::min<std::uint64_t>(c, T_)] = 1;
    present[0] = 1;
    std::vector<std::uint64_t> todo;
    for (std::uint64_t c = 0; c <= T_; ++c)
      if (present[c] && lower_[c] < 0) todo.push_back(c);
    parallel_for(todo.size(), resolve_threads(threads), [&](std::size_t k, unsigned) {
      const auto c = todo[k];
      lower_[c] = cp_lower(c, T_, beta_);
      upper_[c] = cp_upper(c, T_, beta_, convention_);
    });
  }

  double lower(std::uint64_t count) {
    if (lower_[count] < 0) lower_[count] = cp_lower(count, T_, beta_);
    return lower_[count];
  }
  double upper(std::uint64_t count) {
    if (upper_[count] < 0) upper_[count] = cp_upper(count, T_, beta_, convention_);
    return upper_[count];
  }

  std::uint64_t trials() const noexcept { return T_; }
  double per_item_beta() const noexcept { return beta_; }
  UpperConvention convention() const noexcept { return convention_; }

private:
  std::uint64_t T_;
  double beta_;
  UpperConvention convention_;
  std::vector<double> lower_;
  std::vector<double> upper_;
};

struct ItemBound {
  ItemId item;
  double value;
};

/// Lower bounds on the item probabilities of I_u and upper bounds on those
/// of every other item, valid simultaneously with probability 1 - alpha_u.
struct ProbBounds {
  UserId user = 0;
  std::vector<ItemBound> lower;  // items of I_u
  std::vector<ItemBound> upper;  // items outside I_u, ascending id
  double alpha_u = 0.0;
  std::size_t m = 0;
};

/// Bonferroni split: each of the m items gets level alpha_u / m.
inline ProbBounds estimate_bounds(std::span<const std::uint32_t> user_counts, UserId user,
                                  std::span<const ItemId> target, CpBoundTable& table) {
  if (target.empty()) throw Error("estimate_bounds: empty target item set");
  ProbBounds out;
  out.user = user;
  out.m = user_counts.size();
  out.alpha_u = table.per_item_beta() * static_cast<double>(out.m);
  std::vector<char> in_target(out.m, 0);
  for (ItemId i : target) {
    if (i >= out.m) throw Error("estimate_bounds: item out of range");
    in_target[i] = 1;
  }
  for (ItemId i : target) out.lower.push_back({i, table.lower(user_counts[i])});
  for (ItemId j = 0; j < out.m; ++j)
    if (!in_target[j]) out.upper.push_back({j, table.upper(user_counts[j])});
  return out;
}

inline ProbBounds estimate_bounds(const VoteCounts& votes, UserId user,
                                  std::span<const ItemId> target, double alpha_u,
                                  UpperConvention convention = UpperConvention::Paper) {
  if (!(alpha_u > 0.0 && alpha_u < 1.0)) throw Error("alpha_u must lie in (0, 1)");
  CpBoundTable table(votes.T, alpha_u / static_cast<double>(votes.n_items), convention);
  return estimate_bounds(votes.of(user), user, target, table);
}

}  // namespace pore
