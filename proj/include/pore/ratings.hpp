#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pore/common.hpp"
#include "pore/rng.hpp"

namespace pore {

/// Admissible rating scores. Zero is reserved for "not rated" and is never a
/// stored score, whatever the interval says.
struct RatingDomain {
  double lo = 1.0;
  double hi = 5.0;
  std::vector<double> levels;  // when non-empty, only these values are admissible

  static RatingDomain interval(double lo, double hi) { return {lo, hi, {}}; }
  static RatingDomain enumerated(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return {values.front(), values.back(), std::move(values)};
  }

  bool contains(double score) const {
    if (score == 0.0 || !std::isfinite(score)) return false;
    if (!levels.empty()) return std::binary_search(levels.begin(), levels.end(), score);
    return score >= lo && score <= hi;
  }

  double max_score() const { return levels.empty() ? hi : levels.back(); }
  double min_score() const { return levels.empty() ? lo : levels.front(); }
};

struct Rating {
  UserId user;
  ItemId item;
  double score;
};

/// Sparse user x item score matrix stored row-wise (CSR), items sorted
/// ascending within each row. Immutable once built.
class RatingMatrix {
public:
  RatingMatrix() = default;

  RatingMatrix(std::size_t n_users, std::size_t n_items, std::vector<Rating> entries,
               RatingDomain domain = {})
      : n_users_(n_users), n_items_(n_items), domain_(std::move(domain)) {
    std::sort(entries.begin(), entries.end(), [](const Rating& a, const Rating& b) {
      return a.user != b.user ? a.user < b.user : a.item < b.item;
    });
    offsets_.assign(n_users_ + 1, 0);
    items_.reserve(entries.size());
    scores_.reserve(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const Rating& r = entries[k];
      if (r.user >= n_users_ || r.item >= n_items_)
        throw Error("rating (" + std::to_string(r.user) + "," + std::to_string(r.item) +
                    ") outside " + std::to_string(n_users_) + "x" + std::to_string(n_items_));
      if (!domain_.contains(r.score))
        throw Error("score " + std::to_string(r.score) + " outside rating domain");
      if (k > 0 && entries[k - 1].user == r.user && entries[k - 1].item == r.item)
        throw Error("duplicate rating for (" + std::to_string(r.user) + "," +
                    std::to_string(r.item) + ")");
      ++offsets_[r.user + 1];
      items_.push_back(r.item);
      scores_.push_back(r.score);
    }
    for (std::size_t u = 0; u < n_users_; ++u) offsets_[u + 1] += offsets_[u];
  }

  std::size_t n_users() const noexcept { return n_users_; }
  std::size_t n_items() const noexcept { return n_items_; }
  std::size_t nnz() const noexcept { return items_.size(); }
  const RatingDomain& domain() const noexcept { return domain_; }

  std::span<const ItemId> items_of(UserId u) const {
    return {items_.data() + offsets_[u], offsets_[u + 1] - offsets_[u]};
  }
  std::span<const double> scores_of(UserId u) const {
    return {scores_.data() + offsets_[u], offsets_[u + 1] - offsets_[u]};
  }
  std::size_t count(UserId u) const { return offsets_[u + 1] - offsets_[u]; }

  bool has_rating(UserId u, ItemId i) const {
    const auto row = items_of(u);
    return std::binary_search(row.begin(), row.end(), i);
  }

  /// Stored score, or 0 when (u, i) is unrated.
  double score(UserId u, ItemId i) const {
    const auto row = items_of(u);
    const auto it = std::lower_bound(row.begin(), row.end(), i);
    if (it == row.end() || *it != i) return 0.0;
    return scores_[offsets_[u] + static_cast<std::size_t>(it - row.begin())];
  }

  std::vector<Rating> entries() const {
    std::vector<Rating> out;
    out.reserve(nnz());
    for (UserId u = 0; u < n_users_; ++u) {
      const auto items = items_of(u);
      const auto scores = scores_of(u);
      for (std::size_t k = 0; k < items.size(); ++k) out.push_back({u, items[k], scores[k]});
    }
    return out;
  }

  /// Copy with extra rows appended after the existing users (ids n, n+1, ...).
  /// Each row lists (item, score) pairs.
  RatingMatrix with_appended_users(
      std::span<const std::vector<std::pair<ItemId, double>>> rows) const {
    auto all = entries();
    UserId next = static_cast<UserId>(n_users_);
    for (const auto& row : rows) {
      for (const auto& [item, score] : row) all.push_back({next, item, score});
      ++next;
    }
    return RatingMatrix(n_users_ + rows.size(), n_items_, std::move(all), domain_);
  }

private:
  std::size_t n_users_ = 0;
  std::size_t n_items_ = 0;
  RatingDomain domain_;
  std::vector<std::size_t> offsets_{0};
  std::vector<ItemId> items_;
  std::vector<double> scores_;
};

/// Internal (contiguous, 0-based) to external id tables. Internal ids follow
/// ascending external id order.
struct IdMap {
  std::vector<std::int64_t> users;
  std::vector<std::int64_t> items;

  UserId user_index(std::int64_t external) const { return lookup(users, external, "user"); }
  ItemId item_index(std::int64_t external) const { return lookup(items, external, "item"); }

private:
  static std::uint32_t lookup(const std::vector<std::int64_t>& table, std::int64_t external,
                              const char* what) {
    const auto it = std::lower_bound(table.begin(), table.end(), external);
    if (it == table.end() || *it != external)
      throw Error(std::string("unknown external ") + what + " id " + std::to_string(external));
    return static_cast<std::uint32_t>(it - table.begin());
  }
};

struct LoadedRatings {
  RatingMatrix matrix;
  IdMap ids;
};

enum class RatingFormat { MovieLensTab, MovieLensDat, GenericCsv };

inline RatingFormat parse_rating_format(std::string_view name) {
  if (name == "movielens-100k-tab" || name == "tab") return RatingFormat::MovieLensTab;
  if (name == "movielens-dat-double-colon" || name == "dat") return RatingFormat::MovieLensDat;
  if (name == "generic-csv" || name == "csv") return RatingFormat::GenericCsv;
  throw Error("unknown rating format '" + std::string(name) + "'");
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, RatingFormat format) {
  std::vector<std::string_view> fields;
  auto push = [&](std::string_view f) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r'))
      f.remove_suffix(1);
    fields.push_back(f);
  };
  switch (format) {
    case RatingFormat::MovieLensTab: {
      std::size_t pos = 0;
      while (pos < line.size()) {
        while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
        if (pos >= line.size()) break;
        std::size_t end = pos;
        while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end]))) ++end;
        fields.push_back(line.substr(pos, end - pos));
        pos = end;
      }
      break;
    }
    case RatingFormat::MovieLensDat:
    case RatingFormat::GenericCsv: {
      const std::string_view sep = format == RatingFormat::MovieLensDat ? "::" : ",";
      std::size_t pos = 0;
      for (;;) {
        const std::size_t hit = line.find(sep, pos);
        if (hit == std::string_view::npos) {
          push(line.substr(pos));
          break;
        }
        push(line.substr(pos, hit - pos));
        pos = hit + sep.size();
      }
      break;
    }
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  if (text.empty()) return false;
  if constexpr (std::is_floating_point_v<T>) {
    // std::from_chars for double is not available on every toolchain we build on.
    std::string copy(text);
    char* end = nullptr;
    out = std::strtod(copy.c_str(), &end);
    return end == copy.c_str() + copy.size();
  } else {
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
  }
}

inline bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

}  // namespace detail

/// Parses ratings from a stream. Ids are remapped to contiguous 0-based
/// indices in ascending external-id order; timestamps are read and dropped.
inline LoadedRatings parse_ratings(std::istream& in, RatingFormat format,
                                   const RatingDomain& domain = {}) {
  struct Raw {
    std::int64_t user, item;
    double score;
    std::size_t line;
  };
  std::vector<Raw> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank(line)) continue;
    const auto fields = detail::split_fields(line, format);
    if (fields.size() < 3 || fields.size() > 4)
      throw ParseError("expected user, item, rating[, timestamp] but found " +
                           std::to_string(fields.size()) + " field(s)",
                       line_no);
    Raw r{};
    r.line = line_no;
    if (!detail::parse_number(fields[0], r.user)) throw ParseError("bad user id", line_no);
    if (!detail::parse_number(fields[1], r.item)) throw ParseError("bad item id", line_no);
    if (!detail::parse_number(fields[2], r.score)) throw ParseError("bad rating", line_no);
    if (fields.size() == 4) {
      double ts = 0;
      if (!detail::parse_number(fields[3], ts)) throw ParseError("bad timestamp", line_no);
    }
    if (!domain.contains(r.score))
      throw ParseError("rating " + std::string(fields[2]) + " outside declared domain", line_no);
    raw.push_back(r);
  }
  if (raw.empty()) throw Error("no ratings in input");

  LoadedRatings out;
  for (const auto& r : raw) {
    out.ids.users.push_back(r.user);
    out.ids.items.push_back(r.item);
  }
  for (auto* table : {&out.ids.users, &out.ids.items}) {
    std::sort(table->begin(), table->end());
    table->erase(std::unique(table->begin(), table->end()), table->end());
  }
  std::vector<Rating> entries;
  entries.reserve(raw.size());
  for (const auto& r : raw)
    entries.push_back({out.ids.user_index(r.user), out.ids.item_index(r.item), r.score});

  // Duplicates are reported against the later of the two lines.
  std::vector<std::size_t> order(raw.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (entries[a].user != entries[b].user) return entries[a].user < entries[b].user;
    if (entries[a].item != entries[b].item) return entries[a].item < entries[b].item;
    return a < b;
  });
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto& a = entries[order[k - 1]];
    const auto& b = entries[order[k]];
    if (a.user == b.user && a.item == b.item)
      throw ParseError("duplicate rating for user " + std::to_string(raw[order[k]].user) +
                           " item " + std::to_string(raw[order[k]].item),
                       raw[order[k]].line);
  }
  out.matrix = RatingMatrix(out.ids.users.size(), out.ids.items.size(), std::move(entries), domain);
  return out;
}

inline LoadedRatings load_ratings(const std::string& path, RatingFormat format,
                                  const RatingDomain& domain = {}) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return parse_ratings(in, format, domain);
}

/// Per-user held-out items E_u, each list sorted ascending.
struct TestSets {
  std::vector<ItemList> items;

  std::size_t n_users() const noexcept { return items.size(); }
  const ItemList& of(UserId u) const { return items[u]; }
};

struct TrainTestSplit {
  RatingMatrix train;
  TestSets test;
};

/// Number of training ratings kept for a user with `count` ratings.
inline std::size_t train_count(std::size_t count, double train_fraction) {
  // The epsilon absorbs representation error, e.g. 0.29 * 100 = 28.999...
  auto k = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(count) + 1e-9));
  k = std::min(k, count);
  if (k == 0 && count > 0) k = 1;
  return k;
}

/// Per-user uniform split: floor(fraction * count) ratings (at least one)
/// go to training, the rest become the user's test items. Each user draws
/// from its own stream derived from `seed`.
inline TrainTestSplit split_train_test(const RatingMatrix& matrix, double train_fraction,
                                       std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0))
    throw Error("train fraction must lie in (0, 1]");
  std::vector<Rating> train;
  train.reserve(matrix.nnz());
  TestSets test;
  test.items.resize(matrix.n_users());
  for (UserId u = 0; u < matrix.n_users(); ++u) {
    const auto items = matrix.items_of(u);
    const auto scores = matrix.scores_of(u);
    if (items.empty()) throw Error("user " + std::to_string(u) + " has no ratings");
    std::vector<std::size_t> order(items.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    Rng rng(hash_seed(seed, u));
    shuffle(order, rng);
    const std::size_t keep = train_count(items.size(), train_fraction);
    for (std::size_t k = 0; k < order.size(); ++k) {
      const std::size_t idx = order[k];
      if (k < keep)
        train.push_back({u, items[idx], scores[idx]});
      else
        test.items[u].push_back(items[idx]);
    }
    std::sort(test.items[u].begin(), test.items[u].end());
  }
  return {RatingMatrix(matrix.n_users(), matrix.n_items(), std::move(train), matrix.domain()),
          std::move(test)};
}

}  // namespace pore
