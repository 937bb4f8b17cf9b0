#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include "pore/ratings.hpp"

namespace pore::test {

/// ml-100k u.data, from PORE_ML100K or the build-time data directory.
inline std::string ml100k_path() {
  if (const char* env = std::getenv("PORE_ML100K")) return env;
  return std::string(PORE_DATA_DIR) + "/ml-100k/u.data";
}

inline bool have_ml100k() { return std::filesystem::exists(ml100k_path()); }

/// Dense helper: rows of scores, 0 = unrated.
inline RatingMatrix dense(const std::vector<std::vector<double>>& rows,
                          RatingDomain domain = RatingDomain::interval(1, 5)) {
  std::vector<Rating> entries;
  const std::size_t m = rows.empty() ? 0 : rows[0].size();
  for (UserId u = 0; u < rows.size(); ++u)
    for (ItemId i = 0; i < m; ++i)
      if (rows[u][i] != 0.0) entries.push_back({u, i, rows[u][i]});
  return RatingMatrix(rows.size(), m, std::move(entries), domain);
}

inline std::vector<UserId> all_users(std::size_t n) {
  std::vector<UserId> v(n);
  for (UserId u = 0; u < n; ++u) v[u] = u;
  return v;
}

}  // namespace pore::test
