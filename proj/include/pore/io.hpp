#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "pore/common.hpp"
#include "pore/ensemble.hpp"
#include "pore/ratings.hpp"

namespace pore {

// Plain-text formats shared by the command-line tools. Every file starts
// with a `#<kind> v1 key=value ...` line; rows are comma separated.

/// Shortest text that reads back as the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::vector<std::string_view> split_on(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t hit = text.find(sep, pos);
    if (hit == std::string_view::npos) {
      out.push_back(text.substr(pos));
      return out;
    }
    out.push_back(text.substr(pos, hit - pos));
    pos = hit + 1;
  }
}

/// Reads `#<kind> v1 k=v k=v`; throws unless kind and version match.
inline std::map<std::string, std::string> read_header(std::istream& in, std::string_view kind) {
  std::string line;
  if (!std::getline(in, line)) throw Error("empty " + std::string(kind) + " file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::string expect = "#" + std::string(kind) + " v1";
  if (line.compare(0, expect.size(), expect) != 0)
    throw ParseError("expected header '" + expect + " ...'", 1);
  std::map<std::string, std::string> kv;
  std::istringstream rest(line.substr(expect.size()));
  std::string tok;
  while (rest >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw ParseError("bad header field '" + tok + "'", 1);
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}

template <typename T>
T header_value(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw ParseError("header lacks '" + key + "'", 1);
  T v{};
  if constexpr (std::is_same_v<T, std::string>) {
    v = it->second;
  } else if (!parse_number(it->second, v)) {
    throw ParseError("bad header value " + key + "=" + it->second, 1);
  }
  return v;
}

template <typename T>
T field(std::string_view text, std::size_t line, const char* what) {
  T v{};
  if (!parse_number(text, v)) throw ParseError(std::string("bad ") + what, line);
  return v;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return in;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Rating domains as text: "1:5" for an interval, "1,2,3,4,5" for levels.

inline std::string format_domain(const RatingDomain& d) {
  if (d.levels.empty()) return format_double(d.lo) + ":" + format_double(d.hi);
  std::string out;
  for (std::size_t k = 0; k < d.levels.size(); ++k) {
    if (k) out += ',';
    out += format_double(d.levels[k]);
  }
  return out;
}

inline RatingDomain parse_domain(std::string_view text) {
  auto num = [&](std::string_view t) {
    double v = 0;
    if (!detail::parse_number(t, v)) throw Error("bad rating domain '" + std::string(text) + "'");
    return v;
  };
  if (const auto colon = text.find(':'); colon != std::string_view::npos) {
    const double lo = num(text.substr(0, colon)), hi = num(text.substr(colon + 1));
    if (!(lo <= hi)) throw Error("rating domain needs lo <= hi");
    return RatingDomain::interval(lo, hi);
  }
  std::vector<double> levels;
  for (auto part : detail::split_on(text, ',')) levels.push_back(num(part));
  return RatingDomain::enumerated(std::move(levels));
}

// ---------------------------------------------------------------------------
// Split file

struct SplitFile {
  TrainTestSplit split;
  std::uint64_t seed = 0;
  double fraction = 0.0;
};

inline void write_split(std::ostream& out, const TrainTestSplit& split, std::uint64_t seed,
                        double fraction) {
  const auto& train = split.train;
  out << "#split v1 n=" << train.n_users() << " m=" << train.n_items() << " seed=" << seed
      << " fraction=" << format_double(fraction) << " domain=" << format_domain(train.domain())
      << '\n';
  for (UserId u = 0; u < train.n_users(); ++u) {
    const auto items = train.items_of(u);
    const auto scores = train.scores_of(u);
    for (std::size_t k = 0; k < items.size(); ++k)
      out << "train," << u << ',' << items[k] << ',' << format_double(scores[k]) << '\n';
  }
  for (UserId u = 0; u < split.test.n_users(); ++u)
    for (ItemId i : split.test.of(u)) out << "test," << u << ',' << i << '\n';
}

inline SplitFile read_split(std::istream& in) {
  const auto kv = detail::read_header(in, "split");
  SplitFile out;
  const auto n = detail::header_value<std::size_t>(kv, "n");
  const auto m = detail::header_value<std::size_t>(kv, "m");
  out.seed = detail::header_value<std::uint64_t>(kv, "seed");
  out.fraction = detail::header_value<double>(kv, "fraction");
  const RatingDomain domain =
      kv.count("domain") ? parse_domain(kv.at("domain")) : RatingDomain{};
  std::vector<Rating> train;
  out.split.test.items.assign(n, {});
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank(line)) continue;
    if (line.back() == '\r') line.pop_back();
    const auto f = detail::split_on(line, ',');
    if (f[0] == "train" && f.size() == 4) {
      train.push_back({detail::field<UserId>(f[1], line_no, "user"),
                       detail::field<ItemId>(f[2], line_no, "item"),
                       detail::field<double>(f[3], line_no, "score")});
    } else if (f[0] == "test" && f.size() == 3) {
      const auto u = detail::field<UserId>(f[1], line_no, "user");
      const auto i = detail::field<ItemId>(f[2], line_no, "item");
      if (u >= n || i >= m) throw ParseError("test item out of range", line_no);
      out.split.test.items[u].push_back(i);
    } else {
      throw ParseError("expected train,u,i,score or test,u,i", line_no);
    }
  }
  out.split.train = RatingMatrix(n, m, std::move(train), domain);
  for (auto& list : out.split.test.items) std::sort(list.begin(), list.end());
  return out;
}

inline void save_split(const std::string& path, const TrainTestSplit& split, std::uint64_t seed,
                       double fraction) {
  auto out = detail::open_out(path);
  write_split(out, split, seed, fraction);
  if (!out) throw Error("write failed: " + path);
}

inline SplitFile load_split(const std::string& path) {
  auto in = detail::open_in(path);
  return read_split(in);
}

// ---------------------------------------------------------------------------
// Votes file

inline void write_votes(std::ostream& out, const VoteCounts& v) {
  out << "#votes v1 n=" << v.n_users << " m=" << v.n_items << " T=" << v.T << " s=" << v.s
      << " nprime=" << v.n_prime << " algo=" << v.algo << " seed=" << v.master_seed << '\n';
  for (UserId u = 0; u < v.n_users; ++u) {
    const auto row = v.of(u);
    for (ItemId i = 0; i < v.n_items; ++i)
      if (row[i]) out << u << ',' << i << ',' << row[i] << '\n';
  }
}

inline VoteCounts read_votes(std::istream& in) {
  const auto kv = detail::read_header(in, "votes");
  VoteCounts v(detail::header_value<std::size_t>(kv, "n"),
               detail::header_value<std::size_t>(kv, "m"));
  v.T = detail::header_value<std::uint64_t>(kv, "T");
  v.s = detail::header_value<std::size_t>(kv, "s");
  v.n_prime = detail::header_value<std::size_t>(kv, "nprime");
  v.algo = detail::header_value<std::string>(kv, "algo");
  v.master_seed = detail::header_value<std::uint64_t>(kv, "seed");
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank(line)) continue;
    if (line.back() == '\r') line.pop_back();
    const auto f = detail::split_on(line, ',');
    if (f.size() != 3) throw ParseError("expected u,i,count", line_no);
    const auto u = detail::field<UserId>(f[0], line_no, "user");
    const auto i = detail::field<ItemId>(f[1], line_no, "item");
    const auto c = detail::field<std::uint32_t>(f[2], line_no, "count");
    if (u >= v.n_users || i >= v.n_items) throw ParseError("entry out of range", line_no);
    if (c > v.T) throw ParseError("count exceeds T", line_no);
    v.counts[static_cast<std::size_t>(u) * v.n_items + i] = c;
  }
  return v;
}

inline void save_votes(const std::string& path, const VoteCounts& v) {
  auto out = detail::open_out(path);
  write_votes(out, v);
  if (!out) throw Error("write failed: " + path);
}

inline VoteCounts load_votes(const std::string& path) {
  auto in = detail::open_in(path);
  return read_votes(in);
}

// ---------------------------------------------------------------------------
// Id map: `user,<internal>,<external>` and `item,<internal>,<external>` rows.

inline void write_idmap(std::ostream& out, const IdMap& ids) {
  out << "#idmap v1 n=" << ids.users.size() << " m=" << ids.items.size() << '\n';
  for (std::size_t k = 0; k < ids.users.size(); ++k) out << "user," << k << ',' << ids.users[k] << '\n';
  for (std::size_t k = 0; k < ids.items.size(); ++k) out << "item," << k << ',' << ids.items[k] << '\n';
}

inline IdMap read_idmap(std::istream& in) {
  const auto kv = detail::read_header(in, "idmap");
  IdMap ids;
  ids.users.resize(detail::header_value<std::size_t>(kv, "n"));
  ids.items.resize(detail::header_value<std::size_t>(kv, "m"));
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank(line)) continue;
    if (line.back() == '\r') line.pop_back();
    const auto f = detail::split_on(line, ',');
    if (f.size() != 3 || (f[0] != "user" && f[0] != "item"))
      throw ParseError("expected user|item,internal,external", line_no);
    auto& table = f[0] == "user" ? ids.users : ids.items;
    const auto k = detail::field<std::size_t>(f[1], line_no, "internal id");
    if (k >= table.size()) throw ParseError("internal id out of range", line_no);
    table[k] = detail::field<std::int64_t>(f[2], line_no, "external id");
  }
  return ids;
}

inline void save_idmap(const std::string& path, const IdMap& ids) {
  auto out = detail::open_out(path);
  write_idmap(out, ids);
  if (!out) throw Error("write failed: " + path);
}

inline IdMap load_idmap(const std::string& path) {
  auto in = detail::open_in(path);
  return read_idmap(in);
}

}  // namespace pore
