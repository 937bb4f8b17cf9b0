#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "pore/base_rec.hpp"
#include "pore/bounds.hpp"
#include "pore/common.hpp"
#include "pore/io.hpp"
#include "pore/ratings.hpp"

namespace pore {

/// Everything a run needs. Defaults follow the MovieLens-100k setting
/// (N' = 1, N = 10, alpha = 0.001, s = 200) with T lowered to 10000.
struct RunConfig {
  std::string dataset;
  RatingFormat format = RatingFormat::MovieLensTab;
  RatingDomain domain;
  double split_fraction = 0.75;
  std::uint64_t split_seed = 1;

  AlgoConfig algo;
  std::size_t s = 200;
  std::uint64_t T = 10000;
  std::size_t n_prime = 1;
  std::size_t N = 10;
  double alpha = 0.001;
  std::vector<std::uint64_t> e_list{0};
  bool exact = false;
  UpperConvention convention = UpperConvention::Paper;
  std::uint64_t seed = 7;

  std::string output = "out";
  unsigned threads = 0;  // 0: PORE_THREADS, else all cores
  std::uint64_t chunk = 0;  // training checkpoint interval, 0 = no checkpoints
};

/// Flat key -> value settings. `[section]` lines prefix later keys with
/// "section."; '#' starts a comment; values may be double-quoted.
using Settings = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

}  // namespace detail

inline Settings parse_settings(std::istream& in) {
  Settings out;
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
      if (line[k] == '"') quoted = !quoted;
      if (line[k] == '#' && !quoted) {
        line.resize(k);
        break;
      }
    }
    const std::string text = detail::trim(line);
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') throw ParseError("unterminated section header", line_no);
      section = detail::trim(std::string_view(text).substr(1, text.size() - 2));
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
    std::string key = detail::trim(std::string_view(text).substr(0, eq));
    std::string value = detail::trim(std::string_view(text).substr(eq + 1));
    if (key.empty()) throw ParseError("empty key", line_no);
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    out[section.empty() ? key : section + "." + key] = value;
  }
  return out;
}

inline Settings load_settings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  return parse_settings(in);
}

/// "0,1,5" or "0..30" or a mix such as "0..10,20,30". Sorted, deduplicated.
inline std::vector<std::uint64_t> parse_e_list(std::string_view text) {
  std::vector<std::uint64_t> out;
  const std::string cleaned = detail::trim(text);
  if (cleaned.empty()) return out;
  for (auto part : detail::split_on(cleaned, ',')) {
    const std::string p = detail::trim(part);
    std::uint64_t a = 0, b = 0;
    if (const auto dots = p.find(".."); dots != std::string::npos) {
      if (!detail::parse_number(std::string_view(p).substr(0, dots), a) ||
          !detail::parse_number(std::string_view(p).substr(dots + 2), b) || b < a)
        throw Error("bad e range '" + p + "'");
      if (b - a > 1'000'000) throw Error("e range too long");
      for (std::uint64_t e = a; e <= b; ++e) out.push_back(e);
    } else {
      if (!detail::parse_number(std::string_view(p), a)) throw Error("bad e value '" + p + "'");
      out.push_back(a);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace detail {

template <typename T>
T setting_number(const std::string& key, const std::string& value) {
  T v{};
  if (!parse_number(std::string_view(value), v)) throw Error("bad value for " + key + ": " + value);
  return v;
}

inline bool setting_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw Error("bad value for " + key + ": " + value);
}

}  // namespace detail

/// Applies settings on top of `cfg`. Unknown keys are an error.
inline void apply_settings(RunConfig& cfg, const Settings& settings) {
  using detail::setting_number;
  for (const auto& [key, value] : settings) {
    if (key == "dataset") cfg.dataset = value;
    else if (key == "format") cfg.format = parse_rating_format(value);
    else if (key == "domain") cfg.domain = parse_domain(value);
    else if (key == "split" || key == "split.fraction") cfg.split_fraction = setting_number<double>(key, value);
    else if (key == "split.seed") cfg.split_seed = setting_number<std::uint64_t>(key, value);
    else if (key == "algo") cfg.algo.algo = parse_algo(value);
    else if (key == "ir.k") cfg.algo.ir.k = setting_number<std::size_t>(key, value);
    else if (key == "bpr.d") cfg.algo.bpr.dim = setting_number<std::size_t>(key, value);
    else if (key == "bpr.epochs") cfg.algo.bpr.epochs = setting_number<std::size_t>(key, value);
    else if (key == "bpr.learn_rate") cfg.algo.bpr.learn_rate = setting_number<double>(key, value);
    else if (key == "bpr.reg") cfg.algo.bpr.reg = setting_number<double>(key, value);
    else if (key == "bpr.neg_samples") cfg.algo.bpr.neg_samples = setting_number<std::size_t>(key, value);
    else if (key == "bpr.init_scale") cfg.algo.bpr.init_scale = setting_number<double>(key, value);
    else if (key == "s") cfg.s = setting_number<std::size_t>(key, value);
    else if (key == "T") cfg.T = setting_number<std::uint64_t>(key, value);
    else if (key == "nprime") cfg.n_prime = setting_number<std::size_t>(key, value);
    else if (key == "N") cfg.N = setting_number<std::size_t>(key, value);
    else if (key == "alpha") cfg.alpha = setting_number<double>(key, value);
    else if (key == "e") cfg.e_list = parse_e_list(value);
    else if (key == "mode") {
      if (value != "exact" && value != "approx") throw Error("mode must be exact or approx");
      cfg.exact = value == "exact";
    } else if (key == "exact") cfg.exact = detail::setting_bool(key, value);
    else if (key == "bounds.upper_convention") cfg.convention = parse_upper_convention(value);
    else if (key == "seed") cfg.seed = setting_number<std::uint64_t>(key, value);
    else if (key == "output") cfg.output = value;
    else if (key == "threads") cfg.threads = setting_number<unsigned>(key, value);
    else if (key == "train.chunk") cfg.chunk = setting_number<std::uint64_t>(key, value);
    else throw Error("unknown setting '" + key + "'");
  }
}

inline void validate(const RunConfig& cfg) {
  if (cfg.s < 1) throw Error("s must be at least 1");
  if (cfg.T < 1) throw Error("T must be at least 1");
  if (cfg.n_prime < 1) throw Error("nprime must be at least 1");
  if (cfg.N < 1) throw Error("N must be at least 1");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
  if (!(cfg.split_fraction > 0.0 && cfg.split_fraction <= 1.0))
    throw Error("split fraction must lie in (0, 1]");
  if (cfg.algo.ir.k < 1) throw Error("ir.k must be at least 1");
  if (cfg.algo.bpr.dim < 1) throw Error("bpr.d must be at least 1");
}

/// The settings as key=value pairs, e.g. for manifests.
inline Settings describe(const RunConfig& cfg) {
  Settings s;
  s["dataset"] = cfg.dataset;
  s["format"] = cfg.format == RatingFormat::MovieLensTab   ? "tab"
                : cfg.format == RatingFormat::MovieLensDat ? "dat"
                                                            : "csv";
  s["domain"] = format_domain(cfg.domain);
  s["split.fraction"] = format_double(cfg.split_fraction);
  s["split.seed"] = std::to_string(cfg.split_seed);
  s["algo"] = std::string(algo_tag(cfg.algo.algo));
  if (cfg.algo.algo == Algo::ItemKnn) {
    s["ir.k"] = std::to_string(cfg.algo.ir.k);
  } else {
    s["bpr.d"] = std::to_string(cfg.algo.bpr.dim);
    s["bpr.epochs"] = std::to_string(cfg.algo.bpr.epochs);
    s["bpr.learn_rate"] = format_double(cfg.algo.bpr.learn_rate);
    s["bpr.reg"] = format_double(cfg.algo.bpr.reg);
    s["bpr.neg_samples"] = std::to_string(cfg.algo.bpr.neg_samples);
    s["bpr.init_scale"] = format_double(cfg.algo.bpr.init_scale);
  }
  s["s"] = std::to_string(cfg.s);
  s["T"] = std::to_string(cfg.T);
  s["nprime"] = std::to_string(cfg.n_prime);
  s["N"] = std::to_string(cfg.N);
  s["alpha"] = format_double(cfg.alpha);
  std::string e;
  for (auto v : cfg.e_list) e += (e.empty() ? "" : ",") + std::to_string(v);
  s["e"] = e;
  s["mode"] = cfg.exact ? "exact" : "approx";
  s["bounds.upper_convention"] = std::string(convention_name(cfg.convention));
  s["seed"] = std::to_string(cfg.seed);
  return s;
}

}  // namespace pore
