#pragma once

// Command implementations behind the `pore` executable. Each reads and
// writes files under cfg.output and logs a short summary to `log`.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pore/base_rec.hpp"
#include "pore/certify.hpp"
#include "pore/config.hpp"
#include "pore/ensemble.hpp"
#include "pore/io.hpp"
#include "pore/metrics.hpp"
#include "pore/oracle.hpp"
#include "pore/ratings.hpp"

namespace pore {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct OutputPaths {
  fs::path dir;
  fs::path split() const { return dir / "split.csv"; }
  fs::path idmap() const { return dir / "idmap.csv"; }
  fs::path votes() const { return dir / "votes.csv"; }
  fs::path partial() const { return dir / "votes.partial.csv"; }
  fs::path progress() const { return dir / "train.progress.json"; }
  fs::path manifest() const { return dir / "manifest.json"; }
};

namespace detail {

inline std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

inline Json settings_json(const Settings& s) {
  Json j = Json::object();
  for (const auto& [k, v] : s) j[k] = v;
  return j;
}

/// `# pore <command> k=v ...` first line of every CSV we write.
inline std::string manifest_line(const std::string& command, const Settings& s) {
  std::string out = "# pore " + command;
  for (const auto& [k, v] : s) out += " " + k + "=" + (v.empty() ? "\"\"" : v);
  return out + "\n";
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

/// Keys that define the ensemble itself; a votes file must agree on them.
inline Settings training_fingerprint(const RunConfig& cfg) {
  Settings all = describe(cfg), out;
  for (const char* key : {"algo", "ir.k", "bpr.d", "bpr.epochs", "bpr.learn_rate", "bpr.reg",
                          "bpr.neg_samples", "bpr.init_scale", "s", "T", "nprime", "seed",
                          "split.fraction", "split.seed"})
    if (all.count(key)) out[key] = all[key];
  return out;
}

inline std::string external_user(const IdMap* ids, UserId u) {
  return ids ? std::to_string(ids->users.at(u)) : std::to_string(u);
}

inline std::string external_item(const IdMap* ids, ItemId i) {
  return ids ? std::to_string(ids->items.at(i)) : std::to_string(i);
}

}  // namespace detail

// ---------------------------------------------------------------------------

/// Loads the dataset, splits it and writes split.csv and idmap.csv.
inline SplitFile cmd_ingest(const RunConfig& cfg, std::ostream& log) {
  if (cfg.dataset.empty()) throw Error("no dataset given (set `dataset` or pass --dataset)");
  const OutputPaths out{cfg.output};
  fs::create_directories(out.dir);
  const auto data = load_ratings(cfg.dataset, cfg.format, cfg.domain);
  SplitFile split{split_train_test(data.matrix, cfg.split_fraction, cfg.split_seed),
                  cfg.split_seed, cfg.split_fraction};
  save_split(out.split().string(), split.split, cfg.split_seed, cfg.split_fraction);
  save_idmap(out.idmap().string(), data.ids);
  std::size_t test_total = 0;
  for (const auto& t : split.split.test.items) test_total += t.size();
  log << "ingest: " << data.matrix.n_users() << " users, " << data.matrix.n_items() << " items, "
      << data.matrix.nnz() << " ratings; train " << split.split.train.nnz() << ", test "
      << test_total << "\n";
  return split;
}

/// The split for this run: re-ingested when a dataset is configured,
/// otherwise read back from the output directory.
inline SplitFile obtain_split(const RunConfig& cfg, std::ostream& log) {
  const OutputPaths out{cfg.output};
  if (!cfg.dataset.empty()) return cmd_ingest(cfg, log);
  if (!fs::exists(out.split()))
    throw Error("no split in " + out.dir.string() + "; run ingest or pass --dataset");
  auto split = load_split(out.split().string());
  if (split.seed != cfg.split_seed || split.fraction != cfg.split_fraction)
    throw Error("split.csv was made with split.seed=" + std::to_string(split.seed) +
                " fraction=" + format_double(split.fraction) + ", config says split.seed=" +
                std::to_string(cfg.split_seed) + " fraction=" + format_double(cfg.split_fraction));
  return split;
}

struct TrainOptions {
  /// Stop after this many members in this invocation, leaving a checkpoint
  /// (0 = run to completion). Used to exercise resumption.
  std::uint64_t max_members = 0;
};

/// Trains the ensemble and writes votes.csv plus manifest.json. With
/// cfg.chunk > 0, progress is checkpointed every `chunk` members and an
/// interrupted run picks up where it stopped.
inline bool cmd_train(const RunConfig& cfg, std::ostream& log, const TrainOptions& opt = {}) {
  validate(cfg);
  const auto started = std::chrono::steady_clock::now();
  const std::string started_at = detail::utc_now();
  const OutputPaths out{cfg.output};
  fs::create_directories(out.dir);
  const auto split = obtain_split(cfg, log);
  const RatingMatrix& train = split.split.train;
  if (cfg.s > train.n_users())
    throw Error("s=" + std::to_string(cfg.s) + " exceeds the " + std::to_string(train.n_users()) +
                " users");

  const Settings fingerprint = detail::training_fingerprint(cfg);
  VoteCounts votes;
  std::uint64_t done = 0;
  if (fs::exists(out.partial())) {
    std::ifstream in(out.progress());
    if (!in) throw Error("checkpoint without progress file in " + out.dir.string());
    const Json prog = Json::parse(in);
    if (prog.at("fingerprint") != detail::settings_json(fingerprint))
      throw Error("checkpoint in " + out.dir.string() +
                  " was made with different settings; remove it to start over");
    votes = load_votes(out.partial().string());
    done = votes.T;
    log << "train: resuming at member " << done << " of " << cfg.T << "\n";
  }

  const std::uint64_t step = cfg.chunk > 0 ? cfg.chunk : cfg.T;
  std::uint64_t ran = 0;
  while (done < cfg.T) {
    std::uint64_t end = std::min(cfg.T, done + step);
    if (opt.max_members > 0) end = std::min(end, done + (opt.max_members - ran));
    auto batch = accumulate_votes(train, cfg.algo, cfg.s, cfg.n_prime, cfg.seed, done, end,
                                  cfg.threads);
    if (done == 0)
      votes = std::move(batch);
    else
      votes.merge(batch);
    ran += end - done;
    done = end;
    const bool stopping = opt.max_members > 0 && ran >= opt.max_members && done < cfg.T;
    if ((cfg.chunk > 0 || stopping) && done < cfg.T) {
      save_votes(out.partial().string(), votes);
      detail::write_text(out.progress(),
                         Json{{"fingerprint", detail::settings_json(fingerprint)},
                              {"members_done", done}}
                                 .dump(2) +
                             "\n");
    }
    if (stopping) {
      log << "train: stopped after " << done << " of " << cfg.T << " members (checkpoint kept)\n";
      return false;
    }
  }

  save_votes(out.votes().string(), votes);
  fs::remove(out.partial());
  fs::remove(out.progress());
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  Json manifest{{"command", "train"},
                {"settings", detail::settings_json(describe(cfg))},
                {"n_users", train.n_users()},
                {"n_items", train.n_items()},
                {"T", votes.T},
                {"seeds", {{"split", cfg.split_seed}, {"ensemble", cfg.seed}}},
                {"files", {{"split", "split.csv"}, {"votes", "votes.csv"}, {"idmap", "idmap.csv"}}},
                {"started_at", started_at},
                {"wall_seconds", wall}};
  detail::write_text(out.manifest(), manifest.dump(2) + "\n");
  log << "train: " << votes.T << " members, s=" << votes.s << ", N'=" << votes.n_prime << ", "
      << std::fixed << std::setprecision(1) << wall << " s\n";
  return true;
}

// ---------------------------------------------------------------------------

struct Loaded {
  SplitFile split;
  VoteCounts votes;
  std::optional<IdMap> ids;
};

/// Reads split.csv, votes.csv (and idmap.csv when present) and checks the
/// votes against every ensemble setting that was set explicitly.
inline Loaded load_run(const RunConfig& cfg, const Settings& explicit_keys) {
  const OutputPaths out{cfg.output};
  if (!fs::exists(out.votes())) throw Error("no votes.csv in " + out.dir.string() + "; run train");
  if (!fs::exists(out.split())) throw Error("no split.csv in " + out.dir.string());
  Loaded run{load_split(out.split().string()), load_votes(out.votes().string()), std::nullopt};
  if (fs::exists(out.idmap())) run.ids = load_idmap(out.idmap().string());
  const auto& v = run.votes;
  auto check = [&](const char* key, const std::string& have) {
    if (!explicit_keys.count(key)) return;
    const Settings d = describe(cfg);
    if (d.at(key) != have)
      throw Error(std::string("votes file has ") + key + "=" + have + " but config says " + key +
                  "=" + d.at(key));
  };
  check("s", std::to_string(v.s));
  check("T", std::to_string(v.T));
  check("nprime", std::to_string(v.n_prime));
  check("algo", v.algo);
  check("seed", std::to_string(v.master_seed));
  if (v.n_users != run.split.split.train.n_users() || v.n_items != run.split.split.train.n_items())
    throw Error("votes and split disagree on matrix dimensions");
  return run;
}

enum class CertTarget { TestItems, CleanTopN };

inline CertTarget parse_cert_target(std::string_view name) {
  if (name == "test-items") return CertTarget::TestItems;
  if (name == "clean-topn") return CertTarget::CleanTopN;
  throw Error("unknown target '" + std::string(name) + "' (expected test-items or clean-topn)");
}

inline std::vector<ItemList> certification_targets(const Loaded& run, CertTarget target,
                                                   std::size_t N) {
  const auto& train = run.split.split.train;
  if (target == CertTarget::TestItems) return run.split.split.test.items;
  std::vector<ItemList> out(train.n_users());
  for (UserId u = 0; u < train.n_users(); ++u) {
    out[u] = ensemble_recommend(run.votes, train, u, N);
    std::sort(out[u].begin(), out[u].end());
  }
  return out;
}

/// Mean certified metrics per e over users with a non-empty target.
inline std::vector<MetricRow> summarize(std::span<const CertResult> results,
                                        std::span<const ItemList> targets, std::size_t N,
                                        std::span<const std::uint64_t> e_list) {
  std::vector<MetricRow> rows;
  const std::size_t width = e_list.size();
  if (width == 0) return rows;
  const std::size_t users = results.size() / width;
  for (std::size_t k = 0; k < width; ++k) {
    std::vector<PrecisionRecall> per_user;
    per_user.reserve(users);
    for (std::size_t j = 0; j < users; ++j) {
      const auto& res = results[j * width + k];
      per_user.push_back(certified_metrics(res.r, N, targets[res.user].size()));
    }
    if (per_user.empty()) {
      rows.push_back({e_list[k], 0.0, 0.0, 0.0, 0});
      continue;
    }
    rows.push_back(average_over_users(per_user, e_list[k]));
  }
  return rows;
}

struct CertifyRun {
  CertifyReport report;
  std::vector<MetricRow> pore;
  std::vector<MetricRow> bagging;
};

/// Writes `<prefix>_users.csv`, `<prefix>_summary.csv` and `<prefix>_summary.json`.
inline CertifyRun cmd_certify(const RunConfig& cfg, const Settings& explicit_keys,
                              CertTarget target, bool with_pore, bool with_bagging,
                              const std::string& prefix, std::ostream& log) {
  validate(cfg);
  if (cfg.e_list.empty()) throw Error("empty e list: nothing to certify");
  const Loaded run = load_run(cfg, explicit_keys);
  const auto targets = certification_targets(run, target, cfg.N);

  CertifyOptions opt;
  opt.alpha = cfg.alpha;
  opt.N = cfg.N;
  opt.e_list = cfg.e_list;
  opt.exact = cfg.exact;
  opt.convention = cfg.convention;
  opt.bagging = with_bagging;
  opt.threads = cfg.threads;
  CertifyRun out;
  out.report = compute_all_r(run.votes, targets, opt);
  out.pore = summarize(out.report.pore, targets, cfg.N, cfg.e_list);
  if (with_bagging) out.bagging = summarize(out.report.bagging, targets, cfg.N, cfg.e_list);

  Settings header = describe(cfg);
  header["target"] = target == CertTarget::TestItems ? "test-items" : "clean-topn";
  header["T"] = std::to_string(run.votes.T);
  header["s"] = std::to_string(run.votes.s);
  header["nprime"] = std::to_string(run.votes.n_prime);
  header["algo"] = run.votes.algo;
  header["seed"] = std::to_string(run.votes.master_seed);
  const std::string mode = cfg.exact ? "exact" : "approx";
  const IdMap* ids = run.ids ? &*run.ids : nullptr;

  const OutputPaths paths{cfg.output};
  std::ostringstream users;
  users << detail::manifest_line("certify", header);
  users << "user,e,r,mode,alpha";
  if (with_bagging && with_pore) users << ",bagging_r";
  users << "\n";
  const auto& primary = with_pore ? out.report.pore : out.report.bagging;
  for (std::size_t k = 0; k < primary.size(); ++k) {
    const auto& res = primary[k];
    users << detail::external_user(ids, res.user) << ',' << res.e << ',' << res.r << ',' << mode
          << ',' << format_double(res.alpha);
    if (with_bagging && with_pore) users << ',' << out.report.bagging[k].r;
    users << "\n";
  }
  detail::write_text(paths.dir / (prefix + "_users.csv"), users.str());

  const auto& main_rows = with_pore ? out.pore : out.bagging;
  std::ostringstream summary;
  summary << detail::manifest_line("certify", header);
  summary << "e,cert_precision,cert_recall,cert_f1,n_users";
  if (with_bagging && with_pore) summary << ",bagging_precision,bagging_recall,bagging_f1";
  summary << "\n";
  Json rows = Json::array();
  for (std::size_t k = 0; k < main_rows.size(); ++k) {
    const auto& r = main_rows[k];
    summary << r.e << ',' << format_double(r.precision) << ',' << format_double(r.recall) << ','
            << format_double(r.f1) << ',' << r.n_users;
    Json row{{"e", r.e},
             {"cert_precision", r.precision},
             {"cert_recall", r.recall},
             {"cert_f1", r.f1},
             {"n_users", r.n_users}};
    if (with_bagging && with_pore) {
      const auto& b = out.bagging[k];
      summary << ',' << format_double(b.precision) << ',' << format_double(b.recall) << ','
              << format_double(b.f1);
      row["bagging_precision"] = b.precision;
      row["bagging_recall"] = b.recall;
      row["bagging_f1"] = b.f1;
    }
    summary << "\n";
    rows.push_back(row);
  }
  detail::write_text(paths.dir / (prefix + "_summary.csv"), summary.str());
  Json doc{{"command", prefix},
           {"settings", detail::settings_json(header)},
           {"skipped_users", out.report.skipped.size()},
           {"rows", rows}};
  detail::write_text(paths.dir / (prefix + "_summary.json"), doc.dump(2) + "\n");

  for (const auto& r : main_rows)
    log << prefix << ": e=" << r.e << " P=" << format_double(r.precision)
        << " R=" << format_double(r.recall) << " F1=" << format_double(r.f1) << "\n";
  if (!out.report.skipped.empty())
    log << prefix << ": " << out.report.skipped.size() << " user(s) with an empty target skipped\n";
  return out;
}

// ---------------------------------------------------------------------------

struct EvaluateRun {
  MetricRow ensemble;
  std::optional<MetricRow> single;
  std::optional<CertifyRun> certified;
};

/// Mean standard metrics of top-N lists against the held-out items.
inline MetricRow score_lists(const std::vector<ItemList>& lists, const TestSets& test,
                             std::size_t N) {
  std::vector<PrecisionRecall> rows;
  for (UserId u = 0; u < test.n_users(); ++u) {
    if (test.of(u).empty()) continue;
    rows.push_back(standard_metrics(lists[u], test.of(u), N));
  }
  return average_over_users(rows, 0);
}

/// Top-N of one base model trained on every user of `train`.
inline std::vector<ItemList> single_model_lists(const RatingMatrix& train, const AlgoConfig& algo,
                                                std::size_t N, std::uint64_t seed) {
  std::vector<UserId> all(train.n_users());
  for (UserId u = 0; u < all.size(); ++u) all[u] = u;
  const BaseModel model(SubmatrixView{&train, all}, algo, model_seed(seed));
  std::vector<ItemList> lists(train.n_users());
  std::vector<double> scratch(train.n_items(), 0.0);
  for (UserId u = 0; u < all.size(); ++u) lists[u] = model.recommend(u, N, scratch);
  return lists;
}

/// Standard metrics at e = 0 for the ensemble (and optionally one full-data
/// model); certified metrics as well when the e list is non-empty.
inline EvaluateRun cmd_evaluate(const RunConfig& cfg, const Settings& explicit_keys,
                                bool with_single, std::ostream& log) {
  validate(cfg);
  const Loaded run = load_run(cfg, explicit_keys);
  const auto& train = run.split.split.train;
  const auto& test = run.split.split.test;
  EvaluateRun out;
  std::vector<ItemList> lists(train.n_users());
  for (UserId u = 0; u < train.n_users(); ++u) lists[u] = ensemble_recommend(run.votes, train, u, cfg.N);
  out.ensemble = score_lists(lists, test, cfg.N);
  if (with_single) out.single = score_lists(single_model_lists(train, cfg.algo, cfg.N, cfg.seed), test, cfg.N);

  Settings header = describe(cfg);
  header["T"] = std::to_string(run.votes.T);
  header["s"] = std::to_string(run.votes.s);
  const std::string tag(run.votes.algo);
  std::ostringstream csv;
  csv << detail::manifest_line("evaluate", header) << "model,precision,recall,f1,n_users\n";
  Json models = Json::array();
  auto emit = [&](const std::string& name, const MetricRow& r) {
    csv << name << ',' << format_double(r.precision) << ',' << format_double(r.recall) << ','
        << format_double(r.f1) << ',' << r.n_users << "\n";
    models.push_back({{"model", name},
                      {"precision", r.precision},
                      {"recall", r.recall},
                      {"f1", r.f1},
                      {"n_users", r.n_users}});
    log << "evaluate: " << name << " P@" << cfg.N << "=" << format_double(r.precision)
        << " R@" << cfg.N << "=" << format_double(r.recall) << " F1=" << format_double(r.f1) << "\n";
  };
  if (out.single) emit(tag, *out.single);
  emit("ensemble-" + tag, out.ensemble);
  const OutputPaths paths{cfg.output};
  detail::write_text(paths.dir / "evaluate.csv", csv.str());
  detail::write_text(paths.dir / "evaluate.json",
                     Json{{"command", "evaluate"},
                          {"settings", detail::settings_json(header)},
                          {"models", models}}
                             .dump(2) +
                         "\n");
  if (!cfg.e_list.empty())
    out.certified = cmd_certify(cfg, explicit_keys, CertTarget::TestItems, true, false, "certify", log);
  return out;
}

// ---------------------------------------------------------------------------

/// Prints `user,rank,item,votes` for the requested users (all when empty),
/// using external ids when idmap.csv exists.
inline void cmd_recommend(const RunConfig& cfg, const Settings& explicit_keys,
                          const std::vector<std::int64_t>& users, std::ostream& out) {
  const Loaded run = load_run(cfg, explicit_keys);
  const auto& train = run.split.split.train;
  const IdMap* ids = run.ids ? &*run.ids : nullptr;
  std::vector<UserId> internal;
  if (users.empty()) {
    for (UserId u = 0; u < train.n_users(); ++u) internal.push_back(u);
  } else {
    for (auto ext : users) {
      if (ids) {
        internal.push_back(ids->user_index(ext));
      } else {
        if (ext < 0 || static_cast<std::size_t>(ext) >= train.n_users())
          throw Error("unknown user " + std::to_string(ext));
        internal.push_back(static_cast<UserId>(ext));
      }
    }
  }
  out << "user,rank,item,votes\n";
  for (UserId u : internal) {
    const auto list = ensemble_recommend(run.votes, train, u, std::min(cfg.N, train.n_items()));
    for (std::size_t k = 0; k < list.size(); ++k)
      out << detail::external_user(ids, u) << ',' << k + 1 << ','
          << detail::external_item(ids, list[k]) << ',' << run.votes.at(u, list[k]) << "\n";
  }
}

// ---------------------------------------------------------------------------

struct OracleOptions {
  std::string check = "all";  // equivalence | soundness | adversary | all
  std::size_t n = 6;
  std::size_t m = 5;
  std::size_t s = 3;
  std::size_t e = 1;
  std::size_t trials = 100;
  std::string attack = "random-ratings";
  double density = 0.5;
};

/// Tiny-instance checks; returns false when any check fails.
inline bool cmd_oracle(const RunConfig& cfg, const OracleOptions& opt, std::ostream& log) {
  Rng rng(cfg.seed);
  const std::vector<double> levels{1.0, 5.0};
  bool ok = true;
  const bool all = opt.check == "all";
  if (!all && opt.check != "equivalence" && opt.check != "soundness" && opt.check != "adversary")
    throw Error("unknown oracle check '" + opt.check + "'");
  const RatingMatrix matrix = random_tiny_matrix(opt.n, opt.m, levels, opt.density, rng);

  if (all || opt.check == "equivalence") {
    const auto probs = exact_item_probs(matrix, cfg.algo, opt.s, cfg.n_prime, cfg.seed, cfg.threads);
    const auto votes = build_vote_counts_exhaustive(matrix, cfg.algo, opt.s, cfg.n_prime, cfg.seed,
                                                    cfg.threads);
    const bool same = votes.T == probs.denominator && votes.counts == probs.numerators;
    log << "oracle equivalence: C(" << opt.n << "," << opt.s << ")=" << probs.denominator << " "
        << (same ? "match" : "MISMATCH") << "\n";
    ok = ok && same;
  }
  if (all || opt.check == "soundness" || opt.check == "adversary") {
    const auto probs = exact_item_probs(matrix, cfg.algo, opt.s, cfg.n_prime, cfg.seed, cfg.threads);
    std::vector<ItemList> targets(opt.n);
    for (UserId u = 0; u < opt.n; ++u) {
      targets[u] = exact_ensemble_topn(probs, matrix, u, std::min(cfg.N, opt.m));
      std::sort(targets[u].begin(), targets[u].end());
    }
    const auto r = certify_with_exact_probs(probs, targets, std::min(cfg.N, opt.m), cfg.n_prime, opt.e);
    auto report_line = [&](const char* what, const SoundnessReport& rep) {
      log << "oracle " << what << ": " << rep.trials << " trial(s), " << rep.checks << " checks, "
          << rep.certified_positive << " user(s) with r>0, " << rep.violations.size()
          << " violation(s)\n";
      for (const auto& v : rep.violations)
        log << "  trial " << v.trial << " user " << v.user << ": certified " << v.certified
            << ", observed " << v.observed << "\n";
      ok = ok && rep.sound();
    };
    if (all || opt.check == "soundness")
      report_line("soundness",
                  attack_soundness_check(matrix, cfg.algo, opt.s, cfg.n_prime, std::min(cfg.N, opt.m),
                                         opt.e, parse_attack(opt.attack), opt.trials, cfg.seed + 1,
                                         targets, r, cfg.seed, cfg.threads));
    if (all || opt.check == "adversary")
      report_line("adversary",
                  exhaustive_adversary_check(matrix, cfg.algo, opt.s, cfg.n_prime,
                                             std::min(cfg.N, opt.m), opt.e, levels, targets, r,
                                             cfg.seed, cfg.threads));
  }
  return ok;
}

}  // namespace pore
