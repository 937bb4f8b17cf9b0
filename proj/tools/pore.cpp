// pore: train, certify and evaluate provably robust ensemble recommenders.

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pore/commands.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::map<std::string, std::string> values;  // setting key -> flag text
  std::vector<std::pair<CLI::Option*, std::string>> options;
  bool exact = false;
  CLI::Option* exact_flag = nullptr;
};

void add_settings_flags(CLI::App& cmd, Overrides& o) {
  cmd.add_option("-c,--config", o.config_path, "key=value config file");
  struct Flag {
    const char* name;
    const char* key;
    const char* help;
  };
  static const Flag flags[] = {
      {"--dataset", "dataset", "ratings file"},
      {"--format", "format", "tab | dat | csv"},
      {"--domain", "domain", "rating domain, lo:hi or v1,v2,..."},
      {"--split", "split.fraction", "training fraction per user"},
      {"--split-seed", "split.seed", "seed of the train/test split"},
      {"--algo", "algo", "ir | bpr"},
      {"--k", "ir.k", "item-kNN neighbours"},
      {"--bpr-d", "bpr.d", "BPR latent dimension"},
      {"--bpr-epochs", "bpr.epochs", "BPR epochs"},
      {"--bpr-lr", "bpr.learn_rate", "BPR learning rate"},
      {"--bpr-reg", "bpr.reg", "BPR L2 coefficient"},
      {"--bpr-neg", "bpr.neg_samples", "BPR negatives per positive"},
      {"--s", "s", "users per submatrix"},
      {"--T", "T", "ensemble size"},
      {"--nprime", "nprime", "items each base model recommends"},
      {"--N", "N", "items the ensemble recommends"},
      {"--alpha", "alpha", "overall failure probability"},
      {"--e", "e", "attack sizes, e.g. 0..30 or 0,5,10"},
      {"--mode", "mode", "approx | exact"},
      {"--upper-convention", "bounds.upper_convention", "paper | textbook"},
      {"--seed", "seed", "ensemble master seed"},
      {"-o,--out", "output", "output directory"},
      {"--threads", "threads", "worker threads (default: PORE_THREADS or all cores)"},
      {"--chunk", "train.chunk", "checkpoint every this many members"},
  };
  for (const auto& f : flags) {
    auto& slot = o.values[f.key];
    o.options.push_back({cmd.add_option(f.name, slot, f.help), f.key});
  }
  o.exact_flag = cmd.add_flag("--exact", o.exact, "exact rational certification");
}

/// Config file first, flags on top. Returns the merged explicit settings.
pore::Settings resolve(const Overrides& o, pore::RunConfig& cfg) {
  pore::Settings merged;
  if (!o.config_path.empty()) merged = pore::load_settings(o.config_path);
  for (const auto& [opt, key] : o.options)
    if (opt->count() > 0) merged[key] = o.values.at(key);
  if (o.exact_flag->count() > 0) merged["mode"] = "exact";
  pore::apply_settings(cfg, merged);
  return merged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Provably robust ensemble recommenders: training, certification, evaluation"};
  app.require_subcommand(1);

  Overrides o;
  auto* ingest = app.add_subcommand("ingest", "load a ratings file and write the train/test split");
  add_settings_flags(*ingest, o);

  pore::TrainOptions train_opt;
  auto* train = app.add_subcommand("train", "train the ensemble and write vote counts");
  add_settings_flags(*train, o);
  train->add_option("--max-members", train_opt.max_members,
                    "stop after this many members, keeping a checkpoint");

  std::vector<std::int64_t> rec_users;
  auto* recommend = app.add_subcommand("recommend", "print the ensemble top-N");
  add_settings_flags(*recommend, o);
  recommend->add_option("--user", rec_users, "external user id(s); default all");

  std::string target = "test-items";
  std::string baseline;
  auto* certify = app.add_subcommand("certify", "certified intersection sizes and metrics");
  add_settings_flags(*certify, o);
  certify->add_option("--target", target, "test-items | clean-topn");
  certify->add_option("--baseline", baseline, "also run a baseline (bagging)");

  bool single = false;
  auto* evaluate = app.add_subcommand("evaluate", "standard metrics of the ensemble at e = 0");
  add_settings_flags(*evaluate, o);
  evaluate->add_flag("--single", single, "also score one base model trained on all users");

  auto* base = app.add_subcommand("baseline", "bagging-baseline certification only");
  add_settings_flags(*base, o);
  base->add_option("--target", target, "test-items | clean-topn");

  pore::OracleOptions oracle_opt;
  auto* oracle = app.add_subcommand("oracle", "exhaustive checks on a random tiny instance");
  add_settings_flags(*oracle, o);
  oracle->add_option("--check", oracle_opt.check, "equivalence | soundness | adversary | all");
  oracle->add_option("--n", oracle_opt.n, "genuine users");
  oracle->add_option("--m", oracle_opt.m, "items");
  oracle->add_option("--subset", oracle_opt.s, "users per submatrix");
  oracle->add_option("--fake", oracle_opt.e, "fake users");
  oracle->add_option("--trials", oracle_opt.trials, "random attacks");
  oracle->add_option("--attack", oracle_opt.attack,
                     "random-ratings | copy-popular | all-max-on-random-items");

  CLI11_PARSE(app, argc, argv);

  try {
    pore::RunConfig cfg;
    const auto explicit_keys = resolve(o, cfg);
    if (ingest->parsed()) {
      pore::fs::create_directories(cfg.output);
      pore::cmd_ingest(cfg, std::cerr);
    } else if (train->parsed()) {
      pore::cmd_train(cfg, std::cerr, train_opt);
    } else if (recommend->parsed()) {
      pore::cmd_recommend(cfg, explicit_keys, rec_users, std::cout);
    } else if (certify->parsed()) {
      if (!baseline.empty() && baseline != "bagging")
        throw pore::Error("unknown baseline '" + baseline + "'");
      pore::cmd_certify(cfg, explicit_keys, pore::parse_cert_target(target), true,
                        baseline == "bagging", "certify", std::cerr);
    } else if (evaluate->parsed()) {
      pore::cmd_evaluate(cfg, explicit_keys, single, std::cerr);
    } else if (base->parsed()) {
      pore::cmd_certify(cfg, explicit_keys, pore::parse_cert_target(target), false, true,
                        "baseline", std::cerr);
    } else if (oracle->parsed()) {
      return pore::cmd_oracle(cfg, oracle_opt, std::cerr) ? 0 : 1;
    }
  } catch (const std::exception& ex) {
    std::cerr << "pore: " << ex.what() << "\n";
    return 2;
  }
  return 0;
}
