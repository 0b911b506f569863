/*
 * Copyright 2026 The BanditMF Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Command-line front end. Every subcommand writes its outputs plus a
// manifest.conf under --out; `--config manifest.conf` replays a run.

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "banditmf/bandit.hpp"
#include "banditmf/clustering.hpp"
#include "banditmf/common.hpp"
#include "banditmf/config.hpp"
#include "banditmf/dataset.hpp"
#include "banditmf/linucb.hpp"
#include "banditmf/mf.hpp"
#include "banditmf/neighborhood.hpp"
#include "banditmf/pipeline.hpp"
#include "banditmf/report.hpp"
#include "banditmf/synthetic.hpp"

namespace banditmf {
namespace cli {

namespace fs = std::filesystem;

struct SourceOptions {
  std::string ratings;
  std::string dense;
  bool synthetic = false;
  double rating_max = 0.0;  // 0: observed maximum
  std::string user_column = "userId";
  std::string item_column = "movieId";
  std::string rating_column = "rating";
};

struct SgdOptions {
  std::size_t k = 2;
  double lr = 0.001;
  double reg = 0.1;
  std::size_t epochs = 1000;
  double init_scale = 0.1;

  SgdConfig config(std::uint64_t seed) const {
    SgdConfig c;
    c.k = k;
    c.learning_rate = lr;
    c.regularization = reg;
    c.iterations = epochs;
    c.init_scale = init_scale;
    c.seed = seed;
    c.validate();
    return c;
  }
};

struct Common {
  std::string out = "out";
  std::string config;
  std::uint64_t seed = 0;
};

inline void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--out", c.out, "Output directory");
  sub->add_option("--config", c.config, "Flat key = value file supplying option values");
  sub->add_option("--seed", c.seed, "Master seed");
}

inline void add_source(CLI::App* sub, SourceOptions& s, bool allow_synthetic = true) {
  sub->add_option("--ratings", s.ratings, "Ratings CSV (userId,movieId,rating[,timestamp])");
  sub->add_option("--dense", s.dense, "Dense whitespace grid, zero = missing");
  if (allow_synthetic) sub->add_flag("--synthetic", s.synthetic, "Use planted synthetic data");
  sub->add_option("--rating-max", s.rating_max, "Override r* (0 = observed maximum)");
  sub->add_option("--user-column", s.user_column, "User id column name");
  sub->add_option("--item-column", s.item_column, "Item id column name");
  sub->add_option("--rating-column", s.rating_column, "Rating column name");
}

inline void add_sgd(CLI::App* sub, SgdOptions& o) {
  sub->add_option("--k", o.k, "Latent dimension");
  sub->add_option("--lr", o.lr, "SGD learning rate");
  sub->add_option("--reg", o.reg, "L2 regularization");
  sub->add_option("--epochs", o.epochs, "SGD epochs");
  sub->add_option("--init-scale", o.init_scale, "Factor init range (-s, s)");
}

/// Loads --ratings or --dense. Returns nullopt when --synthetic is set.
inline std::optional<RatingMatrix> load_source(const SourceOptions& s) {
  const int given = !s.ratings.empty() + !s.dense.empty() + s.synthetic;
  if (given != 1) throw InputError("exactly one of --ratings, --dense, --synthetic is required");
  if (s.synthetic) return std::nullopt;
  std::optional<double> rmax;
  if (s.rating_max > 0.0) rmax = s.rating_max;
  if (!s.ratings.empty()) {
    RatingsSchema schema;
    schema.user_column = s.user_column;
    schema.item_column = s.item_column;
    schema.rating_column = s.rating_column;
    schema.rating_max = rmax;
    return load_ratings_csv(s.ratings, schema);
  }
  RatingMatrix m = load_dense_matrix(s.dense);
  if (!rmax) return m;
  return RatingMatrix(m.num_users(), m.num_items(), {m.entries().begin(), m.entries().end()}, rmax);
}

inline std::ofstream output(const Common& c, const std::string& name) {
  return text::open_output((fs::path(c.out) / name).string());
}

/// Resolved option values of a subcommand, excluding --out, --config, --help.
inline FlatConfig resolved_options(const CLI::App* sub) {
  FlatConfig cfg;
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "out" || name == "config") continue;
    std::string value;
    if (opt->get_type_size() == 0) {
      value = opt->count() > 0 ? opt->as<std::string>() : "false";
      if (value.empty() || value == "1") value = "true";
      if (value == "0") value = "false";
    } else {
      value = opt->count() > 0 ? opt->as<std::string>() : opt->get_default_str();
    }
    if (value.empty()) continue;
    cfg.set(name, value);
  }
  return cfg;
}

inline void write_manifest(const CLI::App* sub, const Common& c) {
  auto out = output(c, "manifest.conf");
  write_flat_config(resolved_options(sub), out,
                    {"banditmf run manifest", "subcommand: " + sub->get_name(),
                     "replay: banditmf " + sub->get_name() + " --config <this file> --out <dir>"});
}

inline std::string item_name(const RatingMatrix& m, std::size_t item) { return m.item_label(item); }

inline std::string title_or_empty(const ItemCatalog* catalog, const std::string& id) {
  if (!catalog) return {};
  return catalog->title_of(id).value_or("");
}

// ---------------------------------------------------------------------------
// Subcommands

inline std::string run_ingest(const Common& c, const SourceOptions& src) {
  if (src.synthetic) throw InputError("ingest reads --ratings or --dense");
  RatingMatrix m = *load_source(src);
  {
    auto out = output(c, "ratings.csv");
    out << "user,item,rating\n";
    for (const Rating& r : m.entries()) out << r.user << ',' << r.item << ',' << text::format_double(r.value) << '\n';
  }
  {
    auto out = output(c, "users.csv");
    write_id_map(m, true, out);
  }
  {
    auto out = output(c, "items.csv");
    write_id_map(m, false, out);
  }
  return detail::concat("users=", m.num_users(), " items=", m.num_items(), " ratings=", m.size(),
                        " rating_max=", m.rating_max());
}

struct TrainOptions {
  std::string variant = "bias";
  double holdout = 0.0;
};

inline std::string run_train_mf(const Common& c, const SourceOptions& src, const SgdOptions& so,
                                const TrainOptions& to) {
  auto loaded = load_source(src);
  RatingMatrix data = loaded ? *loaded : planted_mf_matrix({}, derive_seed(c.seed, "train-data"));
  const MfVariant variant = parse_variant(to.variant);
  RatingMatrix train = data;
  std::optional<RatingMatrix> test;
  if (to.holdout > 0.0) {
    HoldoutSplit split = split_holdout(data, to.holdout, derive_seed(c.seed, "train-split"));
    train = std::move(split.train);
    test = std::move(split.test);
  }
  std::vector<double> history;
  LatentModel model = train_model(variant, train, so.config(derive_seed(c.seed, "train-sgd")), &history);
  {
    auto out = output(c, "model.txt");
    save_model(model, out);
  }
  {
    auto out = output(c, "loss.csv");
    CsvWriter w(out, {"epoch", "loss"});
    for (std::size_t e = 0; e < history.size(); ++e) w.row(e + 1, history[e]);
  }
  const double train_mse = mse(model, train);
  {
    auto out = output(c, "metrics.csv");
    CsvWriter w(out, {"variant", "train_mse", "test_mse"});
    w.row(std::string(to_string(variant)), train_mse, test ? mse(model, *test) : std::nan(""));
  }
  std::string line = detail::concat(to_string(variant), " model k=", model.rank(), " train_mse=", train_mse);
  if (test) line += detail::concat(" test_mse=", mse(model, *test));
  return line;
}

struct EvalOptions {
  std::string variant = "both";
  double holdout = 0.2;
  std::size_t seeds = 10;
};

inline std::string run_eval_mf(const Common& c, const SourceOptions& src, const SgdOptions& so,
                               const EvalOptions& eo) {
  auto loaded = load_source(src);
  std::vector<MfVariant> variants;
  if (eo.variant == "both") variants = {MfVariant::Base, MfVariant::Bias};
  else variants = {parse_variant(eo.variant)};
  if (eo.seeds < 1) throw InputError("--seeds must be >= 1");

  std::vector<double> total(variants.size(), 0.0);
  auto out = output(c, "mse.csv");
  CsvWriter w(out, {"seed", "variant", "mse"});
  for (std::size_t s = 0; s < eo.seeds; ++s) {
    RatingMatrix data = loaded ? *loaded : planted_mf_matrix({}, derive_seed(c.seed, "eval-data", s));
    for (std::size_t v = 0; v < variants.size(); ++v) {
      const double e = holdout_mse(data, variants[v], so.config(derive_seed(c.seed, "eval-sgd", s)), eo.holdout,
                                   derive_seed(c.seed, "eval-split", s));
      total[v] += e;
      w.row(s, std::string(to_string(variants[v])), e);
    }
  }
  auto sum = output(c, "summary.csv");
  CsvWriter ws(sum, {"variant", "seeds", "mean_mse"});
  std::string line;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    const double mean = total[v] / static_cast<double>(eo.seeds);
    ws.row(std::string(to_string(variants[v])), eo.seeds, mean);
    line += detail::concat(v ? " " : "", to_string(variants[v]), "_mse=", mean);
  }
  if (variants.size() == 2)
    line += detail::concat(" improvement=", 100.0 * (total[0] - total[1]) / total[0], "%");
  return line;
}

struct RecommendOptions {
  std::string movies;
  std::string target;
  std::size_t top_n = 10;
  std::size_t top_groups = 100;
};

inline std::string run_recommend(const Common& c, const SourceOptions& src, const RecommendOptions& ro) {
  if (src.ratings.empty()) throw InputError("recommend requires --ratings");
  if (ro.target.empty()) throw InputError("recommend requires --target");
  RatingMatrix m = *load_source(src);
  std::optional<ItemCatalog> catalog;
  if (!ro.movies.empty()) {
    catalog = load_catalog_csv(ro.movies);
    catalog->check_covers(m);
  }
  auto in = text::open_input(ro.target);
  ResolvedTarget target = resolve_target(parse_target_csv(in), m, catalog ? &*catalog : nullptr);
  auto recs = recommend_user_based(m, target, ro.top_n, ro.top_groups);
  auto out = output(c, "recommendations.csv");
  CsvWriter w(out, {"rank", "item_external_id", "title", "score"});
  for (const auto& r : recs)
    w.row(r.rank, item_name(m, r.item), title_or_empty(catalog ? &*catalog : nullptr, item_name(m, r.item)),
          r.score);
  return detail::concat(recs.size(), " recommendations for a target with ", target.size(), " ratings");
}

struct HybridOptions {
  std::string movies;
  std::string user;
  std::size_t top_n = 10;
};

inline std::string run_hybrid(const Common& c, const SourceOptions& src, const SgdOptions& so,
                              const HybridOptions& ho) {
  auto loaded = load_source(src);
  RatingMatrix m = loaded ? *loaded : planted_mf_matrix({}, derive_seed(c.seed, "hybrid-data"));
  if (ho.user.empty()) throw InputError("hybrid requires --user");
  auto u = m.user_index(ho.user);
  if (!u) throw InputError("unknown user '" + ho.user + "'");
  std::optional<ItemCatalog> catalog;
  if (!ho.movies.empty()) catalog = load_catalog_csv(ho.movies);
  LatentModel model = train_bias(m, so.config(derive_seed(c.seed, "hybrid-sgd")));
  HybridResult res = recommend_hybrid(model, m, *u, ho.top_n);
  const ItemCatalog* cat = catalog ? &*catalog : nullptr;
  auto out = output(c, "hybrid.csv");
  CsvWriter w(out, {"rank", "item_external_id", "title", "score"});
  w.row(std::size_t{0}, item_name(m, res.seed_item), title_or_empty(cat, item_name(m, res.seed_item)),
        predict(model, *u, res.seed_item));
  for (const auto& r : res.recommendations)
    w.row(r.rank, item_name(m, r.item), title_or_empty(cat, item_name(m, r.item)), r.score);
  return detail::concat("seed item ", item_name(m, res.seed_item), ", ", res.recommendations.size(),
                        " similar items");
}

struct ClusterOptions {
  std::size_t clusters = 3;
  std::size_t n_init = 20;
  std::size_t max_iter = 300;
};

inline std::string run_cluster(const Common& c, const SourceOptions& src, const SgdOptions& so,
                               const ClusterOptions& co) {
  auto loaded = load_source(src);
  RatingMatrix m = loaded ? *loaded
                          : planted_population({}, 0, derive_seed(c.seed, "cluster-data")).train;
  OfflineConfig oc;
  oc.sgd = so.config(0);
  oc.clusters = co.clusters;
  oc.n_init = co.n_init;
  oc.max_iter = co.max_iter;
  oc.seed = c.seed;
  OfflineModel off = offline_fit(m, oc);
  const ClusterModel& cm = off.clusters;
  {
    auto out = output(c, "inertia.csv");
    CsvWriter w(out, {"restart", "iteration", "inertia"});
    for (std::size_t r = 0; r < cm.restart_history.size(); ++r)
      for (std::size_t it = 0; it < cm.restart_history[r].size(); ++it) w.row(r, it + 1, cm.restart_history[r][it]);
  }
  {
    auto out = output(c, "assignments.csv");
    CsvWriter w(out, {"user", "cluster"});
    for (std::size_t u = 0; u < cm.assignment.size(); ++u) w.row(m.user_label(u), cm.assignment[u]);
  }
  {
    auto out = output(c, "unified.csv");
    CsvWriter w(out, {"cluster", "item", "score"});
    for (Eigen::Index k = 0; k < off.unified.rows(); ++k)
      for (Eigen::Index i = 0; i < off.unified.cols(); ++i)
        w.row(static_cast<std::size_t>(k), item_name(m, static_cast<std::size_t>(i)), off.unified(k, i));
  }
  std::string sizes;
  for (std::size_t k = 0; k < cm.k; ++k) sizes += detail::concat(k ? "/" : "", cm.members(k).size());
  return detail::concat(cm.k, " clusters (sizes ", sizes, "), best restart ", cm.best_restart, ", inertia ",
                        cm.inertia);
}

struct ReplayOptions {
  std::string log;
  bool synthetic = false;
  std::string alpha = "adaptive:0.001,0.1";
  std::string policy = "linucb";
  std::size_t arms = 10;
  std::size_t action_base = 0;
};

inline std::string run_replay(const Common& c, const ReplayOptions& ro) {
  if (ro.log.empty() == !ro.synthetic) throw InputError("exactly one of --log, --synthetic is required");
  ReplayLog log;
  if (ro.synthetic) {
    PlantedReplayConfig pc;
    pc.arms = ro.arms;
    log = planted_replay_log(pc, derive_seed(c.seed, "replay-data"));
  } else {
    log = load_replay_log(ro.log);
  }
  if (log.empty()) throw InputError("replay log is empty");
  ReplayResult res;
  if (ro.policy == "linucb") {
    LinUcbReplayPolicy p(ro.arms, log.dim(), AlphaSchedule::parse(ro.alpha));
    res = replay_ctr(log, p, ro.arms, ro.action_base);
  } else if (ro.policy == "random") {
    UniformRandomPolicy p(ro.arms, derive_seed(c.seed, "replay-random"));
    res = replay_ctr(log, p, ro.arms, ro.action_base);
  } else {
    throw InputError("unknown replay policy '" + ro.policy + "' (expected linucb or random)");
  }
  {
    auto out = output(c, "ctr.csv");
    CsvWriter w(out, {"round", "matches", "correct", "ctr"});
    for (const auto& p : res.series) w.row(p.round, p.matches, p.correct, p.ctr);
  }
  {
    auto out = output(c, "arms.csv");
    CsvWriter w(out, {"arm", "predictions", "matches", "correct", "mean_ucb"});
    for (std::size_t a = 0; a < res.arms.size(); ++a) {
      const auto& st = res.arms[a];
      w.row(a, st.predictions, st.matches, st.correct, st.score_sum / static_cast<double>(log.size()));
    }
  }
  const auto ctr = res.ctr();
  return detail::concat(ro.policy, " rows=", log.size(), " matches=", res.matches, " correct=", res.correct,
                        " ctr=", ctr ? text::format_double(*ctr) : std::string("undefined"));
}

struct SimulateOptions {
  std::string policy = "ts,ucb,egreedy";
  std::size_t clusters = 3;
  std::size_t n_init = 20;
  std::size_t tau = 5;
  std::size_t rounds = 0;  // 0: same as tau
  std::size_t users = 50;
  std::size_t seeds = 1;
  std::string missing = "skip";
  double epsilon = 0.1;
  double ucb_c = 1.0;
};

inline std::vector<PolicyKind> parse_policy_list(const std::string& s) {
  std::vector<PolicyKind> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(parse_policy(std::string(text::trim(tok))));
  if (out.empty()) throw InputError("--policy is empty");
  return out;
}

/// Hold out `users` whole rows as cold environments, keep the rest for
/// training (user indices re-densified, item space unchanged).
inline std::pair<RatingMatrix, std::vector<ColdUserEnvironment>> hold_out_users(const RatingMatrix& m,
                                                                                std::size_t users,
                                                                                std::uint64_t seed) {
  if (users >= m.num_users()) throw InputError("--users must be smaller than the number of users");
  std::vector<std::size_t> order(m.num_users());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<char> cold(m.num_users(), 0);
  std::vector<ColdUserEnvironment> envs;
  for (std::size_t k = 0; k < users; ++k) {
    cold[order[k]] = 1;
    envs.push_back(ColdUserEnvironment::from_user(m, order[k]));
  }
  std::vector<std::size_t> remap(m.num_users(), 0);
  std::vector<std::string> labels;
  std::size_t next = 0;
  for (std::size_t u = 0; u < m.num_users(); ++u)
    if (!cold[u]) {
      remap[u] = next++;
      labels.push_back(m.user_label(u));
    }
  std::vector<Rating> entries;
  for (const Rating& r : m.entries())
    if (!cold[r.user]) entries.push_back({remap[r.user], r.item, r.value});
  return {RatingMatrix(next, m.num_items(), std::move(entries), m.rating_max(), std::move(labels), m.item_labels()),
          std::move(envs)};
}

inline std::string run_simulate(const Common& c, const SourceOptions& src, const SgdOptions& so,
                                const SimulateOptions& opt) {
  auto loaded = load_source(src);
  const auto policies = parse_policy_list(opt.policy);
  if (opt.seeds < 1) throw InputError("--seeds must be >= 1");
  if (opt.users < 1) throw InputError("--users must be >= 1");
  if (opt.missing != "skip" && opt.missing != "impute") throw InputError("--missing must be skip or impute");

  PlantedTrialConfig tc;
  tc.users = opt.users;
  tc.offline.sgd = so.config(0);
  tc.offline.clusters = opt.clusters;
  tc.offline.n_init = opt.n_init;
  tc.session.tau = opt.tau;
  tc.session.max_rounds = opt.rounds ? opt.rounds : opt.tau;
  tc.session.missing = opt.missing == "skip" ? MissingRatings::Skip : MissingRatings::Impute;
  tc.session.policy.epsilon = opt.epsilon;
  tc.session.policy.ucb_c = opt.ucb_c;

  std::vector<double> regret(policies.size(), 0.0), gain(policies.size(), 0.0);
  auto rounds = output(c, "rounds.csv");
  CsvWriter wr(rounds, {"seed", "policy", "user", "round", "cluster", "item", "reward", "cum_regret"});
  for (std::size_t s = 0; s < opt.seeds; ++s) {
    const std::uint64_t seed = derive_seed(c.seed, "simulate", s);
    std::vector<SimulationOutcome> outcomes;
    std::function<std::string(std::size_t)> item_label;
    std::optional<RatingMatrix> train;
    if (loaded) {
      auto [t, envs] = hold_out_users(*loaded, opt.users, derive_seed(seed, "holdout"));
      train = std::move(t);
      OfflineConfig oc = tc.offline;
      oc.seed = derive_seed(seed, "trial-offline");
      OfflineModel off = offline_fit(*train, oc);
      for (PolicyKind kind : policies) {
        SessionConfig sc = tc.session;
        sc.policy.kind = kind;
        outcomes.push_back(simulate_policy(off, envs, sc, derive_seed(seed, "trial-online")));
      }
    } else {
      outcomes = planted_trial(tc, policies, seed).outcomes;
    }
    for (std::size_t p = 0; p < policies.size(); ++p) {
      regret[p] += outcomes[p].summary.cumulative_regret;
      gain[p] += outcomes[p].summary.ndcg;
      for (const OnlineSession& ses : outcomes[p].sessions) {
        auto cum = ses.trace.cumulative_regret();
        for (std::size_t t = 0; t < ses.trace.size(); ++t) {
          const RoundRecord& r = ses.trace[t];
          wr.row(s, std::string(to_string(policies[p])), ses.user, r.round, r.arm,
                 train ? train->item_label(r.item) : std::to_string(r.item), r.reward, cum[t]);
        }
      }
    }
  }
  auto sum = output(c, "summary.csv");
  CsvWriter ws(sum, {"policy", "T", "N", "cumulative_regret", "ndcg"});
  std::string line;
  for (std::size_t p = 0; p < policies.size(); ++p) {
    const double n = static_cast<double>(opt.seeds);
    ws.row(std::string(to_string(policies[p])), opt.tau, opt.users, regret[p] / n, gain[p] / n);
    line += detail::concat(p ? " " : "", to_string(policies[p]), ": regret=", regret[p] / n, " ndcg=", gain[p] / n);
  }
  return line;
}

inline std::string run_report(const Common& c, const std::string& summary, std::ostream& out) {
  if (summary.empty()) throw InputError("report requires --summary");
  auto in = text::open_input(summary);
  const std::string table = render_table(parse_csv_table(in));
  auto file = output(c, "report.txt");
  file << table;
  out << table;
  return "wrote report.txt";
}

// ---------------------------------------------------------------------------
// Entry point

/// Expands `--config FILE` into `--key=value` tokens placed before the
/// remaining arguments, so command-line values win (options keep the last
/// value given).
inline std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::vector<std::string> rest;
  std::optional<std::string> path;
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--config" && k + 1 < args.size()) {
      path = args[++k];
      rest.push_back("--config");
      rest.push_back(*path);
    } else if (args[k].rfind("--config=", 0) == 0) {
      path = args[k].substr(9);
      rest.push_back(args[k]);
    } else {
      rest.push_back(args[k]);
    }
  }
  if (!path) return args;
  // args[0] is the program, args[1] the subcommand
  if (rest.size() < 2) return args;
  FlatConfig cfg = load_flat_config(*path);
  out.push_back(rest[0]);
  out.push_back(rest[1]);
  for (const auto& [k, v] : cfg.entries()) out.push_back("--" + k + "=" + v);
  out.insert(out.end(), rest.begin() + 2, rest.end());
  return out;
}

inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Matrix factorization, clustering and bandit-based cold-start recommendation", "banditmf"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
  app.require_subcommand(1);

  Common common;
  SourceOptions src;
  SgdOptions sgd_train, sgd_eval, sgd_hybrid, sgd_cluster, sgd_sim;
  sgd_sim.lr = 0.01;
  sgd_sim.epochs = 200;
  TrainOptions train;
  EvalOptions eval;
  RecommendOptions rec;
  HybridOptions hyb;
  ClusterOptions clu;
  ReplayOptions rep;
  SimulateOptions sim;
  std::string summary;

  auto* ingest = app.add_subcommand("ingest", "Parse ratings into dense indices");
  add_common(ingest, common);
  add_source(ingest, src, false);

  auto* train_mf = app.add_subcommand("train-mf", "Train an SGD matrix factorization model");
  add_common(train_mf, common);
  add_source(train_mf, src);
  add_sgd(train_mf, sgd_train);
  train_mf->add_option("--variant", train.variant, "base or bias");
  train_mf->add_option("--holdout", train.holdout, "Held-out fraction (0: none)");

  auto* eval_mf = app.add_subcommand("eval-mf", "Holdout MSE of base and bias MF over seeds");
  add_common(eval_mf, common);
  add_source(eval_mf, src);
  add_sgd(eval_mf, sgd_eval);
  eval_mf->add_option("--variant", eval.variant, "base, bias or both");
  eval_mf->add_option("--holdout", eval.holdout, "Held-out fraction");
  eval_mf->add_option("--seeds", eval.seeds, "Number of seeds");

  auto* recommend = app.add_subcommand("recommend", "User-based collaborative filtering for a target user");
  add_common(recommend, common);
  add_source(recommend, src, false);
  recommend->add_option("--movies", rec.movies, "Item catalog CSV (movieId,title)");
  recommend->add_option("--target", rec.target, "Target ratings CSV (title or id, rating)");
  recommend->add_option("--top-n", rec.top_n, "Recommendations to emit");
  recommend->add_option("--top-groups", rec.top_groups, "Candidate neighbours kept by overlap");

  auto* hybrid = app.add_subcommand("hybrid", "MF seed item plus latent cosine neighbours");
  add_common(hybrid, common);
  add_source(hybrid, src);
  add_sgd(hybrid, sgd_hybrid);
  hybrid->add_option("--movies", hyb.movies, "Item catalog CSV (movieId,title)");
  hybrid->add_option("--user", hyb.user, "External id of the target user");
  hybrid->add_option("--top-n", hyb.top_n, "Recommendations to emit");

  auto* cluster = app.add_subcommand("cluster", "K-means over predicted rating rows");
  add_common(cluster, common);
  add_source(cluster, src);
  add_sgd(cluster, sgd_cluster);
  cluster->add_option("--clusters", clu.clusters, "Number of clusters");
  cluster->add_option("--n-init", clu.n_init, "K-means restarts");
  cluster->add_option("--max-iter", clu.max_iter, "Lloyd iterations per restart");

  auto* replay = app.add_subcommand("replay-linucb", "Replay CTR of LinUCB on a logged bandit dataset");
  add_common(replay, common);
  replay->add_option("--log", rep.log, "Replay log: action reward x_1 .. x_d per line");
  replay->add_flag("--synthetic", rep.synthetic, "Use a planted disjoint-linear log");
  replay->add_option("--alpha", rep.alpha, "const:C, inv-sqrt-t or adaptive:C,S");
  replay->add_option("--policy", rep.policy, "linucb or random");
  replay->add_option("--arms", rep.arms, "Number of arms");
  replay->add_option("--action-base", rep.action_base, "Index of the first arm in the log");

  auto* simulate = app.add_subcommand("simulate-banditmf", "Cold-start simulation of the bandit pipeline");
  add_common(simulate, common);
  add_source(simulate, src);
  add_sgd(simulate, sgd_sim);
  simulate->add_option("--policy", sim.policy, "Comma list of ts, ucb, egreedy");
  simulate->add_option("--clusters", sim.clusters, "Number of clusters (arms)");
  simulate->add_option("--n-init", sim.n_init, "K-means restarts");
  simulate->add_option("--tau", sim.tau, "Ratings collected per new user");
  simulate->add_option("--rounds", sim.rounds, "Maximum recommendations per user (0: tau)");
  simulate->add_option("--users", sim.users, "New users per seed");
  simulate->add_option("--seeds", sim.seeds, "Number of seeds");
  simulate->add_option("--missing", sim.missing, "skip or impute unrated items");
  simulate->add_option("--epsilon", sim.epsilon, "Epsilon-greedy exploration rate");
  simulate->add_option("--ucb-c", sim.ucb_c, "UCB exploration constant");

  auto* report = app.add_subcommand("report", "Render a summary CSV as a fixed-width table");
  add_common(report, common);
  report->add_option("--summary", summary, "Summary CSV");

  try {
    args = expand_config(args);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    fs::create_directories(common.out);
    write_manifest(sub, common);
    std::string line;
    const std::string name = sub->get_name();
    if (name == "ingest") line = run_ingest(common, src);
    else if (name == "train-mf") line = run_train_mf(common, src, sgd_train, train);
    else if (name == "eval-mf") line = run_eval_mf(common, src, sgd_eval, eval);
    else if (name == "recommend") line = run_recommend(common, src, rec);
    else if (name == "hybrid") line = run_hybrid(common, src, sgd_hybrid, hyb);
    else if (name == "cluster") line = run_cluster(common, src, sgd_cluster, clu);
    else if (name == "replay-linucb") line = run_replay(common, rep);
    else if (name == "simulate-banditmf") line = run_simulate(common, src, sgd_sim, sim);
    else if (name == "report") line = run_report(common, summary, out);
    out << name << ": " << line << '\n';
    return 0;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n' << sub->help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace cli
}  // namespace banditmf
