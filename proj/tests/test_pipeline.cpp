#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "banditmf/pipeline.hpp"
#include "banditmf/synthetic.hpp"

using namespace banditmf;

namespace {

// Offline model with a hand-written unified matrix; the session only reads
// `unified`.
OfflineModel toy_offline(const Eigen::MatrixXd& unified) {
  OfflineModel m;
  m.unified = unified;
  return m;
}

ColdUserEnvironment env_of(std::vector<std::optional<double>> r, double rmax = 5.0) {
  return ColdUserEnvironment(std::move(r), rmax, "u");
}

SessionConfig session(PolicyKind kind, std::size_t tau, std::size_t max_rounds = 0) {
  SessionConfig cfg;
  cfg.policy.kind = kind;
  cfg.tau = tau;
  cfg.max_rounds = max_rounds ? max_rounds : tau;
  return cfg;
}

Eigen::MatrixXd random_unified(std::size_t k, std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.5, 5.0);
  return Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n),
                                      [&] { return d(rng); });
}

ColdUserEnvironment random_env(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.0, 5.0);
  std::vector<std::optional<double>> r(n);
  for (auto& v : r) v = std::round(2 * d(rng)) / 2;
  return env_of(std::move(r));
}

}  // namespace

TEST(OfflineFit, SmallMatrixShapes) {
  // four users, five items
  RatingMatrix m(4, 5,
                 {{0, 0, 5}, {0, 1, 3}, {0, 3, 1},
                  {1, 0, 4}, {1, 3, 1}, {1, 4, 2},
                  {2, 0, 1}, {2, 1, 1}, {2, 4, 5},
                  {3, 1, 1}, {3, 2, 5}, {3, 4, 4}});
  OfflineConfig cfg;
  cfg.clusters = 2;
  cfg.seed = 3;
  auto off = offline_fit(m, cfg);
  EXPECT_EQ(off.num_clusters(), 2u);
  EXPECT_EQ(off.num_items(), 5u);
  EXPECT_EQ(off.clusters.assignment.size(), 4u);
  EXPECT_EQ(off.unified, off.clusters.centroids);
  const Eigen::MatrixXd full = predict_full(off.latent);
  EXPECT_EQ(off.unified, cluster_means(full, off.clusters.assignment, 2));
}

TEST(OfflineFit, OneClusterPerUserGivesPermutedPredictions) {
  PlantedMfConfig pc;
  pc.users = 8;
  pc.items = 12;
  auto m = planted_mf_matrix(pc, 5);
  OfflineConfig cfg;
  cfg.clusters = 8;
  cfg.sgd.iterations = 50;
  auto off = offline_fit(m, cfg);
  const Eigen::MatrixXd full = predict_full(off.latent);
  std::vector<char> used(8, 0);
  for (Eigen::Index u = 0; u < 8; ++u) {
    bool found = false;
    for (Eigen::Index c = 0; c < 8 && !found; ++c)
      if (!used[c] && off.unified.row(c) == full.row(u)) {
        used[c] = 1;
        found = true;
      }
    EXPECT_TRUE(found) << "row " << u;
  }
}

TEST(OfflineFit, DeterministicForAFixedSeed) {
  PlantedMfConfig pc;
  auto m = planted_mf_matrix(pc, 9);
  OfflineConfig cfg;
  cfg.sgd.iterations = 30;
  cfg.seed = 17;
  auto a = offline_fit(m, cfg), b = offline_fit(m, cfg);
  EXPECT_EQ(a.unified, b.unified);
  EXPECT_EQ(a.clusters.assignment, b.clusters.assignment);
}

TEST(ClusterRankings, DescendingWithLowerIndexTies) {
  Eigen::MatrixXd u(1, 5);
  u << 2.0, 4.0, 2.0, 5.0, 4.0;
  auto r = cluster_rankings(u);
  EXPECT_EQ(r[0], (std::vector<std::size_t>{3, 1, 4, 0, 2}));
}

TEST(ColdUserEnvironment, ValidatesAndRates) {
  EXPECT_THROW(env_of({5.5}), InputError);
  EXPECT_THROW(env_of({-1.0}), InputError);
  EXPECT_THROW(env_of({1.0}, 0.0), InputError);
  auto env = env_of({4.0, std::nullopt, 2.5});
  EXPECT_EQ(env.rate(0), 4.0);
  EXPECT_FALSE(env.rate(1));
  EXPECT_FALSE(env.rate(7));
  EXPECT_EQ(env.sorted_rewards(), (std::vector<double>{0.8, 0.5}));

  RatingMatrix m(2, 3, {{1, 2, 3.0}, {1, 0, 1.0}, {0, 1, 5.0}});
  auto e = ColdUserEnvironment::from_user(m, 1);
  EXPECT_EQ(e.rate(0), 1.0);
  EXPECT_FALSE(e.rate(1));
  EXPECT_EQ(e.rate(2), 3.0);
}

TEST(OnlineSession, HandTracedUcbSession) {
  Eigen::MatrixXd u(2, 4);
  u << 5, 4, 1, 0,
       0, 1, 4, 5;
  auto off = toy_offline(u);
  auto env = env_of({5, 4, 2, 1});
  auto s = run_online_session(off, env, session(PolicyKind::Ucb1, 2), 1);
  // arm 0 follows items 0,1 -> (1 + 0.8)/2; arm 1 follows 3,2 -> (0.2 + 0.4)/2
  ASSERT_EQ(s.arm_expected.size(), 2u);
  EXPECT_DOUBLE_EQ(s.arm_expected[0], 0.9);
  EXPECT_DOUBLE_EQ(s.arm_expected[1], 0.3);
  EXPECT_DOUBLE_EQ(s.mu_star, 0.9);
  ASSERT_EQ(s.trace.size(), 2u);
  EXPECT_EQ(s.trace[0].arm, 0u);
  EXPECT_EQ(s.trace[0].item, 0u);
  EXPECT_EQ(s.trace[0].reward, 1.0);
  EXPECT_EQ(s.trace[0].regret, 0.0);
  EXPECT_EQ(s.trace[1].arm, 1u);
  EXPECT_EQ(s.trace[1].item, 3u);
  EXPECT_DOUBLE_EQ(s.trace[1].reward, 0.2);
  EXPECT_DOUBLE_EQ(s.trace.total_regret(), 0.6);
  EXPECT_TRUE(s.completed);
  EXPECT_EQ(s.collected, (std::vector<std::pair<std::size_t, double>>{{0, 5.0}, {3, 1.0}}));
}

TEST(OnlineSession, SingleClusterWalksDownTheRanking) {
  std::mt19937_64 rng(31);
  auto u = random_unified(1, 30, rng);
  auto off = toy_offline(u);
  auto env = random_env(30, rng);
  for (auto kind : {PolicyKind::EpsilonGreedy, PolicyKind::Ucb1, PolicyKind::Thompson}) {
    auto s = run_online_session(off, env, session(kind, 10), 2);
    ASSERT_EQ(s.recommended.size(), 10u);
    for (std::size_t t = 1; t < 10; ++t) EXPECT_GT(u(0, s.recommended[t - 1]), u(0, s.recommended[t]));
    EXPECT_DOUBLE_EQ(s.trace.total_regret(), 0.0);
  }
}

TEST(OnlineSession, ThresholdOfOneUpdatesOnce) {
  std::mt19937_64 rng(32);
  auto off = toy_offline(random_unified(3, 20, rng));
  auto env = random_env(20, rng);
  for (auto kind : {PolicyKind::EpsilonGreedy, PolicyKind::Ucb1, PolicyKind::Thompson}) {
    auto s = run_online_session(off, env, session(kind, 1, 10), 3);
    EXPECT_EQ(s.policy_updates, 1u);
    EXPECT_EQ(s.trace.size(), 1u);
    EXPECT_TRUE(s.completed);
  }
}

TEST(OnlineSession, NoRepeatsBoundedRewardsMonotoneRegret) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t k = 1 + rng() % 4, n = 40;
    auto off = toy_offline(random_unified(k, n, rng));
    auto env = random_env(n, rng);
    const auto kind = static_cast<PolicyKind>(trial % 3);
    auto s = run_online_session(off, env, session(kind, 25), rng());
    std::set<std::size_t> items(s.recommended.begin(), s.recommended.end());
    EXPECT_EQ(items.size(), s.recommended.size());
    double prev = 0.0;
    for (std::size_t t = 0; t < s.trace.size(); ++t) {
      EXPECT_GE(s.trace[t].reward, 0.0);
      EXPECT_LE(s.trace[t].reward, 1.0);
      EXPECT_GE(s.trace.cumulative_regret()[t], prev);
      prev = s.trace.cumulative_regret()[t];
    }
    EXPECT_EQ(s.trace.size(), 25u);
  }
}

TEST(OnlineSession, SameSeedSameTrace) {
  std::mt19937_64 rng(34);
  auto off = toy_offline(random_unified(3, 30, rng));
  auto env = random_env(30, rng);
  for (auto kind : {PolicyKind::EpsilonGreedy, PolicyKind::Thompson}) {
    auto a = run_online_session(off, env, session(kind, 12), 77);
    auto b = run_online_session(off, env, session(kind, 12), 77);
    EXPECT_EQ(a.recommended, b.recommended);
    EXPECT_EQ(a.trace.rewards(), b.trace.rewards());
  }
}

TEST(OnlineSession, MissingRatingsSkipOrImpute) {
  Eigen::MatrixXd u(1, 4);
  u << 4.5, 3, 2, 1;
  auto off = toy_offline(u);
  auto env = env_of({std::nullopt, 3, std::nullopt, 1});

  auto skip = run_online_session(off, env, session(PolicyKind::Ucb1, 2, 4), 1);
  EXPECT_EQ(skip.recommended, (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(skip.attempts, 4u);
  EXPECT_EQ(skip.policy_updates, 2u);
  ASSERT_EQ(skip.trace.size(), 2u);
  EXPECT_EQ(skip.trace[0].round, 1u);
  EXPECT_EQ(skip.trace[1].round, 2u);
  EXPECT_EQ(skip.trace[0].item, 1u);
  EXPECT_TRUE(skip.completed);

  auto cut = run_online_session(off, env, session(PolicyKind::Ucb1, 2, 2), 1);
  EXPECT_EQ(cut.trace.size(), 1u);
  EXPECT_FALSE(cut.completed);

  SessionConfig cfg = session(PolicyKind::Ucb1, 2);
  cfg.missing = MissingRatings::Impute;
  auto imp = run_online_session(off, env, cfg, 1);
  ASSERT_EQ(imp.trace.size(), 2u);
  EXPECT_EQ(imp.trace[0].rating, 4.5);
  EXPECT_DOUBLE_EQ(imp.trace[0].reward, 0.9);
}

TEST(OnlineSession, RejectsBadArguments) {
  Eigen::MatrixXd u(1, 2);
  u << 1, 2;
  auto off = toy_offline(u);
  auto env = env_of({1, 2});
  EXPECT_THROW(run_online_session(off, env, session(PolicyKind::Ucb1, 0, 1), 1), InputError);
  EXPECT_THROW(run_online_session(off, env, session(PolicyKind::Ucb1, 2, 1), 1), InputError);
  EXPECT_THROW(run_online_session(off, env_of({1, 2, 3}), session(PolicyKind::Ucb1, 1), 1), InputError);
  EXPECT_THROW(run_online_session(off, env, session(PolicyKind::Ucb1, 3), 1), ComputeError);
}

TEST(OnlineSession, ThompsonFavoursTheMatchingCluster) {
  // cluster 2's unified vector is the hidden user's row
  std::mt19937_64 rng(35);
  const std::size_t n = 200;
  auto u = random_unified(3, n, rng);
  std::vector<std::optional<double>> truth(n);
  for (std::size_t i = 0; i < n; ++i) truth[i] = u(2, static_cast<Eigen::Index>(i));
  auto off = toy_offline(u);
  auto env = env_of(truth);
  double share = 0.0;
  const int seeds = 100;
  for (int s = 0; s < seeds; ++s) {
    auto sess = run_online_session(off, env, session(PolicyKind::Thompson, 50), static_cast<std::uint64_t>(s));
    std::size_t on2 = 0;
    for (const auto& r : sess.trace.records()) on2 += r.arm == 2;
    share += static_cast<double>(on2) / static_cast<double>(sess.trace.size());
  }
  EXPECT_GT(share / seeds, 1.0 / 3.0);
}

TEST(SessionMuStar, MatchesExhaustiveClusterEvaluation) {
  std::mt19937_64 rng(36);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t k = 3, n = 15, horizon = 1 + rng() % 6;
    auto u = random_unified(k, n, rng);
    std::vector<std::optional<double>> r(n);
    std::uniform_real_distribution<double> d(0.0, 5.0);
    for (auto& v : r)
      if (rng() % 4) v = d(rng);
    auto env = env_of(r);
    auto off = toy_offline(u);
    double best = -1.0;
    for (std::size_t c = 0; c < k; ++c) {
      // follow cluster c greedily by hand
      std::vector<std::pair<double, std::size_t>> order;
      for (std::size_t i = 0; i < n; ++i) order.push_back({-u(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)), i});
      std::sort(order.begin(), order.end());
      double sum = 0;
      std::size_t taken = 0;
      for (auto& [_, i] : order)
        if (taken < horizon && r[i]) {
          sum += *r[i] / 5.0;
          ++taken;
        }
      best = std::max(best, taken ? sum / static_cast<double>(taken) : 0.0);
    }
    EXPECT_NEAR(session_mu_star(off, env, horizon), best, 1e-12);
  }
}

TEST(SessionMuStar, IdenticalClustersAndMatchingUser) {
  Eigen::MatrixXd u(3, 4);
  u << 1, 4, 2, 3,
       1, 4, 2, 3,
       1, 4, 2, 3;
  auto env = env_of({1, 4, 2, 3});
  auto off = toy_offline(u);
  auto mus = cluster_expected_rewards(off, env, 2);
  EXPECT_EQ(mus[0], mus[1]);
  EXPECT_EQ(mus[1], mus[2]);
  EXPECT_DOUBLE_EQ(session_mu_star(off, env, 2), (0.8 + 0.6) / 2);
}

TEST(Dcg, ClosedForms) {
  EXPECT_EQ(dcg(std::vector<double>{0.7}), 0.7);
  EXPECT_EQ(dcg(std::vector<double>{0.3, 0.9}), 0.3 + 0.9);
  EXPECT_NEAR(dcg(std::vector<double>{1, 1, 1}), 2.63093, 1e-5);
  EXPECT_NEAR(dcg(std::vector<double>{0.2, 0.4, 0.6, 0.8}), 0.2 + 0.4 + 0.6 / std::log2(3.0) + 0.8 / 2.0, 1e-15);
  EXPECT_THROW(dcg(std::vector<double>{}), InputError);
}

TEST(Dcg, DescendingOrderIsOptimal) {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (std::size_t T = 1; T <= 6; ++T)
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> r(T);
      for (auto& v : r) v = d(rng);
      std::vector<double> sorted = r;
      std::sort(sorted.begin(), sorted.end(), std::greater<>());
      const double top = dcg(sorted);
      std::sort(r.begin(), r.end());
      do {
        EXPECT_LE(dcg(r), top + 1e-12);
      } while (std::next_permutation(r.begin(), r.end()));
    }
}

TEST(Ndcg, Cases) {
  const std::vector<std::vector<double>> reversed{{0.5, 1.0}};
  const std::vector<double> ideal{1.5};
  EXPECT_DOUBLE_EQ(ndcg(reversed, ideal), 1.0);

  // three rounds by hand
  const std::vector<std::vector<double>> three{{0.4, 1.0, 0.6}, {1.0, 1.0, 1.0}};
  const double d0 = 0.4 + 1.0 + 0.6 / std::log2(3.0), i0 = 1.0 + 0.6 + 0.4 / std::log2(3.0);
  const std::vector<double> ideals{i0, dcg(std::vector<double>{1, 1, 1})};
  EXPECT_NEAR(ndcg(three, ideals), (d0 / i0 + 1.0) / 2.0, 1e-15);

  EXPECT_THROW(ndcg(three, std::vector<double>{1.0}), InputError);
  EXPECT_THROW(ndcg(std::vector<std::vector<double>>{}, std::vector<double>{}), InputError);
  EXPECT_THROW(ndcg(reversed, std::vector<double>{0.0}), ComputeError);
}

TEST(Ndcg, IdealDcgUsesTopRewards) {
  auto env = env_of({1, 5, std::nullopt, 3, 4});
  EXPECT_DOUBLE_EQ(ideal_dcg(env, 2), 1.0 + 0.8);
  EXPECT_DOUBLE_EQ(ideal_dcg(env, 10), dcg(std::vector<double>{1.0, 0.8, 0.6, 0.2}));
  EXPECT_THROW(ideal_dcg(env_of({std::nullopt}), 1), ComputeError);
}

TEST(AppendUser, AddsOneRowWithCollectedRatings) {
  RatingMatrix m(2, 4, {{0, 0, 3}, {1, 2, 4}}, 5.0);
  const std::vector<std::pair<std::size_t, double>> got{{1, 4.5}, {3, 2.0}};
  auto grown = append_user(m, got);
  EXPECT_EQ(grown.num_users(), 3u);
  EXPECT_EQ(grown.entries().size(), 4u);
  EXPECT_EQ(grown.items_of(2).size(), 2u);
  EXPECT_THROW(append_user(m, std::vector<std::pair<std::size_t, double>>{}), InputError);
  EXPECT_THROW(append_user(m, std::vector<std::pair<std::size_t, double>>{{1, 4}, {1, 3}}), InputError);
  EXPECT_THROW(append_user(m, std::vector<std::pair<std::size_t, double>>{{9, 4}}), InputError);
}

TEST(AppendUser, SessionHandoffRefitsCleanly) {
  PlantedPopulationConfig pc;
  pc.train_users = 30;
  pc.items = 25;
  auto pop = planted_population(pc, 1, 4);
  OfflineConfig cfg;
  cfg.sgd.iterations = 40;
  auto off = offline_fit(pop.train, cfg);
  auto s = run_online_session(off, pop.cold[0], session(PolicyKind::Thompson, 5), 8);
  auto grown = append_user(pop.train, s.collected, pop.cold[0].label());
  EXPECT_EQ(grown.num_users(), pop.train.num_users() + 1);
  EXPECT_EQ(grown.entries().size(), pop.train.entries().size() + 5);
  auto refit = offline_fit(grown, cfg);
  EXPECT_EQ(refit.clusters.assignment.size(), 31u);
}

TEST(SimulatePolicy, SummaryAggregatesSessions) {
  PlantedPopulationConfig pc;
  pc.train_users = 40;
  pc.items = 30;
  auto pop = planted_population(pc, 6, 5);
  OfflineConfig cfg;
  cfg.sgd.iterations = 40;
  auto off = offline_fit(pop.train, cfg);
  auto out = simulate_policy(off, pop.cold, session(PolicyKind::Ucb1, 5), 11);
  ASSERT_EQ(out.sessions.size(), 6u);
  double regret = 0.0;
  std::vector<std::vector<double>> realized;
  std::vector<double> ideal;
  for (std::size_t u = 0; u < 6; ++u) {
    regret += out.sessions[u].trace.total_regret();
    realized.push_back(out.sessions[u].trace.rewards());
    ideal.push_back(ideal_dcg(pop.cold[u], 5));
  }
  EXPECT_DOUBLE_EQ(out.summary.cumulative_regret, regret / 6);
  EXPECT_DOUBLE_EQ(out.summary.ndcg, ndcg(realized, ideal));
  EXPECT_GT(out.summary.ndcg, 0.0);
  EXPECT_LE(out.summary.ndcg, 1.0 + 1e-12);
  EXPECT_EQ(out.summary.rounds, 5u);
  EXPECT_EQ(out.summary.users, 6u);

  auto again = simulate_policy(off, pop.cold, session(PolicyKind::Ucb1, 5), 11);
  EXPECT_EQ(again.summary.cumulative_regret, out.summary.cumulative_regret);
}

TEST(PlantedTrial, DeterministicPerSeed) {
  PlantedTrialConfig cfg;
  cfg.population.train_users = 40;
  cfg.population.items = 30;
  cfg.users = 5;
  cfg.offline.sgd.iterations = 30;
  const PolicyKind kinds[] = {PolicyKind::Thompson, PolicyKind::Ucb1};
  auto a = planted_trial(cfg, kinds, 3), b = planted_trial(cfg, kinds, 3);
  ASSERT_EQ(a.outcomes.size(), 2u);
  for (std::size_t p = 0; p < 2; ++p) {
    EXPECT_EQ(a.outcomes[p].summary.cumulative_regret, b.outcomes[p].summary.cumulative_regret);
    EXPECT_EQ(a.outcomes[p].summary.ndcg, b.outcomes[p].summary.ndcg);
  }
}
