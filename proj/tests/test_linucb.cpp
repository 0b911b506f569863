#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "banditmf/linucb.hpp"
#include "banditmf/synthetic.hpp"

using namespace banditmf;

namespace {

std::vector<double> random_context(std::size_t d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> x(d);
  for (auto& v : x) v = u(rng);
  return x;
}

// Policy that records every learn() call and picks a scripted arm.
class ScriptedPolicy {
 public:
  explicit ScriptedPolicy(std::vector<std::size_t> arms) : arms_(std::move(arms)) {}
  ReplayChoice choose(std::span<const double>, const ReplayClock& clock) const { return {arms_[clock.t - 1], {}}; }
  void learn(std::size_t a, std::span<const double> x, double r) {
    learned.push_back({a, std::vector<double>(x.begin(), x.end()), r});
  }
  struct Call {
    std::size_t arm;
    std::vector<double> x;
    double reward;
  };
  std::vector<Call> learned;

 private:
  std::vector<std::size_t> arms_;
};

ReplayLog random_log(std::size_t rows, std::size_t arms, std::size_t dim, std::mt19937_64& rng) {
  ReplayLog log;
  for (std::size_t t = 0; t < rows; ++t) log.push_back(rng() % arms, static_cast<int>(rng() % 2), random_context(dim, rng));
  return log;
}

}  // namespace

TEST(LinUcb, FreshStateScoresAlphaTimesNorm) {
  LinUcb model(3, 4);
  const std::vector<double> x{1.0, -2.0, 0.5, 2.0};
  const double norm = std::sqrt(1 + 4 + 0.25 + 4);
  for (std::size_t a = 0; a < 3; ++a) EXPECT_NEAR(model.ucb(a, x, 0.7), 0.7 * norm, 1e-14);
  auto sel = model.select_shared(x, 0.7);
  EXPECT_EQ(sel.arm, 0u);  // every arm ties
  ASSERT_EQ(sel.ucb.size(), 3u);
}

TEST(LinUcb, ZeroAlphaExploitsTheRidgeEstimate) {
  LinUcb model(2, 2);
  const std::vector<double> x{1.0, 0.0};
  model.update(1, x, 1.0);
  model.update(0, x, 0.0);
  auto sel = model.select_shared(x, 0.0);
  EXPECT_EQ(sel.arm, 1u);
  EXPECT_NEAR(sel.ucb[1], 0.5, 1e-15);  // (1 + 1)^{-1} * 1
  EXPECT_EQ(sel.ucb[0], 0.0);
}

TEST(LinUcb, TwoByTwoMatchesClosedFormInverse) {
  LinUcb model(2, 2);
  const std::vector<std::vector<double>> xs{{1.0, 2.0}, {-0.5, 1.0}, {3.0, 0.25}};
  const double rs[] = {1.0, 0.0, 1.0};
  double a11 = 1, a12 = 0, a22 = 1, b1 = 0, b2 = 0;
  for (int k = 0; k < 3; ++k) {
    model.update(1, xs[k], rs[k]);
    a11 += xs[k][0] * xs[k][0];
    a12 += xs[k][0] * xs[k][1];
    a22 += xs[k][1] * xs[k][1];
    b1 += rs[k] * xs[k][0];
    b2 += rs[k] * xs[k][1];
  }
  const double det = a11 * a22 - a12 * a12;
  const double i11 = a22 / det, i12 = -a12 / det, i22 = a11 / det;
  const auto& inv = model.inverse(1);
  EXPECT_NEAR(inv(0, 0), i11, 1e-10);
  EXPECT_NEAR(inv(0, 1), i12, 1e-10);
  EXPECT_NEAR(inv(1, 0), i12, 1e-10);
  EXPECT_NEAR(inv(1, 1), i22, 1e-10);
  const double t1 = i11 * b1 + i12 * b2, t2 = i12 * b1 + i22 * b2;
  EXPECT_NEAR(model.theta(1)(0), t1, 1e-10);
  EXPECT_NEAR(model.theta(1)(1), t2, 1e-10);

  const std::vector<double> q{0.3, -0.8};
  const double var = q[0] * (i11 * q[0] + i12 * q[1]) + q[1] * (i12 * q[0] + i22 * q[1]);
  EXPECT_NEAR(model.ucb(1, q, 1.3), t1 * q[0] + t2 * q[1] + 1.3 * std::sqrt(var), 1e-10);
  // arm 0 untouched
  EXPECT_EQ(model.inverse(0), Eigen::MatrixXd::Identity(2, 2));
}

TEST(LinUcb, ShermanMorrisonAgreesWithDirectSolve) {
  std::mt19937_64 rng(21);
  const std::size_t d = 8;
  LinUcb model(1, d);
  for (int k = 0; k < 300; ++k) {
    auto x = random_context(d, rng);
    model.update(0, x, static_cast<double>(rng() % 2));
  }
  Eigen::MatrixXd direct = model.design(0).ldlt().solve(Eigen::MatrixXd::Identity(d, d));
  EXPECT_LT((model.inverse(0) - direct).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((model.theta(0) - model.solve_theta(0)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(LinUcb, DesignStaysSymmetricPositiveDefinite) {
  std::mt19937_64 rng(22);
  const std::size_t d = 5;
  LinUcb model(1, d);
  double trace = model.design(0).trace();
  for (int k = 0; k < 100; ++k) {
    auto x = random_context(d, rng);
    double norm2 = 0;
    for (double v : x) norm2 += v * v;
    model.update(0, x, 1.0);
    EXPECT_NEAR(model.design(0).trace(), trace + norm2, 1e-9);
    trace = model.design(0).trace();
  }
  const auto& A = model.design(0);
  EXPECT_LT((A - A.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  EXPECT_GE(es.eigenvalues().minCoeff(), 1.0 - 1e-9);  // I + sum x x'
  const auto& inv = model.inverse(0);
  EXPECT_LT((inv - inv.transpose()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(LinUcb, ZeroContextChangesNothing) {
  LinUcb model(1, 3);
  model.update(0, std::vector<double>{1, 2, 3}, 1.0);
  const Eigen::MatrixXd A = model.design(0), inv = model.inverse(0);
  const Eigen::VectorXd b = model.response(0);
  model.update(0, std::vector<double>{0, 0, 0}, 1.0);
  EXPECT_EQ(model.design(0), A);
  EXPECT_EQ(model.inverse(0), inv);
  EXPECT_EQ(model.response(0), b);
}

TEST(LinUcb, ArmPermutationPermutesScores) {
  std::mt19937_64 rng(23);
  const std::size_t K = 4, d = 3;
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  LinUcb a(K, d), b(K, d);
  for (int k = 0; k < 60; ++k) {
    const std::size_t arm = rng() % K;
    auto x = random_context(d, rng);
    const double r = static_cast<double>(rng() % 2);
    a.update(arm, x, r);
    b.update(perm[arm], x, r);
  }
  auto x = random_context(d, rng);
  auto sa = a.select_shared(x, 0.5), sb = b.select_shared(x, 0.5);
  for (std::size_t arm = 0; arm < K; ++arm) EXPECT_EQ(sa.ucb[arm], sb.ucb[perm[arm]]);
  EXPECT_EQ(perm[sa.arm], sb.arm);
}

TEST(LinUcb, PerArmContextsAgreeWithSharedWhenEqual) {
  std::mt19937_64 rng(24);
  LinUcb model(3, 4);
  for (int k = 0; k < 30; ++k) model.update(rng() % 3, random_context(4, rng), static_cast<double>(rng() % 2));
  auto x = random_context(4, rng);
  std::vector<std::span<const double>> ctx(3, std::span<const double>(x));
  auto per = model.select(ctx, 0.8);
  auto shared = model.select_shared(x, 0.8);
  EXPECT_EQ(per.arm, shared.arm);
  for (std::size_t a = 0; a < 3; ++a) EXPECT_NEAR(per.ucb[a], shared.ucb[a], 1e-14);
  EXPECT_THROW(model.select(std::span(ctx).first(2), 0.8), InputError);
  EXPECT_THROW(model.update(0, std::vector<double>{1, 2}, 1.0), InputError);
}

TEST(AlphaSchedule, ParsesAndEvaluates) {
  auto c = AlphaSchedule::parse("const:0.25");
  EXPECT_EQ(c(1, 0), 0.25);
  EXPECT_EQ(c(1000, 77), 0.25);
  auto inv = AlphaSchedule::parse("inv-sqrt-t");
  EXPECT_EQ(inv(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(inv(16, 3), 0.25);
  auto ad = AlphaSchedule::parse("adaptive:0.5,2");
  EXPECT_EQ(ad(1, 0), 0.25);  // capped at C/S before any correct prediction
  EXPECT_EQ(ad(1, 1), 0.25);
  EXPECT_DOUBLE_EQ(ad(9, 10), 0.025);
  EXPECT_EQ(AlphaSchedule::parse(ad.describe()).describe(), ad.describe());
  EXPECT_EQ(c.describe(), "const:0.25");
  for (const char* bad : {"", "const:", "const:-1", "adaptive:1", "adaptive:1,0", "sqrt", "const:x"})
    EXPECT_THROW(AlphaSchedule::parse(bad), InputError) << bad;
}

TEST(ReplayCtr, AlwaysMatchingRewardedLogGivesOne) {
  ReplayLog log;
  for (int t = 0; t < 20; ++t) log.push_back(2, 1, std::vector<double>{1.0, static_cast<double>(t)});
  FixedArmPolicy policy(2);
  auto res = replay_ctr(log, policy, 3);
  ASSERT_TRUE(res.ctr());
  EXPECT_EQ(*res.ctr(), 1.0);
  EXPECT_EQ(res.matches, 20u);
}

TEST(ReplayCtr, NoRewardsGiveZeroAndNoMatchesGiveNothing) {
  ReplayLog log;
  for (int t = 0; t < 20; ++t) log.push_back(0, 0, std::vector<double>{1.0});
  FixedArmPolicy zero(0), one(1);
  EXPECT_EQ(*replay_ctr(log, zero, 2).ctr(), 0.0);
  auto none = replay_ctr(log, one, 2);
  EXPECT_FALSE(none.ctr());
  EXPECT_TRUE(std::isnan(none.series.back().ctr));
}

TEST(ReplayCtr, MatchesBruteForceCount) {
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 50; ++trial) {
    auto log = random_log(20, 3, 2, rng);
    std::vector<std::size_t> script(20);
    for (auto& a : script) a = rng() % 3;
    ScriptedPolicy policy(script);
    auto res = replay_ctr(log, policy, 3);
    std::size_t matches = 0, correct = 0;
    for (std::size_t t = 0; t < 20; ++t)
      if (script[t] == log.action(t)) {
        ++matches;
        correct += static_cast<std::size_t>(log.reward(t));
      }
    EXPECT_EQ(res.matches, matches);
    EXPECT_EQ(res.correct, correct);
    if (matches) EXPECT_EQ(*res.ctr(), static_cast<double>(correct) / static_cast<double>(matches));
    EXPECT_EQ(policy.learned.size(), matches);
  }
}

TEST(ReplayCtr, LearnsOnlyFromMatchingRows) {
  ReplayLog log;
  log.push_back(1, 1, std::vector<double>{1, 0});
  log.push_back(0, 1, std::vector<double>{0, 1});
  log.push_back(1, 0, std::vector<double>{2, 2});
  ScriptedPolicy policy({1, 1, 1});
  auto res = replay_ctr(log, policy, 2);
  ASSERT_EQ(policy.learned.size(), 2u);
  EXPECT_EQ(policy.learned[0].x, (std::vector<double>{1, 0}));
  EXPECT_EQ(policy.learned[1].x, (std::vector<double>{2, 2}));
  EXPECT_EQ(policy.learned[1].reward, 0.0);
  EXPECT_EQ(res.series[1].matches, 1u);
  EXPECT_EQ(res.arms[1].predictions, 3u);
  EXPECT_EQ(res.arms[1].matches, 2u);
  EXPECT_EQ(res.arms[1].correct, 1u);
}

TEST(ReplayCtr, LinUcbStateIgnoresNonMatchingRows) {
  // Rows whose logged action the policy did not choose must leave the model
  // exactly as it would be without them.
  std::mt19937_64 rng(26);
  auto log = random_log(200, 3, 4, rng);
  LinUcbReplayPolicy full(3, 4, AlphaSchedule::constant(0.5));
  auto res = replay_ctr(log, full, 3);

  // Replay again, keeping only the rows that matched, with the same clock.
  LinUcb expect(3, 4);
  for (std::size_t t = 0; t < log.size(); ++t) {
    auto sel = expect.select_shared(log.context(t), 0.5);
    if (sel.arm == log.action(t)) expect.update(sel.arm, log.context(t), log.reward(t));
  }
  for (std::size_t a = 0; a < 3; ++a) {
    EXPECT_EQ(full.model().design(a), expect.design(a));
    EXPECT_EQ(full.model().response(a), expect.response(a));
  }
  EXPECT_GT(res.matches, 0u);
}

TEST(ReplayCtr, ActionBaseShiftsLoggedArms) {
  ReplayLog log;
  for (int t = 0; t < 6; ++t) log.push_back(1 + t % 2, t % 3 == 0, std::vector<double>{1.0});
  FixedArmPolicy first(0);
  auto shifted = replay_ctr(log, first, 2, 1);
  EXPECT_EQ(shifted.matches, 3u);
  EXPECT_THROW(replay_ctr(log, first, 2, 0), InputError);  // action 2 out of range
  ReplayLog zero;
  zero.push_back(0, 1, std::vector<double>{1.0});
  EXPECT_THROW(replay_ctr(zero, first, 2, 1), InputError);
}

TEST(ReplayCtr, AdaptiveLinUcbBeatsRandomOnPlantedLog) {
  PlantedReplayConfig cfg;
  cfg.rows = 4000;
  auto log = planted_replay_log(cfg, 7);
  LinUcbReplayPolicy lin(cfg.arms, cfg.dim, AlphaSchedule::adaptive(0.001, 0.1));
  UniformRandomPolicy rnd(cfg.arms, 7);
  const double a = *replay_ctr(log, lin, cfg.arms).ctr();
  const double r = *replay_ctr(log, rnd, cfg.arms).ctr();
  EXPECT_GT(a, 2.0 * r);
}
