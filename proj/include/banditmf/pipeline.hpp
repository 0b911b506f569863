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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "banditmf/bandit.hpp"
#include "banditmf/clustering.hpp"
#include "banditmf/common.hpp"
#include "banditmf/dataset.hpp"
#include "banditmf/mf.hpp"

namespace banditmf {

// ---------------------------------------------------------------------------
// Offline subsystem: MF -> k-means over R-hat rows -> unified vectors

struct OfflineConfig {
  SgdConfig sgd;
  std::size_t clusters = 3;
  std::size_t n_init = 20;
  std::size_t max_iter = 300;
  std::uint64_t seed = 0;
};

struct OfflineModel {
  LatentModel latent;
  ClusterModel clusters;
  Eigen::MatrixXd unified;  // clusters x items

  std::size_t num_clusters() const { return static_cast<std::size_t>(unified.rows()); }
  std::size_t num_items() const { return static_cast<std::size_t>(unified.cols()); }
};

/// Bias MF, full prediction, k-means on its rows, cluster means. The SGD and
/// k-means seeds both derive from `cfg.seed`.
inline OfflineModel offline_fit(const RatingMatrix& train, const OfflineConfig& cfg) {
  SgdConfig sgd = cfg.sgd;
  sgd.seed = derive_seed(cfg.seed, "offline-mf");
  OfflineModel out;
  out.latent = train_bias(train, sgd);
  const Eigen::MatrixXd full = predict_full(out.latent);
  KMeansConfig km;
  km.clusters = cfg.clusters;
  km.n_init = cfg.n_init;
  km.max_iter = cfg.max_iter;
  km.seed = derive_seed(cfg.seed, "offline-kmeans");
  out.clusters = kmeans(full, km);
  out.unified = unified_ratings(out.clusters);
  return out;
}

/// Items of each cluster ordered by unified score descending (ties: lower
/// item index first).
inline std::vector<std::vector<std::size_t>> cluster_rankings(const Eigen::MatrixXd& unified) {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(unified.rows()));
  for (Eigen::Index c = 0; c < unified.rows(); ++c) {
    auto& r = out[static_cast<std::size_t>(c)];
    r.resize(static_cast<std::size_t>(unified.cols()));
    std::iota(r.begin(), r.end(), std::size_t{0});
    std::stable_sort(r.begin(), r.end(), [&](std::size_t a, std::size_t b) {
      return unified(c, static_cast<Eigen::Index>(a)) > unified(c, static_cast<Eigen::Index>(b));
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Online subsystem

/// A simulated new user answering from a row of true ratings. Items without
/// a true rating cannot be rated.
class ColdUserEnvironment {
 public:
  ColdUserEnvironment(std::vector<std::optional<double>> ratings, double rating_max,
                      std::string label = {})
      : ratings_(std::move(ratings)), rating_max_(rating_max), label_(std::move(label)) {
    if (!(rating_max_ > 0.0)) throw InputError("environment rating_max must be positive");
    for (const auto& r : ratings_)
      if (r && (*r < 0.0 || *r > rating_max_))
        throw InputError(detail::concat("environment rating ", *r, " outside [0, ", rating_max_, "]"));
  }

  /// Environment built from one user row of a rating matrix.
  static ColdUserEnvironment from_user(const RatingMatrix& m, std::size_t user) {
    std::vector<std::optional<double>> row(m.num_items());
    auto items = m.items_of(user);
    auto values = m.values_of(user);
    for (std::size_t k = 0; k < items.size(); ++k) row[items[k]] = values[k];
    return ColdUserEnvironment(std::move(row), m.rating_max(), m.user_label(user));
  }

  std::optional<double> rate(std::size_t item) const {
    return item < ratings_.size() ? ratings_[item] : std::nullopt;
  }
  std::size_t num_items() const { return ratings_.size(); }
  double rating_max() const { return rating_max_; }
  const std::string& label() const { return label_; }

  /// Normalized rewards of every rateable item, descending.
  std::vector<double> sorted_rewards() const {
    std::vector<double> out;
    for (const auto& r : ratings_)
      if (r) out.push_back(*r / rating_max_);
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
  }

 private:
  std::vector<std::optional<double>> ratings_;
  double rating_max_;
  std::string label_;
};

/// Expected per-round reward of following one cluster's ranking for
/// `horizon` rated items: the mean normalized true rating of its first
/// `horizon` rateable items.
inline std::vector<double> cluster_expected_rewards(const OfflineModel& offline,
                                                    const ColdUserEnvironment& env,
                                                    std::size_t horizon) {
  const auto rankings = cluster_rankings(offline.unified);
  std::vector<double> out;
  for (const auto& ranking : rankings) {
    double sum = 0.0;
    std::size_t taken = 0;
    for (std::size_t item : ranking) {
      if (taken == horizon) break;
      if (auto r = env.rate(item)) {
        sum += *r / env.rating_max();
        ++taken;
      }
    }
    out.push_back(taken ? sum / static_cast<double>(taken) : 0.0);
  }
  return out;
}

/// Best single cluster's expected per-round reward over the horizon.
inline double session_mu_star(const OfflineModel& offline, const ColdUserEnvironment& env,
                              std::size_t horizon) {
  auto mus = cluster_expected_rewards(offline, env, horizon);
  return *std::max_element(mus.begin(), mus.end());
}

enum class MissingRatings {
  Skip,    // item consumed, no reward, no policy update, round not counted
  Impute,  // use the selected cluster's unified value, clamped to [0, r*]
};

struct SessionConfig {
  PolicyConfig policy;
  std::size_t tau = 5;
  std::size_t max_rounds = 5;
  MissingRatings missing = MissingRatings::Skip;
};

struct OnlineSession {
  std::string user;
  std::vector<std::size_t> recommended;                  // every item shown, in order
  std::vector<std::pair<std::size_t, double>> collected;  // (item, rating)
  SessionTrace trace;
  std::vector<double> arm_expected;
  double mu_star = 0.0;
  std::size_t attempts = 0;
  std::size_t policy_updates = 0;
  bool completed = false;  // collected reached tau
};

/// One cold-start session. Each round: the policy picks a cluster, the
/// cluster's best item not yet shown to this user is recommended, the user's
/// rating becomes a reward in [0,1], regret is charged against the best
/// cluster's expected reward, and the policy is updated. The session ends
/// once tau ratings are collected (or max_rounds recommendations were made).
inline OnlineSession run_online_session(const OfflineModel& offline, const ColdUserEnvironment& env,
                                        const SessionConfig& cfg, std::uint64_t seed) {
  if (cfg.tau < 1) throw InputError("tau must be >= 1");
  if (cfg.max_rounds < cfg.tau) throw InputError("max_rounds must be >= tau");
  if (env.num_items() != offline.num_items())
    throw InputError("environment and offline model disagree on item count");

  OnlineSession s;
  s.user = env.label();
  s.arm_expected = cluster_expected_rewards(offline, env, cfg.tau);
  s.mu_star = *std::max_element(s.arm_expected.begin(), s.arm_expected.end());

  const auto rankings = cluster_rankings(offline.unified);
  std::vector<std::size_t> cursor(rankings.size(), 0);
  std::vector<char> shown(offline.num_items(), 0);
  BanditPolicy policy(cfg.policy, offline.num_clusters());
  Rng rng = make_rng(seed, "online-session");

  while (s.collected.size() < cfg.tau && s.attempts < cfg.max_rounds) {
    ++s.attempts;
    const std::size_t t = s.collected.size() + 1;
    const std::size_t arm = policy.select(t, rng);
    const auto& ranking = rankings[arm];
    std::size_t& pos = cursor[arm];
    while (pos < ranking.size() && shown[ranking[pos]]) ++pos;
    if (pos == ranking.size())
      throw ComputeError(detail::concat("cluster ", arm, " has no item left to recommend"));
    const std::size_t item = ranking[pos];
    shown[item] = 1;
    s.recommended.push_back(item);

    std::optional<double> rating = env.rate(item);
    if (!rating) {
      if (cfg.missing == MissingRatings::Skip) continue;
      rating = std::clamp(offline.unified(static_cast<Eigen::Index>(arm), static_cast<Eigen::Index>(item)),
                          0.0, env.rating_max());
    }
    RoundRecord rec;
    rec.round = t;
    rec.arm = arm;
    rec.item = item;
    rec.rating = *rating;
    rec.reward = normalize_reward(*rating, env.rating_max());
    rec.expected_reward = s.arm_expected[arm];
    rec.regret = s.mu_star - rec.expected_reward;
    s.trace.push_back(rec);
    s.collected.emplace_back(item, *rating);
    policy.update(arm, rec.reward);
    ++s.policy_updates;
  }
  s.completed = s.collected.size() == cfg.tau;
  return s;
}

// ---------------------------------------------------------------------------
// Ranking metrics

/// DCG(u) = r_1 + sum_{t>=2} r_t / log2(t).
inline double dcg(std::span<const double> rewards) {
  if (rewards.empty()) throw InputError("dcg of an empty reward sequence");
  double total = rewards[0];
  for (std::size_t t = 2; t <= rewards.size(); ++t) total += rewards[t - 1] / std::log2(static_cast<double>(t));
  return total;
}

/// DCG of the user's best achievable rewards over `horizon` rounds: the top
/// `horizon` normalized true ratings in descending order.
inline double ideal_dcg(const ColdUserEnvironment& env, std::size_t horizon) {
  auto best = env.sorted_rewards();
  if (best.size() > horizon) best.resize(horizon);
  if (best.empty()) throw ComputeError("ideal DCG undefined: environment rates nothing");
  return dcg(best);
}

/// Mean over users of DCG(u) / DCG*(u).
inline double ndcg(std::span<const std::vector<double>> realized, std::span<const double> ideal) {
  if (realized.size() != ideal.size()) throw InputError("ndcg: one ideal DCG per user required");
  if (realized.empty()) throw InputError("ndcg over zero users");
  double total = 0.0;
  for (std::size_t u = 0; u < realized.size(); ++u) {
    if (!(ideal[u] > 0.0)) throw ComputeError("ndcg: ideal DCG must be positive");
    total += dcg(realized[u]) / ideal[u];
  }
  return total / static_cast<double>(realized.size());
}

/// Hand-off to the offline side: a new user row holding exactly the
/// collected ratings.
inline RatingMatrix append_user(const RatingMatrix& matrix,
                                std::span<const std::pair<std::size_t, double>> collected,
                                std::string label = {}) {
  if (collected.empty()) throw InputError("append_user: no collected ratings");
  std::vector<Rating> entries(matrix.entries().begin(), matrix.entries().end());
  std::vector<std::size_t> seen;
  const std::size_t u = matrix.num_users();
  for (const auto& [item, rating] : collected) {
    if (item >= matrix.num_items()) throw InputError("append_user: item out of range");
    if (std::find(seen.begin(), seen.end(), item) != seen.end())
      throw InputError(detail::concat("append_user: item ", item, " collected twice"));
    seen.push_back(item);
    entries.push_back({u, item, rating});
  }
  std::vector<std::string> users = matrix.user_labels();
  if (!users.empty()) users.push_back(label.empty() ? "new-" + std::to_string(u) : label);
  return RatingMatrix(u + 1, matrix.num_items(), std::move(entries), matrix.rating_max(), std::move(users),
                      matrix.item_labels());
}

// ---------------------------------------------------------------------------
// Multi-user simulation

struct PolicySummary {
  PolicyKind policy = PolicyKind::Thompson;
  std::size_t rounds = 0;   // T
  std::size_t users = 0;    // N
  double cumulative_regret = 0.0;  // mean over users of R(T)
  double ndcg = 0.0;
};

struct SimulationOutcome {
  std::vector<OnlineSession> sessions;  // one per user, in user order
  PolicySummary summary;
};

/// Runs one session per environment with the same policy family and
/// aggregates mean cumulative regret and NDCG.
inline SimulationOutcome simulate_policy(const OfflineModel& offline,
                                         std::span<const ColdUserEnvironment> users,
                                         const SessionConfig& cfg, std::uint64_t seed) {
  SimulationOutcome out;
  std::vector<std::vector<double>> realized;
  std::vector<double> ideal;
  double regret = 0.0;
  for (std::size_t u = 0; u < users.size(); ++u) {
    OnlineSession s = run_online_session(offline, users[u], cfg, derive_seed(seed, "sim-user", u));
    if (s.trace.empty()) throw ComputeError("simulated user " + users[u].label() + " rated nothing");
    regret += s.trace.total_regret();
    realized.push_back(s.trace.rewards());
    ideal.push_back(ideal_dcg(users[u], s.trace.size()));
    out.sessions.push_back(std::move(s));
  }
  out.summary.policy = cfg.policy.kind;
  out.summary.rounds = cfg.tau;
  out.summary.users = users.size();
  out.summary.cumulative_regret = regret / static_cast<double>(users.size());
  out.summary.ndcg = ndcg(realized, ideal);
  return out;
}

}  // namespace banditmf
