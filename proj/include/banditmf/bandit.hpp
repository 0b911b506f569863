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

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "banditmf/common.hpp"

namespace banditmf {

/// rating / r*, the per-round reward in [0, 1].
inline double normalize_reward(double rating, double rating_max) {
  if (!(rating_max > 0.0)) throw InputError("rating_max must be positive");
  if (!(rating >= 0.0 && rating <= rating_max))
    throw InputError(detail::concat("rating ", rating, " outside [0, ", rating_max, "]"));
  return rating / rating_max;
}

enum class PolicyKind { EpsilonGreedy, Ucb1, Thompson };

inline const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::EpsilonGreedy: return "egreedy";
    case PolicyKind::Ucb1: return "ucb";
    case PolicyKind::Thompson: return "ts";
  }
  return "?";
}

inline PolicyKind parse_policy(const std::string& s) {
  if (s == "egreedy" || s == "epsilon-greedy") return PolicyKind::EpsilonGreedy;
  if (s == "ucb" || s == "ucb1") return PolicyKind::Ucb1;
  if (s == "ts" || s == "thompson") return PolicyKind::Thompson;
  throw InputError("unknown policy '" + s + "' (expected ts, ucb or egreedy)");
}

struct PolicyConfig {
  PolicyKind kind = PolicyKind::Thompson;
  double epsilon = 0.1;
  double ucb_c = 1.0;
};

/// Context-free policy state: pull counts and running means for every
/// algorithm, Beta(alpha, beta) posteriors for Thompson sampling.
class BanditPolicy {
 public:
  BanditPolicy(PolicyConfig cfg, std::size_t arms)
      : cfg_(cfg), counts_(arms, 0), means_(arms, 0.0), alpha_(arms, 1.0), beta_(arms, 1.0) {
    if (arms == 0) throw InputError("bandit needs at least one arm");
    if (!(cfg.epsilon >= 0.0 && cfg.epsilon <= 1.0)) throw InputError("epsilon must be in [0,1]");
    if (!(cfg.ucb_c >= 0.0)) throw InputError("UCB exploration constant must be >= 0");
  }

  const PolicyConfig& config() const { return cfg_; }
  std::size_t arms() const { return counts_.size(); }
  std::size_t count(std::size_t a) const { return counts_.at(a); }
  /// Empirical mean; 0 for an arm that was never pulled.
  double mean(std::size_t a) const { return means_.at(a); }
  double alpha(std::size_t a) const { return alpha_.at(a); }
  double beta(std::size_t a) const { return beta_.at(a); }
  double posterior_mean(std::size_t a) const { return alpha_.at(a) / (alpha_.at(a) + beta_.at(a)); }

  /// mean + c * sqrt(2 ln t / n_a); requires n_a > 0 and t >= 1.
  double ucb_index(std::size_t a, std::size_t t) const {
    if (counts_.at(a) == 0) throw ComputeError("UCB index undefined for an unpulled arm");
    return means_[a] + cfg_.ucb_c * std::sqrt(2.0 * std::log(static_cast<double>(t)) /
                                              static_cast<double>(counts_[a]));
  }

  /// Arm for round t (1-based).
  std::size_t select(std::size_t t, Rng& rng) const {
    const std::size_t k = arms();
    switch (cfg_.kind) {
      case PolicyKind::EpsilonGreedy: {
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        if (coin(rng) < cfg_.epsilon) {
          std::uniform_int_distribution<std::size_t> any(0, k - 1);
          return any(rng);
        }
        return argmax(means_);
      }
      case PolicyKind::Ucb1: {
        for (std::size_t a = 0; a < k; ++a)
          if (counts_[a] == 0) return a;
        std::vector<double> index(k);
        for (std::size_t a = 0; a < k; ++a) index[a] = ucb_index(a, t);
        return argmax(index);
      }
      case PolicyKind::Thompson: {
        std::vector<double> draw(k);
        for (std::size_t a = 0; a < k; ++a) draw[a] = sample_beta(alpha_[a], beta_[a], rng);
        return argmax(draw);
      }
    }
    return 0;
  }

  void update(std::size_t arm, double reward) {
    if (arm >= arms()) throw InputError("bandit update: arm out of range");
    if (!(reward >= 0.0 && reward <= 1.0))
      throw InputError(detail::concat("bandit reward ", reward, " outside [0,1]"));
    ++counts_[arm];
    means_[arm] += (reward - means_[arm]) / static_cast<double>(counts_[arm]);
    alpha_[arm] += reward;
    beta_[arm] += 1.0 - reward;
  }

 private:
  static std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t a = 1; a < v.size(); ++a)
      if (v[a] > v[best]) best = a;
    return best;
  }

  static double sample_beta(double a, double b, Rng& rng) {
    std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    return x / (x + y);
  }

  PolicyConfig cfg_;
  std::vector<std::size_t> counts_;
  std::vector<double> means_;
  std::vector<double> alpha_;
  std::vector<double> beta_;
};

/// Per-round record of one online session.
struct RoundRecord {
  std::size_t round = 0;  // 1-based
  std::size_t arm = 0;
  std::size_t item = 0;
  double rating = 0.0;
  double reward = 0.0;           // realized, normalized
  double expected_reward = 0.0;  // expected reward of the chosen arm
  double regret = 0.0;           // mu* - expected_reward
};

class SessionTrace {
 public:
  void push_back(const RoundRecord& r) {
    records_.push_back(r);
    cum_reward_.push_back((cum_reward_.empty() ? 0.0 : cum_reward_.back()) + r.reward);
    cum_regret_.push_back((cum_regret_.empty() ? 0.0 : cum_regret_.back()) + r.regret);
  }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const RoundRecord& operator[](std::size_t k) const { return records_[k]; }
  std::span<const RoundRecord> records() const { return records_; }
  std::span<const double> cumulative_reward() const { return cum_reward_; }
  std::span<const double> cumulative_regret() const { return cum_regret_; }
  double total_regret() const { return cum_regret_.empty() ? 0.0 : cum_regret_.back(); }

  std::vector<double> rewards() const {
    std::vector<double> out;
    for (const auto& r : records_) out.push_back(r.reward);
    return out;
  }

 private:
  std::vector<RoundRecord> records_;
  std::vector<double> cum_reward_;
  std::vector<double> cum_regret_;
};

/// R(T) = sum_{t<=T} (mu* - mu_chosen(t)) over expected rewards.
inline std::vector<double> regret_series(std::span<const double> chosen_expected, double mu_star) {
  std::vector<double> out;
  out.reserve(chosen_expected.size());
  double acc = 0.0;
  for (double mu : chosen_expected) {
    if (mu > mu_star)
      throw InputError(detail::concat("inconsistent oracle: mu* ", mu_star, " below chosen mean ", mu));
    acc += mu_star - mu;
    out.push_back(acc);
  }
  return out;
}

inline std::vector<double> regret_series(const SessionTrace& trace, double mu_star) {
  std::vector<double> mus;
  for (const auto& r : trace.records()) mus.push_back(r.expected_reward);
  return regret_series(mus, mu_star);
}

}  // namespace banditmf
