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

// Planted-structure data generators for experiments and tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "banditmf/common.hpp"
#include "banditmf/dataset.hpp"
#include "banditmf/pipeline.hpp"

namespace banditmf {

// ---------------------------------------------------------------------------
// Sparse rating matrix from planted factors, biases and noise

struct PlantedMfConfig {
  std::size_t users = 25;
  std::size_t items = 100;
  std::size_t rank = 2;
  double density = 0.4;
  double global_mean = 3.0;
  double bias_sd = 0.6;
  double factor_sd = 0.6;
  double noise_sd = 0.3;
  double rating_min = 1.0;
  double rating_max = 5.0;
};

inline RatingMatrix planted_mf_matrix(const PlantedMfConfig& cfg, std::uint64_t seed) {
  Rng rng = make_rng(seed, "planted-mf");
  std::normal_distribution<double> bias(0.0, cfg.bias_sd), factor(0.0, cfg.factor_sd), noise(0.0, cfg.noise_sd);
  std::bernoulli_distribution observed(cfg.density);

  std::vector<double> bu(cfg.users), bi(cfg.items);
  std::vector<double> p(cfg.users * cfg.rank), q(cfg.items * cfg.rank);
  for (auto& v : bu) v = bias(rng);
  for (auto& v : bi) v = bias(rng);
  for (auto& v : p) v = factor(rng);
  for (auto& v : q) v = factor(rng);

  std::vector<Rating> entries;
  for (std::size_t u = 0; u < cfg.users; ++u)
    for (std::size_t i = 0; i < cfg.items; ++i) {
      if (!observed(rng)) continue;
      double r = cfg.global_mean + bu[u] + bi[i] + noise(rng);
      for (std::size_t f = 0; f < cfg.rank; ++f) r += p[u * cfg.rank + f] * q[i * cfg.rank + f];
      entries.push_back({u, i, std::clamp(r, cfg.rating_min, cfg.rating_max)});
    }
  return RatingMatrix(cfg.users, cfg.items, std::move(entries), cfg.rating_max);
}

// ---------------------------------------------------------------------------
// Logged bandit data with disjoint linear rewards

struct PlantedReplayConfig {
  std::size_t arms = 10;
  std::size_t dim = 100;
  std::size_t rows = 10000;
  double on_block = 0.7;   // P(feature active) inside the row's type block
  double off_block = 0.02; // ... elsewhere
  double weight = 0.13;    // theta_a on arm a's block
};

/// Each row has a hidden type z; features of block z are mostly active.
/// Arm a's reward is Bernoulli(clamp(theta_a . x)) with theta_a supported on
/// block a. The logged action is uniform random.
inline ReplayLog planted_replay_log(const PlantedReplayConfig& cfg, std::uint64_t seed) {
  if (cfg.arms == 0 || cfg.dim < cfg.arms) throw InputError("planted replay log needs dim >= arms >= 1");
  Rng rng = make_rng(seed, "planted-replay");
  const std::size_t block = cfg.dim / cfg.arms;
  std::uniform_int_distribution<std::size_t> pick(0, cfg.arms - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ReplayLog log;
  std::vector<double> x(cfg.dim);
  for (std::size_t t = 0; t < cfg.rows; ++t) {
    const std::size_t z = pick(rng);
    for (std::size_t j = 0; j < cfg.dim; ++j) {
      const bool inside = j / block == z;
      x[j] = unit(rng) < (inside ? cfg.on_block : cfg.off_block) ? 1.0 : 0.0;
    }
    const std::size_t action = pick(rng);
    double mean = 0.0;
    for (std::size_t j = action * block; j < (action + 1) * block; ++j) mean += cfg.weight * x[j];
    const int reward = unit(rng) < std::clamp(mean, 0.0, 1.0) ? 1 : 0;
    log.push_back(action, reward, x);
  }
  return log;
}

// ---------------------------------------------------------------------------
// Taste-group population for the cold-start simulation

struct PlantedPopulationConfig {
  std::size_t train_users = 200;
  std::size_t items = 100;
  std::vector<double> group_share{0.5, 0.3, 0.2};
  double density = 0.3;       // observed fraction of training ratings
  double liked_shift = 1.5;   // added when the item's genre is the group's
  double other_shift = -1.0;  // added otherwise
  double quality_range = 0.5; // item quality ~ U(-range, range)
  double user_sd = 0.2;
  double noise_sd = 0.3;
  double base = 3.0;
  double rating_min = 0.5;
  double rating_max = 5.0;
};

struct PlantedPopulation {
  RatingMatrix train;
  std::vector<std::size_t> train_group;
  std::vector<ColdUserEnvironment> cold;  // fully rated new users
  std::vector<std::size_t> cold_group;
  std::vector<std::size_t> item_genre;
};

/// Users belong to one of several taste groups; each item has a genre and a
/// quality. Training users expose a random subset of their ratings, cold
/// users keep their whole row hidden inside an environment.
inline PlantedPopulation planted_population(const PlantedPopulationConfig& cfg, std::size_t cold_users,
                                            std::uint64_t seed) {
  const std::size_t groups = cfg.group_share.size();
  if (groups == 0) throw InputError("planted population needs at least one group");
  Rng rng = make_rng(seed, "planted-population");
  std::uniform_real_distribution<double> quality(-cfg.quality_range, cfg.quality_range);
  std::normal_distribution<double> user_shift(0.0, cfg.user_sd), noise(0.0, cfg.noise_sd);
  std::discrete_distribution<std::size_t> group_of(cfg.group_share.begin(), cfg.group_share.end());
  std::uniform_int_distribution<std::size_t> genre_of(0, groups - 1);
  std::bernoulli_distribution observed(cfg.density);

  PlantedPopulation pop;
  std::vector<double> item_quality(cfg.items);
  pop.item_genre.resize(cfg.items);
  for (std::size_t i = 0; i < cfg.items; ++i) {
    pop.item_genre[i] = genre_of(rng);
    item_quality[i] = quality(rng);
  }
  auto row = [&](std::size_t g) {
    const double shift = user_shift(rng);
    std::vector<double> r(cfg.items);
    for (std::size_t i = 0; i < cfg.items; ++i) {
      const double taste = pop.item_genre[i] == g ? cfg.liked_shift : cfg.other_shift;
      r[i] = std::clamp(cfg.base + taste + item_quality[i] + shift + noise(rng), cfg.rating_min, cfg.rating_max);
    }
    return r;
  };

  std::vector<Rating> entries;
  for (std::size_t u = 0; u < cfg.train_users; ++u) {
    const std::size_t g = group_of(rng);
    pop.train_group.push_back(g);
    const auto r = row(g);
    for (std::size_t i = 0; i < cfg.items; ++i)
      if (observed(rng)) entries.push_back({u, i, r[i]});
  }
  pop.train = RatingMatrix(cfg.train_users, cfg.items, std::move(entries), cfg.rating_max);

  for (std::size_t u = 0; u < cold_users; ++u) {
    const std::size_t g = group_of(rng);
    pop.cold_group.push_back(g);
    const auto r = row(g);
    std::vector<std::optional<double>> full(r.begin(), r.end());
    pop.cold.emplace_back(std::move(full), cfg.rating_max, "cold-" + std::to_string(u));
  }
  return pop;
}

// ---------------------------------------------------------------------------
// One seeded replicate of the cold-start study on a planted population

struct PlantedTrialConfig {
  PlantedPopulationConfig population;
  std::size_t users = 50;  // cold users per replicate
  OfflineConfig offline;
  SessionConfig session;

  PlantedTrialConfig() {
    offline.sgd.learning_rate = 0.01;
    offline.sgd.iterations = 200;
  }
};

struct PlantedTrial {
  PlantedPopulation population;
  OfflineModel offline;
  std::vector<SimulationOutcome> outcomes;  // one per policy, in request order
};

/// Draws a population, fits the offline model on its training users and runs
/// every requested policy over the same cold users.
inline PlantedTrial planted_trial(const PlantedTrialConfig& cfg, std::span<const PolicyKind> policies,
                                  std::uint64_t seed) {
  PlantedTrial trial;
  trial.population = planted_population(cfg.population, cfg.users, derive_seed(seed, "trial-population"));
  OfflineConfig oc = cfg.offline;
  oc.seed = derive_seed(seed, "trial-offline");
  trial.offline = offline_fit(trial.population.train, oc);
  for (PolicyKind kind : policies) {
    SessionConfig sc = cfg.session;
    sc.policy.kind = kind;
    trial.outcomes.push_back(
        simulate_policy(trial.offline, trial.population.cold, sc, derive_seed(seed, "trial-online")));
  }
  return trial;
}

}  // namespace banditmf
