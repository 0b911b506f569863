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
#include <map>
#include <span>
#include <vector>

#include "banditmf/common.hpp"
#include "banditmf/dataset.hpp"
#include "banditmf/mf.hpp"

namespace banditmf {

/// Pearson correlation over a co-rated set; both means are taken over the
/// same set. A constant argument yields 0.
inline double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("pearson: vectors differ in length");
  if (a.size() < 2) throw ComputeError("pearson: similarity undefined for fewer than 2 co-rated items");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) {
    ma += a[p];
    mb += b[p];
  }
  ma /= n;
  mb /= n;
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) {
    const double x = a[p] - ma;
    const double y = b[p] - mb;
    num += x * y;
    da += x * x;
    db += y * y;
  }
  if (da == 0.0 || db == 0.0) return 0.0;
  return num / (std::sqrt(da) * std::sqrt(db));
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("cosine: vectors differ in length");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    dot += a[j] * b[j];
    na += a[j] * a[j];
    nb += b[j] * b[j];
  }
  if (na == 0.0 || nb == 0.0) throw ComputeError("cosine: zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

struct SimilarUser {
  std::size_t user = 0;
  std::size_t overlap = 0;
};

struct SimilarityScore {
  std::size_t other_user = 0;
  std::size_t overlap = 0;
  double value = 0.0;
};

struct Recommendation {
  std::size_t item = 0;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based
};

namespace detail {

/// Sort by score descending, ties by ascending item, then assign ranks.
inline void rank_recommendations(std::vector<Recommendation>& recs, std::size_t top_n) {
  std::sort(recs.begin(), recs.end(), [](const Recommendation& a, const Recommendation& b) {
    return a.score != b.score ? a.score > b.score : a.item < b.item;
  });
  if (recs.size() > top_n) recs.resize(top_n);
  for (std::size_t k = 0; k < recs.size(); ++k) recs[k].rank = k + 1;
}

inline bool target_has(const ResolvedTarget& target, std::size_t item) {
  auto it = std::lower_bound(target.begin(), target.end(), std::make_pair(item, -HUGE_VAL));
  return it != target.end() && it->first == item;
}

}  // namespace detail

/// Users sharing at least one rated item with the target, by overlap count
/// descending (ties: ascending user index), truncated to `top_groups`.
inline std::vector<SimilarUser> find_similar_users(const RatingMatrix& matrix,
                                                   const ResolvedTarget& target,
                                                   std::size_t top_groups) {
  if (top_groups < 1) throw InputError("top_groups must be >= 1");
  std::vector<std::size_t> overlap(matrix.num_users(), 0);
  for (const Rating& r : matrix.entries())
    if (detail::target_has(target, r.item)) ++overlap[r.user];
  std::vector<SimilarUser> out;
  for (std::size_t u = 0; u < overlap.size(); ++u)
    if (overlap[u] > 0) out.push_back({u, overlap[u]});
  std::stable_sort(out.begin(), out.end(),
                   [](const SimilarUser& a, const SimilarUser& b) { return a.overlap > b.overlap; });
  if (out.size() > top_groups) out.resize(top_groups);
  return out;
}

/// Pearson similarity of each candidate to the target over their co-rated
/// items. Candidates with fewer than two co-rated items are dropped.
inline std::vector<SimilarityScore> similarity_scores(const RatingMatrix& matrix,
                                                      const ResolvedTarget& target,
                                                      std::span<const SimilarUser> candidates) {
  std::vector<SimilarityScore> out;
  std::vector<double> mine, theirs;
  for (const SimilarUser& c : candidates) {
    mine.clear();
    theirs.clear();
    auto items = matrix.items_of(c.user);
    auto values = matrix.values_of(c.user);
    for (const auto& [item, rating] : target) {
      auto it = std::lower_bound(items.begin(), items.end(), item);
      if (it != items.end() && *it == item) {
        mine.push_back(rating);
        theirs.push_back(values[static_cast<std::size_t>(it - items.begin())]);
      }
    }
    if (mine.size() < 2) continue;
    out.push_back({c.user, mine.size(), pearson(theirs, mine)});
  }
  return out;
}

/// Weighted-average score per item: sum(sim * rating) / sum(sim) over the
/// similar users who rated it. Items the target rated and items whose
/// similarity sum is exactly zero are left out.
inline std::vector<Recommendation> weighted_scores(const RatingMatrix& matrix,
                                                   std::span<const SimilarityScore> sims,
                                                   const ResolvedTarget& target) {
  std::map<std::size_t, std::pair<double, double>> acc;  // item -> (sum weighted, sum sim)
  for (const SimilarityScore& s : sims) {
    auto items = matrix.items_of(s.other_user);
    auto values = matrix.values_of(s.other_user);
    for (std::size_t k = 0; k < items.size(); ++k) {
      if (detail::target_has(target, items[k])) continue;
      auto& [weighted, total] = acc[items[k]];
      weighted += s.value * values[k];
      total += s.value;
    }
  }
  std::vector<Recommendation> out;
  for (const auto& [item, sums] : acc)
    if (sums.second != 0.0) out.push_back({item, sums.first / sums.second, 0});
  return out;
}

/// Memory-based user CF: candidate groups, Pearson weights, weighted-average
/// item scores, top_n unseen items.
inline std::vector<Recommendation> recommend_user_based(const RatingMatrix& matrix,
                                                        const ResolvedTarget& target,
                                                        std::size_t top_n,
                                                        std::size_t top_groups) {
  auto candidates = find_similar_users(matrix, target, top_groups);
  auto sims = similarity_scores(matrix, target, candidates);
  if (sims.empty()) throw ComputeError("insufficient overlap: no user shares 2+ rated items with the target");
  auto recs = weighted_scores(matrix, sims, target);
  detail::rank_recommendations(recs, top_n);
  return recs;
}

struct HybridResult {
  std::size_t seed_item = 0;
  std::vector<Recommendation> recommendations;
};

/// MF picks the best unrated item for the user; the remaining unrated items
/// are ranked by cosine similarity of their latent item vectors to it.
/// Items with an all-zero latent vector have no defined similarity and are
/// skipped.
inline HybridResult recommend_hybrid(const LatentModel& model, const RatingMatrix& train,
                                     std::size_t target_user, std::size_t top_n) {
  if (target_user >= train.num_users() || target_user >= model.num_users())
    throw InputError("hybrid: target user out of range");
  if (train.items_of(target_user).empty())
    throw InputError("hybrid: target user has no observed ratings");
  auto rated = train.items_of(target_user);
  std::vector<std::size_t> unrated;
  for (std::size_t i = 0; i < model.num_items(); ++i)
    if (!std::binary_search(rated.begin(), rated.end(), i)) unrated.push_back(i);
  if (unrated.empty()) throw InputError("hybrid: target user rated every item");

  std::size_t seed = unrated.front();
  double best = predict(model, target_user, seed);
  for (std::size_t i : unrated) {
    const double s = predict(model, target_user, i);
    if (s > best) {
      best = s;
      seed = i;
    }
  }

  const Eigen::Index k = model.item_factors.cols();
  const Eigen::VectorXd seed_vec = model.item_factors.row(static_cast<Eigen::Index>(seed)).transpose();
  if (seed_vec.squaredNorm() == 0.0) throw ComputeError("hybrid: seed item has a zero latent vector");
  std::vector<Recommendation> recs;
  Eigen::VectorXd v(k);
  for (std::size_t i : unrated) {
    if (i == seed) continue;
    v = model.item_factors.row(static_cast<Eigen::Index>(i)).transpose();
    if (v.squaredNorm() == 0.0) continue;
    recs.push_back({i, cosine({seed_vec.data(), seed_vec.size()}, {v.data(), v.size()}), 0});
  }
  detail::rank_recommendations(recs, top_n);
  return {seed, std::move(recs)};
}

}  // namespace banditmf
