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
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <thread>
#include <vector>

#include "banditmf/common.hpp"

namespace banditmf {

struct KMeansConfig {
  std::size_t clusters = 3;
  std::size_t n_init = 20;
  std::size_t max_iter = 300;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0: hardware concurrency
};

/// Result of one Lloyd run from a single initialization.
struct KMeansRun {
  std::vector<std::size_t> assignment;
  Eigen::MatrixXd centroids;
  double inertia = 0.0;
  std::vector<double> history;  // inertia after every iteration
};

/// Best-of-n_init partition. Labels are canonical: clusters are numbered by
/// size descending, ties broken by the smallest member row index, so the
/// labelling does not depend on which restart won.
struct ClusterModel {
  std::size_t k = 0;
  std::vector<std::size_t> assignment;
  Eigen::MatrixXd centroids;  // k x n, the unified preference vectors
  double inertia = 0.0;
  std::size_t best_restart = 0;
  std::vector<double> restart_inertia;
  std::vector<std::vector<double>> restart_history;

  std::vector<std::size_t> members(std::size_t c) const {
    std::vector<std::size_t> out;
    for (std::size_t u = 0; u < assignment.size(); ++u)
      if (assignment[u] == c) out.push_back(u);
    return out;
  }
};

/// Row c = arithmetic mean of the rows assigned to c (sum in row order, then
/// one division). Empty clusters get a zero row.
inline Eigen::MatrixXd cluster_means(const Eigen::MatrixXd& rows,
                                     const std::vector<std::size_t>& assignment, std::size_t k) {
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), rows.cols());
  std::vector<std::size_t> count(k, 0);
  for (std::size_t u = 0; u < assignment.size(); ++u) {
    means.row(static_cast<Eigen::Index>(assignment[u])) += rows.row(static_cast<Eigen::Index>(u));
    ++count[assignment[u]];
  }
  for (std::size_t c = 0; c < k; ++c)
    if (count[c] > 0) means.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(count[c]);
  return means;
}

inline double partition_inertia(const Eigen::MatrixXd& rows, const std::vector<std::size_t>& assignment,
                                const Eigen::MatrixXd& centroids) {
  double total = 0.0;
  for (std::size_t u = 0; u < assignment.size(); ++u)
    total += (rows.row(static_cast<Eigen::Index>(u)) -
              centroids.row(static_cast<Eigen::Index>(assignment[u])))
                 .squaredNorm();
  return total;
}

namespace detail {

inline KMeansRun lloyd(const Eigen::MatrixXd& rows, std::size_t k, std::size_t max_iter, Rng rng) {
  const std::size_t m = static_cast<std::size_t>(rows.rows());

  // k distinct rows, partial Fisher-Yates.
  std::vector<std::size_t> pick(m);
  std::iota(pick.begin(), pick.end(), std::size_t{0});
  for (std::size_t c = 0; c < k; ++c) {
    std::uniform_int_distribution<std::size_t> d(c, m - 1);
    std::swap(pick[c], pick[d(rng)]);
  }
  Eigen::MatrixXd centroids(static_cast<Eigen::Index>(k), rows.cols());
  for (std::size_t c = 0; c < k; ++c)
    centroids.row(static_cast<Eigen::Index>(c)) = rows.row(static_cast<Eigen::Index>(pick[c]));

  KMeansRun run;
  std::vector<std::size_t> assignment(m, 0), previous;
  std::vector<double> dist(m, 0.0);
  std::vector<std::size_t> count(k, 0);
  for (std::size_t iter = 0; iter < std::max<std::size_t>(max_iter, 1); ++iter) {
    std::fill(count.begin(), count.end(), 0);
    for (std::size_t u = 0; u < m; ++u) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double d = (rows.row(static_cast<Eigen::Index>(u)) -
                          centroids.row(static_cast<Eigen::Index>(c)))
                             .squaredNorm();
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      assignment[u] = arg;
      dist[u] = best;
      ++count[arg];
    }
    // Empty cluster: take the point farthest from its centroid among
    // clusters that can spare one.
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] > 0) continue;
      std::size_t far = m;
      for (std::size_t u = 0; u < m; ++u)
        if (count[assignment[u]] > 1 && (far == m || dist[u] > dist[far])) far = u;
      --count[assignment[far]];
      assignment[far] = c;
      dist[far] = 0.0;
      ++count[c];
    }
    centroids = cluster_means(rows, assignment, k);
    run.history.push_back(partition_inertia(rows, assignment, centroids));
    if (assignment == previous) break;
    previous = assignment;
  }
  run.assignment = std::move(assignment);
  run.centroids = std::move(centroids);
  run.inertia = run.history.back();
  return run;
}

}  // namespace detail

/// Lloyd's algorithm with random distinct-row initialization, keeping the
/// restart with minimal inertia (ties: lowest restart index).
inline ClusterModel kmeans(const Eigen::MatrixXd& rows, const KMeansConfig& cfg) {
  const std::size_t m = static_cast<std::size_t>(rows.rows());
  if (cfg.clusters < 1) throw InputError("kmeans: need at least one cluster");
  if (cfg.clusters > m)
    throw InputError(detail::concat("kmeans: ", cfg.clusters, " clusters requested for ", m, " rows"));
  const std::size_t restarts = std::max<std::size_t>(cfg.n_init, 1);

  std::vector<KMeansRun> runs(restarts);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < restarts; r = next++)
      runs[r] = detail::lloyd(rows, cfg.clusters, cfg.max_iter, make_rng(cfg.seed, "kmeans-restart", r));
  };
  std::size_t threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, restarts);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ClusterModel model;
  model.k = cfg.clusters;
  for (std::size_t r = 0; r < restarts; ++r) {
    model.restart_inertia.push_back(runs[r].inertia);
    model.restart_history.push_back(runs[r].history);
    if (runs[r].inertia < runs[model.best_restart].inertia) model.best_restart = r;
  }
  const KMeansRun& best = runs[model.best_restart];

  // Canonical labels.
  std::vector<std::size_t> size(cfg.clusters, 0), first(cfg.clusters, m);
  for (std::size_t u = 0; u < m; ++u) {
    ++size[best.assignment[u]];
    first[best.assignment[u]] = std::min(first[best.assignment[u]], u);
  }
  std::vector<std::size_t> order(cfg.clusters);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return size[a] != size[b] ? size[a] > size[b] : first[a] < first[b];
  });
  std::vector<std::size_t> relabel(cfg.clusters);
  for (std::size_t c = 0; c < cfg.clusters; ++c) relabel[order[c]] = c;
  model.assignment.resize(m);
  for (std::size_t u = 0; u < m; ++u) model.assignment[u] = relabel[best.assignment[u]];
  model.centroids = cluster_means(rows, model.assignment, cfg.clusters);
  model.inertia = best.inertia;
  return model;
}

/// The clustered prediction matrix: one unified preference vector per cluster.
inline Eigen::MatrixXd unified_ratings(const ClusterModel& cluster) { return cluster.centroids; }

}  // namespace banditmf
