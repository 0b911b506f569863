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
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "banditmf/common.hpp"
#include "banditmf/dataset.hpp"

namespace banditmf {

enum class MfVariant { Base, Bias };

inline const char* to_string(MfVariant v) { return v == MfVariant::Base ? "base" : "bias"; }

inline MfVariant parse_variant(const std::string& s) {
  if (s == "base") return MfVariant::Base;
  if (s == "bias") return MfVariant::Bias;
  throw InputError("unknown MF variant '" + s + "' (expected base or bias)");
}

/// Learned factors. Rows of `user_factors` are p_u, rows of `item_factors`
/// are q_i. Bias fields are empty for the base variant.
struct LatentModel {
  MfVariant variant = MfVariant::Base;
  Eigen::MatrixXd user_factors;  // m x k
  Eigen::MatrixXd item_factors;  // n x k
  double global_mean = 0.0;
  Eigen::VectorXd user_bias;
  Eigen::VectorXd item_bias;

  std::size_t num_users() const { return static_cast<std::size_t>(user_factors.rows()); }
  std::size_t num_items() const { return static_cast<std::size_t>(item_factors.rows()); }
  std::size_t rank() const { return static_cast<std::size_t>(user_factors.cols()); }

  /// mu + b_u + b_i, zero for the base variant.
  double baseline(std::size_t u, std::size_t i) const {
    if (variant == MfVariant::Base) return 0.0;
    return global_mean + user_bias[static_cast<Eigen::Index>(u)] +
           item_bias[static_cast<Eigen::Index>(i)];
  }
};

struct SgdConfig {
  std::size_t k = 2;
  double learning_rate = 0.001;
  double regularization = 0.1;
  std::size_t iterations = 1000;  // epochs over the observed pairs
  std::uint64_t seed = 0;
  double init_scale = 0.1;

  void validate() const {
    if (k < 1) throw InputError("latent dimension k must be >= 1");
    if (!(learning_rate > 0.0)) throw InputError("learning rate must be > 0");
    if (!(regularization >= 0.0)) throw InputError("regularization must be >= 0");
    if (iterations < 1) throw InputError("iterations must be >= 1");
    if (!(init_scale >= 0.0)) throw InputError("init_scale must be >= 0");
  }
};

/// Divergence guard on the per-epoch objective.
inline constexpr double kDivergenceLimit = 1e12;

inline double predict(const LatentModel& model, std::size_t u, std::size_t i) {
  if (u >= model.num_users() || i >= model.num_items())
    throw InputError(detail::concat("predict index (", u, ",", i, ") out of range"));
  const auto ui = static_cast<Eigen::Index>(u);
  const auto ii = static_cast<Eigen::Index>(i);
  return model.baseline(u, i) + model.item_factors.row(ii).dot(model.user_factors.row(ui));
}

/// Full m x n prediction matrix R-hat.
inline Eigen::MatrixXd predict_full(const LatentModel& model) {
  Eigen::MatrixXd full = model.user_factors * model.item_factors.transpose();
  if (model.variant == MfVariant::Bias) {
    full.array() += model.global_mean;
    full.colwise() += model.user_bias;
    full.rowwise() += model.item_bias.transpose();
  }
  return full;
}

/// Training objective in its literal per-variant form.
///   base: sum_K e^2 + lambda (|q_i| + |p_u|)^2
///   bias: sum_K e^2 + lambda (|q_i|^2 + |p_u|^2 + b_u^2 + b_i^2)
/// Regularizers are accumulated per observed pair.
inline double loss(const LatentModel& model, const RatingMatrix& data, double lambda) {
  double total = 0.0;
  for (const Rating& r : data.entries()) {
    const auto u = static_cast<Eigen::Index>(r.user);
    const auto i = static_cast<Eigen::Index>(r.item);
    const double e = r.value - predict(model, r.user, r.item);
    double reg = 0.0;
    if (model.variant == MfVariant::Base) {
      const double s = model.item_factors.row(i).norm() + model.user_factors.row(u).norm();
      reg = s * s;
    } else {
      const double bu = model.user_bias[u];
      const double bi = model.item_bias[i];
      reg = model.item_factors.row(i).squaredNorm() + model.user_factors.row(u).squaredNorm() +
            bu * bu + bi * bi;
    }
    total += e * e + lambda * reg;
  }
  return total;
}

inline double mse(const LatentModel& model, const RatingMatrix& heldout) {
  if (heldout.empty()) throw InputError("mse over empty heldout set");
  double s = 0.0;
  for (const Rating& r : heldout.entries()) {
    const double e = r.value - predict(model, r.user, r.item);
    s += e * e;
  }
  return s / static_cast<double>(heldout.size());
}

/// Ascent direction of one SGD step for the observed pair (u, i, r).
/// The step applied is `param += learning_rate * direction`, i.e. the
/// direction is minus the gradient of
///   0.5 e^2 + 0.5 lambda (|q_i|^2 + |p_u|^2 [+ b_u^2 + b_i^2]).
struct StepDirection {
  Eigen::VectorXd item;  // for q_i
  Eigen::VectorXd user;  // for p_u
  double user_bias = 0.0;
  double item_bias = 0.0;
};

inline StepDirection step_direction(const LatentModel& model, std::size_t u, std::size_t i,
                                    double rating, double lambda) {
  const auto ui = static_cast<Eigen::Index>(u);
  const auto ii = static_cast<Eigen::Index>(i);
  const double e = rating - predict(model, u, i);
  StepDirection d;
  d.item = e * model.user_factors.row(ui).transpose() - lambda * model.item_factors.row(ii).transpose();
  d.user = e * model.item_factors.row(ii).transpose() - lambda * model.user_factors.row(ui).transpose();
  if (model.variant == MfVariant::Bias) {
    d.user_bias = e - lambda * model.user_bias[ui];
    d.item_bias = e - lambda * model.item_bias[ii];
  }
  return d;
}

/// The per-pair objective whose negative gradient `step_direction` returns.
inline double pair_objective(const LatentModel& model, std::size_t u, std::size_t i, double rating,
                             double lambda) {
  const auto ui = static_cast<Eigen::Index>(u);
  const auto ii = static_cast<Eigen::Index>(i);
  const double e = rating - predict(model, u, i);
  double reg = model.item_factors.row(ii).squaredNorm() + model.user_factors.row(ui).squaredNorm();
  if (model.variant == MfVariant::Bias)
    reg += model.user_bias[ui] * model.user_bias[ui] + model.item_bias[ii] * model.item_bias[ii];
  return 0.5 * e * e + 0.5 * lambda * reg;
}

namespace detail {

inline LatentModel init_model(MfVariant variant, const RatingMatrix& train, const SgdConfig& cfg) {
  LatentModel model;
  model.variant = variant;
  const auto m = static_cast<Eigen::Index>(train.num_users());
  const auto n = static_cast<Eigen::Index>(train.num_items());
  const auto k = static_cast<Eigen::Index>(cfg.k);
  model.user_factors = Eigen::MatrixXd::Zero(m, k);
  model.item_factors = Eigen::MatrixXd::Zero(n, k);
  if (cfg.init_scale > 0.0) {
    Rng rng = make_rng(cfg.seed, "sgd-init");
    std::uniform_real_distribution<double> dist(-cfg.init_scale, cfg.init_scale);
    for (Eigen::Index u = 0; u < m; ++u)
      for (Eigen::Index f = 0; f < k; ++f) model.user_factors(u, f) = dist(rng);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index f = 0; f < k; ++f) model.item_factors(i, f) = dist(rng);
  }
  if (variant == MfVariant::Bias) {
    model.global_mean = train.mean_rating();
    model.user_bias = Eigen::VectorXd::Zero(m);
    model.item_bias = Eigen::VectorXd::Zero(n);
  }
  return model;
}

inline void sgd_step(LatentModel& model, const Rating& r, double eta, double lambda,
                     Eigen::VectorXd& q_old) {
  const auto u = static_cast<Eigen::Index>(r.user);
  const auto i = static_cast<Eigen::Index>(r.item);
  const double e = r.value - model.baseline(r.user, r.item) -
                   model.item_factors.row(i).dot(model.user_factors.row(u));
  q_old = model.item_factors.row(i).transpose();
  model.item_factors.row(i) += eta * (e * model.user_factors.row(u) - lambda * model.item_factors.row(i));
  model.user_factors.row(u) += eta * (e * q_old.transpose() - lambda * model.user_factors.row(u));
  if (model.variant == MfVariant::Bias) {
    model.user_bias[u] += eta * (e - lambda * model.user_bias[u]);
    model.item_bias[i] += eta * (e - lambda * model.item_bias[i]);
  }
}

inline LatentModel train(MfVariant variant, const RatingMatrix& train, const SgdConfig& cfg,
                         std::vector<double>* loss_history) {
  if (train.empty()) throw InputError("cannot train on an empty rating matrix");
  cfg.validate();
  LatentModel model = init_model(variant, train, cfg);
  Rng order_rng = make_rng(cfg.seed, "sgd-order");
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Eigen::VectorXd q_old(static_cast<Eigen::Index>(cfg.k));
  const auto entries = train.entries();
  if (loss_history) loss_history->clear();

  for (std::size_t epoch = 1; epoch <= cfg.iterations; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    for (std::size_t idx : order)
      sgd_step(model, entries[idx], cfg.learning_rate, cfg.regularization, q_old);
    const double l = loss(model, train, cfg.regularization);
    if (!std::isfinite(l) || l > kDivergenceLimit)
      throw ComputeError(concat("SGD diverged at epoch ", epoch, " (loss ", l, ")"));
    if (loss_history) loss_history->push_back(l);
  }
  return model;
}

}  // namespace detail

/// Plain latent factor model: r-hat = q_i . p_u.
inline LatentModel train_base(const RatingMatrix& train, const SgdConfig& cfg,
                              std::vector<double>* loss_history = nullptr) {
  return detail::train(MfVariant::Base, train, cfg, loss_history);
}

/// Biased model: r-hat = mu + b_u + b_i + q_i . p_u, with mu frozen at the
/// training mean.
inline LatentModel train_bias(const RatingMatrix& train, const SgdConfig& cfg,
                              std::vector<double>* loss_history = nullptr) {
  return detail::train(MfVariant::Bias, train, cfg, loss_history);
}

inline LatentModel train_model(MfVariant variant, const RatingMatrix& train, const SgdConfig& cfg,
                               std::vector<double>* loss_history = nullptr) {
  return detail::train(variant, train, cfg, loss_history);
}

/// Trains on a seeded random split and reports MSE on the held-out part.
inline double holdout_mse(const RatingMatrix& data, MfVariant variant, const SgdConfig& cfg, double fraction,
                          std::uint64_t split_seed) {
  HoldoutSplit split = split_holdout(data, fraction, split_seed);
  return mse(train_model(variant, split.train, cfg), split.test);
}

// ---------------------------------------------------------------------------
// Serialization
//
//   banditmf-latent-model 1
//   <variant> <m> <n> <k> <mu>
//   <b_user values>        (empty line for base)
//   <b_item values>        (empty line for base)
//   m lines of p_u
//   n lines of q_i

inline void save_model(const LatentModel& model, std::ostream& out) {
  out << "banditmf-latent-model 1\n";
  out << to_string(model.variant) << ' ' << model.num_users() << ' ' << model.num_items() << ' '
      << model.rank() << ' ' << text::format_double(model.global_mean) << '\n';
  auto write_vec = [&](const Eigen::VectorXd& v) {
    for (Eigen::Index j = 0; j < v.size(); ++j) out << (j ? " " : "") << text::format_double(v[j]);
    out << '\n';
  };
  auto write_rows = [&](const Eigen::MatrixXd& mat) {
    for (Eigen::Index r = 0; r < mat.rows(); ++r) write_vec(mat.row(r).transpose());
  };
  if (model.variant == MfVariant::Bias) {
    write_vec(model.user_bias);
    write_vec(model.item_bias);
  } else {
    out << "\n\n";
  }
  write_rows(model.user_factors);
  write_rows(model.item_factors);
}

inline LatentModel load_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != "banditmf-latent-model 1")
    throw InputError("not a banditmf latent model (bad header)");
  if (!std::getline(in, line)) throw InputError("truncated model header");
  std::istringstream hs(line);
  std::string variant;
  std::size_t m = 0, n = 0, k = 0;
  std::string mu;
  if (!(hs >> variant >> m >> n >> k >> mu)) throw InputError("malformed model header");
  LatentModel model;
  model.variant = parse_variant(variant);
  auto read_vec = [&](std::size_t expected) {
    if (!std::getline(in, line)) throw InputError("truncated model file");
    auto tokens = text::split_numeric(line);
    if (tokens.size() != expected) throw InputError("model vector has wrong length");
    Eigen::VectorXd v(static_cast<Eigen::Index>(expected));
    for (std::size_t j = 0; j < expected; ++j) {
      auto x = text::parse_double(tokens[j]);
      if (!x) throw InputError("non-numeric model value");
      v[static_cast<Eigen::Index>(j)] = *x;
    }
    return v;
  };
  auto mu_v = text::parse_double(mu);
  if (!mu_v) throw InputError("non-numeric mu");
  if (model.variant == MfVariant::Bias) {
    model.global_mean = *mu_v;
    model.user_bias = read_vec(m);
    model.item_bias = read_vec(n);
  } else {
    read_vec(0);
    read_vec(0);
  }
  model.user_factors.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
  model.item_factors.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (std::size_t u = 0; u < m; ++u) model.user_factors.row(static_cast<Eigen::Index>(u)) = read_vec(k);
  for (std::size_t i = 0; i < n; ++i) model.item_factors.row(static_cast<Eigen::Index>(i)) = read_vec(k);
  return model;
}

}  // namespace banditmf
