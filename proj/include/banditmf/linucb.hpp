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

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "banditmf/common.hpp"
#include "banditmf/dataset.hpp"

namespace banditmf {

/// Exploration weight as a function of the round and the number of correct
/// predictions so far.
struct AlphaSchedule {
  enum class Kind { Constant, InverseSqrtT, Adaptive };

  Kind kind = Kind::Constant;
  double c = 1.0;
  double scale = 1.0;

  static AlphaSchedule constant(double c) { return {Kind::Constant, c, 1.0}; }
  static AlphaSchedule inverse_sqrt_t() { return {Kind::InverseSqrtT, 1.0, 1.0}; }
  /// c / (scale * correct); before the first correct prediction it stays at
  /// its cap c / scale.
  static AlphaSchedule adaptive(double c, double scale) { return {Kind::Adaptive, c, scale}; }

  double operator()(std::size_t t, std::size_t correct) const {
    switch (kind) {
      case Kind::Constant: return c;
      case Kind::InverseSqrtT: return 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(t, 1)));
      case Kind::Adaptive:
        return c / (scale * static_cast<double>(std::max<std::size_t>(correct, 1)));
    }
    return c;
  }

  /// `const:C`, `inv-sqrt-t`, or `adaptive:C,S`.
  static AlphaSchedule parse(const std::string& desc) {
    auto num = [&](std::string_view s) {
      auto v = text::parse_double(s);
      if (!v || *v < 0.0) throw InputError("bad alpha schedule '" + desc + "'");
      return *v;
    };
    if (desc == "inv-sqrt-t") return inverse_sqrt_t();
    if (desc.rfind("const:", 0) == 0) return constant(num(std::string_view(desc).substr(6)));
    if (desc.rfind("adaptive:", 0) == 0) {
      std::string_view rest = std::string_view(desc).substr(9);
      auto comma = rest.find(',');
      if (comma == std::string_view::npos) throw InputError("adaptive schedule needs C,S");
      const double s = num(rest.substr(comma + 1));
      if (s == 0.0) throw InputError("adaptive schedule scale must be > 0");
      return adaptive(num(rest.substr(0, comma)), s);
    }
    throw InputError("bad alpha schedule '" + desc + "'");
  }

  std::string describe() const {
    switch (kind) {
      case Kind::Constant: return "const:" + text::format_double(c);
      case Kind::InverseSqrtT: return "inv-sqrt-t";
      case Kind::Adaptive: return "adaptive:" + text::format_double(c) + "," + text::format_double(scale);
    }
    return "?";
  }
};

struct LinUcbSelection {
  std::size_t arm = 0;
  std::vector<double> ucb;  // p_{t,a} for every arm
};

/// LinUCB with disjoint linear models: one ridge regression (A_a, b_a) per
/// arm. A_a^{-1} is maintained by Sherman-Morrison rank-1 updates.
class LinUcb {
 public:
  LinUcb(std::size_t arms, std::size_t dim) : dim_(dim) {
    if (arms == 0) throw InputError("LinUCB needs at least one arm");
    const auto d = static_cast<Eigen::Index>(dim);
    for (std::size_t a = 0; a < arms; ++a) {
      design_.push_back(Eigen::MatrixXd::Identity(d, d));
      inverse_.push_back(Eigen::MatrixXd::Identity(d, d));
      response_.push_back(Eigen::VectorXd::Zero(d));
      theta_.push_back(Eigen::VectorXd::Zero(d));
    }
  }

  std::size_t arms() const { return design_.size(); }
  std::size_t dim() const { return dim_; }
  const Eigen::MatrixXd& design(std::size_t a) const { return design_.at(a); }
  const Eigen::MatrixXd& inverse(std::size_t a) const { return inverse_.at(a); }
  const Eigen::VectorXd& response(std::size_t a) const { return response_.at(a); }
  const Eigen::VectorXd& theta(std::size_t a) const { return theta_.at(a); }

  /// p_{t,a} = theta_a . x_a + alpha * sqrt(x_a' A_a^{-1} x_a).
  double ucb(std::size_t a, std::span<const double> x, double alpha) const {
    check_dim(x);
    Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
    const double var = v.dot(inverse_[a] * v);
    return theta_[a].dot(v) + alpha * std::sqrt(std::max(var, 0.0));
  }

  /// One context per arm.
  LinUcbSelection select(std::span<const std::span<const double>> contexts, double alpha) const {
    if (contexts.size() != arms()) throw InputError("LinUCB: need one context per arm");
    LinUcbSelection sel;
    sel.ucb.resize(arms());
    for (std::size_t a = 0; a < arms(); ++a) {
      sel.ucb[a] = ucb(a, contexts[a], alpha);
      if (sel.ucb[a] > sel.ucb[sel.arm]) sel.arm = a;
    }
    return sel;
  }

  /// One context shared by every arm.
  LinUcbSelection select_shared(std::span<const double> x, double alpha) const {
    check_dim(x);
    Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
    LinUcbSelection sel;
    sel.ucb.resize(arms());
    for (std::size_t a = 0; a < arms(); ++a) {
      const double var = v.dot(inverse_[a] * v);
      sel.ucb[a] = theta_[a].dot(v) + alpha * std::sqrt(std::max(var, 0.0));
      if (sel.ucb[a] > sel.ucb[sel.arm]) sel.arm = a;
    }
    return sel;
  }

  /// A_a += x x', b_a += r x.
  void update(std::size_t a, std::span<const double> x, double reward) {
    check_dim(x);
    if (a >= arms()) throw InputError("LinUCB: arm out of range");
    Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
    design_[a].noalias() += v * v.transpose();
    response_[a] += reward * v;
    const Eigen::VectorXd w = inverse_[a] * v;
    inverse_[a].noalias() -= (w * w.transpose()) / (1.0 + v.dot(w));
    theta_[a].noalias() = inverse_[a] * response_[a];
  }

  /// theta from a fresh solve of A_a theta = b_a.
  Eigen::VectorXd solve_theta(std::size_t a) const { return design_.at(a).ldlt().solve(response_.at(a)); }

 private:
  void check_dim(std::span<const double> x) const {
    if (x.size() != dim_)
      throw InputError(detail::concat("LinUCB: context dimension ", x.size(), " != ", dim_));
  }

  std::size_t dim_;
  std::vector<Eigen::MatrixXd> design_;
  std::vector<Eigen::MatrixXd> inverse_;
  std::vector<Eigen::VectorXd> response_;
  std::vector<Eigen::VectorXd> theta_;
};

// ---------------------------------------------------------------------------
// Replay evaluation

struct ReplayClock {
  std::size_t t = 1;  // 1-based row number
  std::size_t matches = 0;
  std::size_t correct = 0;
};

struct ReplayChoice {
  std::size_t arm = 0;
  std::vector<double> scores;  // optional per-arm scores (UCB values)
};

template <class P>
concept ReplayPolicy = requires(P p, std::span<const double> x, ReplayClock clock, std::size_t a, double r) {
  { p.choose(x, clock) } -> std::convertible_to<ReplayChoice>;
  p.learn(a, x, r);
};

/// LinUCB driven by an alpha schedule, one shared context per row.
class LinUcbReplayPolicy {
 public:
  LinUcbReplayPolicy(std::size_t arms, std::size_t dim, AlphaSchedule schedule)
      : model_(arms, dim), schedule_(schedule) {}

  ReplayChoice choose(std::span<const double> x, const ReplayClock& clock) const {
    auto sel = model_.select_shared(x, schedule_(clock.t, clock.correct));
    return {sel.arm, std::move(sel.ucb)};
  }
  void learn(std::size_t arm, std::span<const double> x, double reward) { model_.update(arm, x, reward); }
  const LinUcb& model() const { return model_; }

 private:
  LinUcb model_;
  AlphaSchedule schedule_;
};

class UniformRandomPolicy {
 public:
  UniformRandomPolicy(std::size_t arms, std::uint64_t seed) : arms_(arms), rng_(seed) {}
  ReplayChoice choose(std::span<const double>, const ReplayClock&) {
    std::uniform_int_distribution<std::size_t> d(0, arms_ - 1);
    return {d(rng_), {}};
  }
  void learn(std::size_t, std::span<const double>, double) {}

 private:
  std::size_t arms_;
  Rng rng_;
};

class FixedArmPolicy {
 public:
  explicit FixedArmPolicy(std::size_t arm) : arm_(arm) {}
  ReplayChoice choose(std::span<const double>, const ReplayClock&) const { return {arm_, {}}; }
  void learn(std::size_t, std::span<const double>, double) {}

 private:
  std::size_t arm_;
};

struct ReplayPoint {
  std::size_t round = 0;
  std::size_t matches = 0;
  std::size_t correct = 0;
  double ctr = std::numeric_limits<double>::quiet_NaN();  // NaN until the first match
};

struct ArmReplayStats {
  std::size_t predictions = 0;  // rows where the policy chose this arm
  std::size_t matches = 0;      // ... and the logged action agreed
  std::size_t correct = 0;      // ... and the logged reward was 1
  double score_sum = 0.0;       // sum of this arm's score over all rows
};

struct ReplayResult {
  std::vector<ReplayPoint> series;
  std::vector<ArmReplayStats> arms;
  std::size_t matches = 0;
  std::size_t correct = 0;

  /// correct / matches, empty while no row matched.
  std::optional<double> ctr() const {
    if (matches == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(matches);
  }
};

/// Replay estimate of click-through rate. Rows are visited in order; only
/// rows whose logged action equals the policy's choice count, and only those
/// rows are fed back to the policy. `action_base` is subtracted from logged
/// actions (1 for logs numbering arms from 1).
template <ReplayPolicy P>
ReplayResult replay_ctr(const ReplayLog& log, P& policy, std::size_t arms, std::size_t action_base = 0) {
  ReplayResult res;
  res.arms.resize(arms);
  res.series.reserve(log.size());
  ReplayClock clock;
  for (std::size_t row = 0; row < log.size(); ++row) {
    if (log.action(row) < action_base || log.action(row) - action_base >= arms)
      throw InputError(detail::concat("logged action ", log.action(row), " at row ", row + 1,
                                      " outside [", action_base, ", ", action_base + arms, ")"));
    const std::size_t logged = log.action(row) - action_base;
    const auto x = log.context(row);
    clock.t = row + 1;
    ReplayChoice choice = policy.choose(x, clock);
    if (choice.arm >= arms) throw InputError("policy chose an arm out of range");
    ArmReplayStats& st = res.arms[choice.arm];
    ++st.predictions;
    for (std::size_t a = 0; a < choice.scores.size() && a < arms; ++a) res.arms[a].score_sum += choice.scores[a];
    if (choice.arm == logged) {
      const int y = log.reward(row);
      ++clock.matches;
      clock.correct += static_cast<std::size_t>(y);
      ++st.matches;
      st.correct += static_cast<std::size_t>(y);
      policy.learn(logged, x, static_cast<double>(y));
    }
    ReplayPoint pt;
    pt.round = row + 1;
    pt.matches = clock.matches;
    pt.correct = clock.correct;
    if (clock.matches > 0) pt.ctr = static_cast<double>(clock.correct) / static_cast<double>(clock.matches);
    res.series.push_back(pt);
  }
  res.matches = clock.matches;
  res.correct = clock.correct;
  return res;
}

}  // namespace banditmf
