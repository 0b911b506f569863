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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "banditmf/common.hpp"

namespace banditmf {

struct Rating {
  std::size_t user = 0;
  std::size_t item = 0;
  double value = 0.0;
};

/// Sparse user-item matrix of observed ratings.
///
/// Entries keep their construction order; a per-user index sorted by item is
/// built alongside for lookups. External id labels are optional and, when
/// present, map dense indices back to the ids found in the source file.
class RatingMatrix {
 public:
  RatingMatrix() = default;

  RatingMatrix(std::size_t num_users, std::size_t num_items, std::vector<Rating> entries,
               std::optional<double> rating_max = std::nullopt,
               std::vector<std::string> user_labels = {},
               std::vector<std::string> item_labels = {})
      : num_users_(num_users),
        num_items_(num_items),
        entries_(std::move(entries)),
        user_labels_(std::move(user_labels)),
        item_labels_(std::move(item_labels)) {
    if (!user_labels_.empty() && user_labels_.size() != num_users_)
      throw InputError("user label count does not match num_users");
    if (!item_labels_.empty() && item_labels_.size() != num_items_)
      throw InputError("item label count does not match num_items");

    double observed_max = 0.0;
    bool any = false;
    for (const Rating& r : entries_) {
      if (r.user >= num_users_ || r.item >= num_items_)
        throw InputError(detail::concat("rating (", r.user, ",", r.item,
                                        ") outside index space ", num_users_, "x", num_items_));
      if (!std::isfinite(r.value)) throw InputError("non-finite rating value");
      observed_max = any ? std::max(observed_max, r.value) : r.value;
      any = true;
    }
    if (rating_max) {
      rating_max_ = *rating_max;
      if (any && observed_max > rating_max_)
        throw InputError(detail::concat("rating ", observed_max, " exceeds rating_max ", rating_max_));
    } else {
      rating_max_ = any && observed_max > 0.0 ? observed_max : 1.0;
    }
    if (!(rating_max_ > 0.0)) throw InputError("rating_max must be positive");
    build_index();
  }

  std::size_t num_users() const { return num_users_; }
  std::size_t num_items() const { return num_items_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  double rating_max() const { return rating_max_; }
  std::span<const Rating> entries() const { return entries_; }

  /// Items rated by `user`, ascending by item index.
  std::span<const std::size_t> items_of(std::size_t user) const {
    return {row_items_.data() + row_offsets_[user], row_offsets_[user + 1] - row_offsets_[user]};
  }
  std::span<const double> values_of(std::size_t user) const {
    return {row_values_.data() + row_offsets_[user], row_offsets_[user + 1] - row_offsets_[user]};
  }

  std::optional<double> find(std::size_t user, std::size_t item) const {
    if (user >= num_users_) return std::nullopt;
    auto items = items_of(user);
    auto it = std::lower_bound(items.begin(), items.end(), item);
    if (it == items.end() || *it != item) return std::nullopt;
    return values_of(user)[static_cast<std::size_t>(it - items.begin())];
  }

  double mean_rating() const {
    if (entries_.empty()) throw InputError("mean of empty rating matrix");
    double s = 0.0;
    for (const Rating& r : entries_) s += r.value;
    return s / static_cast<double>(entries_.size());
  }

  std::string user_label(std::size_t user) const {
    return user_labels_.empty() ? std::to_string(user) : user_labels_.at(user);
  }
  std::string item_label(std::size_t item) const {
    return item_labels_.empty() ? std::to_string(item) : item_labels_.at(item);
  }
  const std::vector<std::string>& user_labels() const { return user_labels_; }
  const std::vector<std::string>& item_labels() const { return item_labels_; }

  std::optional<std::size_t> user_index(std::string_view label) const {
    return lookup(user_labels_, num_users_, label);
  }
  std::optional<std::size_t> item_index(std::string_view label) const {
    return lookup(item_labels_, num_items_, label);
  }

 private:
  static std::optional<std::size_t> lookup(const std::vector<std::string>& labels, std::size_t n,
                                           std::string_view label) {
    if (labels.empty()) {
      std::size_t v = 0;
      auto [p, ec] = std::from_chars(label.data(), label.data() + label.size(), v);
      if (ec != std::errc() || p != label.data() + label.size() || v >= n) return std::nullopt;
      return v;
    }
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) return std::nullopt;
    return static_cast<std::size_t>(it - labels.begin());
  }

  void build_index() {
    std::vector<std::size_t> order(entries_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const Rating& x = entries_[a];
      const Rating& y = entries_[b];
      return x.user != y.user ? x.user < y.user : x.item < y.item;
    });
    row_offsets_.assign(num_users_ + 1, 0);
    row_items_.resize(order.size());
    row_values_.resize(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
      const Rating& r = entries_[order[k]];
      if (k > 0) {
        const Rating& prev = entries_[order[k - 1]];
        if (prev.user == r.user && prev.item == r.item)
          throw InputError(detail::concat("duplicate rating for (", r.user, ",", r.item, ")"));
      }
      row_items_[k] = r.item;
      row_values_[k] = r.value;
      ++row_offsets_[r.user + 1];
    }
    for (std::size_t u = 0; u < num_users_; ++u) row_offsets_[u + 1] += row_offsets_[u];
  }

  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  std::vector<Rating> entries_;
  double rating_max_ = 1.0;
  std::vector<std::string> user_labels_;
  std::vector<std::string> item_labels_;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::size_t> row_items_;
  std::vector<double> row_values_;
};

// ---------------------------------------------------------------------------
// Text helpers

namespace text {

inline std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

/// Splits one CSV record. Double-quoted fields may contain commas; `""` is an
/// escaped quote.
inline std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(std::move(field));
  return out;
}

inline std::string quote_csv(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

/// Whitespace and/or comma separated tokens.
inline std::vector<std::string_view> split_numeric(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  auto is_sep = [](char c) { return c == ' ' || c == '\t' || c == ',' || c == '\r' || c == '\n'; };
  while (i < line.size()) {
    while (i < line.size() && is_sep(line[i])) ++i;
    std::size_t b = i;
    while (i < line.size() && !is_sep(line[i])) ++i;
    if (i > b) out.push_back(line.substr(b, i - b));
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::string format_double(double v) {
  std::ostringstream oss;
  oss << std::setprecision(17) << v;
  return oss.str();
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  return out;
}

}  // namespace text

// ---------------------------------------------------------------------------
// Ratings CSV

struct RatingsSchema {
  std::string user_column = "userId";
  std::string item_column = "movieId";
  std::string rating_column = "rating";
  std::optional<double> rating_max;
};

/// Reads `userId,movieId,rating[,timestamp]` records. Users and items are
/// densified in order of first appearance; duplicates are rejected.
inline RatingMatrix parse_ratings_csv(std::istream& in, const RatingsSchema& schema = {}) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw InputError("no ratings");
  ++line_no;
  auto header = text::split_csv(line);
  auto column = [&](const std::string& name) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (text::trim(header[c]) == name) return c;
    throw InputError("ratings header lacks column '" + name + "'");
  };
  const std::size_t uc = column(schema.user_column);
  const std::size_t ic = column(schema.item_column);
  const std::size_t rc = column(schema.rating_column);
  const std::size_t needed = std::max({uc, ic, rc}) + 1;

  std::unordered_map<std::string, std::size_t> users, items;
  std::vector<std::string> user_labels, item_labels;
  std::vector<Rating> entries;
  auto densify = [](auto& map, auto& labels, std::string key) {
    auto [it, inserted] = map.try_emplace(key, labels.size());
    if (inserted) labels.push_back(std::move(key));
    return it->second;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    auto fields = text::split_csv(line);
    if (fields.size() < needed)
      throw InputError(detail::concat("malformed ratings row ", line_no, ": expected at least ",
                                      needed, " fields"));
    std::string user(text::trim(fields[uc]));
    std::string item(text::trim(fields[ic]));
    auto value = text::parse_double(fields[rc]);
    if (user.empty() || item.empty() || !value || !std::isfinite(*value))
      throw InputError(detail::concat("malformed ratings row ", line_no));
    Rating r;
    r.user = densify(users, user_labels, std::move(user));
    r.item = densify(items, item_labels, std::move(item));
    r.value = *value;
    entries.push_back(r);
  }
  if (entries.empty()) throw InputError("no ratings");
  const std::size_t m = user_labels.size();
  const std::size_t n = item_labels.size();
  return RatingMatrix(m, n, std::move(entries), schema.rating_max, std::move(user_labels),
                      std::move(item_labels));
}

inline RatingMatrix load_ratings_csv(const std::string& path, const RatingsSchema& schema = {}) {
  auto in = text::open_input(path);
  return parse_ratings_csv(in, schema);
}

/// Writes entries in stored order using external labels.
inline void write_ratings_csv(const RatingMatrix& m, std::ostream& out) {
  out << "userId,movieId,rating\n";
  for (const Rating& r : m.entries())
    out << text::quote_csv(m.user_label(r.user)) << ',' << text::quote_csv(m.item_label(r.item))
        << ',' << text::format_double(r.value) << '\n';
}

/// Sidecar mapping `index,external_id` for users or items.
inline void write_id_map(const RatingMatrix& m, bool users, std::ostream& out) {
  out << "index,external_id\n";
  const std::size_t n = users ? m.num_users() : m.num_items();
  for (std::size_t k = 0; k < n; ++k)
    out << k << ',' << text::quote_csv(users ? m.user_label(k) : m.item_label(k)) << '\n';
}

// ---------------------------------------------------------------------------
// Dense grid

/// Whitespace/comma separated numeric grid. Zero cells are missing, not
/// ratings of zero.
inline RatingMatrix parse_dense_matrix(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  std::size_t rows = 0;
  std::vector<Rating> entries;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = text::split_numeric(line);
    if (tokens.empty()) continue;
    if (rows == 0) width = tokens.size();
    else if (tokens.size() != width)
      throw InputError(detail::concat("ragged dense matrix at line ", line_no, ": ", tokens.size(),
                                      " columns, expected ", width));
    for (std::size_t c = 0; c < tokens.size(); ++c) {
      auto v = text::parse_double(tokens[c]);
      if (!v || !std::isfinite(*v))
        throw InputError(detail::concat("non-numeric cell at line ", line_no, " column ", c + 1));
      if (*v != 0.0) entries.push_back({rows, c, *v});
    }
    ++rows;
  }
  return RatingMatrix(rows, width, std::move(entries));
}

inline RatingMatrix load_dense_matrix(const std::string& path) {
  auto in = text::open_input(path);
  return parse_dense_matrix(in);
}

inline void write_dense_matrix(const RatingMatrix& m, std::ostream& out) {
  for (std::size_t u = 0; u < m.num_users(); ++u) {
    for (std::size_t i = 0; i < m.num_items(); ++i) {
      if (i) out << ' ';
      out << text::format_double(m.find(u, i).value_or(0.0));
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Logged bandit feedback

/// One logged event per row: the action taken, its binary reward, and a
/// context vector shared by every arm.
class ReplayLog {
 public:
  ReplayLog() = default;

  void push_back(std::size_t action, int reward, std::span<const double> context) {
    if (reward != 0 && reward != 1)
      throw InputError(detail::concat("reward must be 0 or 1, got ", reward));
    if (actions_.empty()) dim_ = context.size();
    else if (context.size() != dim_)
      throw InputError(detail::concat("context dimension ", context.size(), " != ", dim_));
    actions_.push_back(action);
    rewards_.push_back(reward);
    contexts_.insert(contexts_.end(), context.begin(), context.end());
  }

  std::size_t size() const { return actions_.size(); }
  bool empty() const { return actions_.empty(); }
  std::size_t dim() const { return dim_; }
  std::size_t action(std::size_t t) const { return actions_[t]; }
  int reward(std::size_t t) const { return rewards_[t]; }
  std::span<const double> context(std::size_t t) const {
    return {contexts_.data() + t * dim_, dim_};
  }

 private:
  std::size_t dim_ = 0;
  std::vector<std::size_t> actions_;
  std::vector<int> rewards_;
  std::vector<double> contexts_;
};

inline ReplayLog parse_replay_log(std::istream& in) {
  ReplayLog log;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> ctx;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = text::split_numeric(line);
    if (tokens.empty()) continue;
    if (tokens.size() < 2)
      throw InputError(detail::concat("replay row ", line_no, " needs action and reward"));
    auto action = text::parse_double(tokens[0]);
    auto reward = text::parse_double(tokens[1]);
    if (!action || *action < 0 || std::floor(*action) != *action)
      throw InputError(detail::concat("replay row ", line_no, ": bad action"));
    if (!reward || (*reward != 0.0 && *reward != 1.0))
      throw InputError(detail::concat("replay row ", line_no, ": reward outside {0,1}"));
    ctx.clear();
    for (std::size_t c = 2; c < tokens.size(); ++c) {
      auto v = text::parse_double(tokens[c]);
      if (!v) throw InputError(detail::concat("replay row ", line_no, ": bad feature"));
      ctx.push_back(*v);
    }
    if (!log.empty() && ctx.size() != log.dim())
      throw InputError(detail::concat("replay row ", line_no, ": inconsistent width (", ctx.size(),
                                      " features, expected ", log.dim(), ")"));
    log.push_back(static_cast<std::size_t>(*action), static_cast<int>(*reward), ctx);
  }
  return log;
}

inline ReplayLog load_replay_log(const std::string& path) {
  auto in = text::open_input(path);
  return parse_replay_log(in);
}

inline void write_replay_log(const ReplayLog& log, std::ostream& out) {
  for (std::size_t t = 0; t < log.size(); ++t) {
    out << log.action(t) << ' ' << log.reward(t);
    for (double x : log.context(t)) out << ' ' << text::format_double(x);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Item catalog and target users

class ItemCatalog {
 public:
  struct Entry {
    std::string external_id;
    std::string title;
  };

  ItemCatalog() = default;
  explicit ItemCatalog(std::vector<Entry> entries) : entries_(std::move(entries)) {
    for (std::size_t k = 0; k < entries_.size(); ++k)
      if (!by_id_.try_emplace(entries_[k].external_id, k).second)
        throw InputError("duplicate catalog id " + entries_[k].external_id);
  }

  std::size_t size() const { return entries_.size(); }
  std::span<const Entry> entries() const { return entries_; }

  std::optional<std::string> title_of(const std::string& external_id) const {
    auto it = by_id_.find(external_id);
    if (it == by_id_.end()) return std::nullopt;
    return entries_[it->second].title;
  }

  /// Exact title match first, then a unique match ignoring a trailing
  /// " (YYYY)" year suffix.
  std::optional<std::string> id_of_title(std::string_view title) const {
    for (const Entry& e : entries_)
      if (e.title == title) return e.external_id;
    std::optional<std::string> found;
    for (const Entry& e : entries_) {
      if (strip_year(e.title) == title) {
        if (found) throw InputError("ambiguous title '" + std::string(title) + "'");
        found = e.external_id;
      }
    }
    return found;
  }

  /// Every item of `m` must have a catalog entry.
  void check_covers(const RatingMatrix& m) const {
    for (std::size_t i = 0; i < m.num_items(); ++i)
      if (!by_id_.count(m.item_label(i)))
        throw InputError("item " + m.item_label(i) + " missing from catalog");
  }

 private:
  static std::string_view strip_year(std::string_view t) {
    t = text::trim(t);
    if (t.size() >= 7 && t.back() == ')' && t[t.size() - 6] == '(' && t[t.size() - 7] == ' ')
      return t.substr(0, t.size() - 7);
    return t;
  }

  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// `movieId,title[,...]` with a header line.
inline ItemCatalog parse_catalog_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty catalog");
  auto header = text::split_csv(line);
  std::size_t idc = header.size(), tc = header.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    auto h = text::trim(header[c]);
    if (h == "movieId" || h == "itemId" || h == "id") idc = c;
    if (h == "title") tc = c;
  }
  if (idc == header.size() || tc == header.size())
    throw InputError("catalog header needs id and title columns");
  std::vector<ItemCatalog::Entry> entries;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    auto f = text::split_csv(line);
    if (f.size() <= std::max(idc, tc))
      throw InputError(detail::concat("malformed catalog row ", line_no));
    entries.push_back({std::string(text::trim(f[idc])), std::string(text::trim(f[tc]))});
  }
  return ItemCatalog(std::move(entries));
}

inline ItemCatalog load_catalog_csv(const std::string& path) {
  auto in = text::open_input(path);
  return parse_catalog_csv(in);
}

struct TargetRating {
  std::string key;  // title or external item id
  double rating = 0.0;
};

using TargetUserInput = std::vector<TargetRating>;

/// `title,rating` (or `movieId,rating`) records with a header line.
inline TargetUserInput parse_target_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty target input");
  TargetUserInput out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    auto f = text::split_csv(line);
    if (f.size() < 2) throw InputError(detail::concat("malformed target row ", line_no));
    auto v = text::parse_double(f[1]);
    if (!v) throw InputError(detail::concat("malformed target rating at row ", line_no));
    out.push_back({std::string(text::trim(f[0])), *v});
  }
  return out;
}

/// Resolved target: (item index, rating), ascending by item index.
using ResolvedTarget = std::vector<std::pair<std::size_t, double>>;

inline ResolvedTarget resolve_target(const TargetUserInput& input, const RatingMatrix& m,
                                     const ItemCatalog* catalog = nullptr) {
  ResolvedTarget out;
  for (const TargetRating& t : input) {
    if (t.rating < 0.0 || t.rating > m.rating_max())
      throw InputError(detail::concat("target rating ", t.rating, " outside [0, ", m.rating_max(), "]"));
    std::optional<std::size_t> idx;
    if (catalog) {
      if (auto id = catalog->id_of_title(t.key)) idx = m.item_index(*id);
    }
    if (!idx) idx = m.item_index(t.key);
    if (!idx) throw InputError("target item '" + t.key + "' does not resolve");
    out.emplace_back(*idx, t.rating);
  }
  std::sort(out.begin(), out.end());
  for (std::size_t k = 1; k < out.size(); ++k)
    if (out[k].first == out[k - 1].first) throw InputError("target rates an item twice");
  return out;
}

// ---------------------------------------------------------------------------
// Holdout

struct HoldoutSplit {
  RatingMatrix train;
  RatingMatrix test;
};

/// Uniform random partition; test receives floor(fraction * n) entries.
/// Both sides keep the original index spaces and relative entry order.
inline HoldoutSplit split_holdout(const RatingMatrix& m, double fraction, std::uint64_t seed) {
  if (m.size() < 2) throw InputError("holdout split needs at least 2 ratings");
  if (!(fraction > 0.0 && fraction < 1.0)) throw InputError("holdout fraction must be in (0,1)");
  const std::size_t n = m.size();
  const auto test_n = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  if (test_n == 0 || test_n == n)
    throw InputError(detail::concat("holdout fraction ", fraction, " leaves a side empty for n=", n));

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<char> in_test(n, 0);
  for (std::size_t k = 0; k < test_n; ++k) in_test[perm[k]] = 1;

  std::vector<Rating> train, test;
  train.reserve(n - test_n);
  test.reserve(test_n);
  for (std::size_t k = 0; k < n; ++k) (in_test[k] ? test : train).push_back(m.entries()[k]);
  return {RatingMatrix(m.num_users(), m.num_items(), std::move(train), m.rating_max(),
                       m.user_labels(), m.item_labels()),
          RatingMatrix(m.num_users(), m.num_items(), std::move(test), m.rating_max(),
                       m.user_labels(), m.item_labels())};
}

}  // namespace banditmf
