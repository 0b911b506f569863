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

// Flat `key = value` run configuration, one entry per line, `#` comments.

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "banditmf/common.hpp"
#include "banditmf/dataset.hpp"

namespace banditmf {

class FlatConfig {
 public:
  using Entry = std::pair<std::string, std::string>;

  /// Later assignments to the same key replace earlier ones in place.
  void set(const std::string& key, const std::string& value) {
    for (auto& e : entries_)
      if (e.first == key) {
        e.second = value;
        return;
      }
    entries_.emplace_back(key, value);
  }

  std::optional<std::string> get(const std::string& key) const {
    for (const auto& e : entries_)
      if (e.first == key) return e.second;
    return std::nullopt;
  }

  const std::vector<Entry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<Entry> entries_;
};

inline FlatConfig parse_flat_config(std::istream& in) {
  FlatConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = text::trim(line);
    if (s.empty() || s.front() == '#') continue;
    auto eq = s.find('=');
    if (eq == std::string_view::npos)
      throw InputError(detail::concat("config line ", lineno, ": expected key = value"));
    std::string key(text::trim(s.substr(0, eq)));
    std::string value(text::trim(s.substr(eq + 1)));
    if (key.empty()) throw InputError(detail::concat("config line ", lineno, ": empty key"));
    cfg.set(key, value);
  }
  return cfg;
}

inline FlatConfig load_flat_config(const std::string& path) {
  auto in = text::open_input(path);
  return parse_flat_config(in);
}

inline void write_flat_config(const FlatConfig& cfg, std::ostream& out,
                              const std::vector<std::string>& comments = {}) {
  for (const auto& c : comments) out << "# " << c << '\n';
  for (const auto& [k, v] : cfg.entries()) out << k << " = " << v << '\n';
}

}  // namespace banditmf
