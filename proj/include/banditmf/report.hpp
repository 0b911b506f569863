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
#include <concepts>
#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "banditmf/common.hpp"
#include "banditmf/dataset.hpp"

namespace banditmf {

/// Header-first CSV writer. Doubles are printed with 17 significant digits
/// so metric files are exact and reproducible.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const std::vector<std::string>& header) : out_(out), width_(header.size()) {
    for (std::size_t c = 0; c < header.size(); ++c) out_ << (c ? "," : "") << text::quote_csv(header[c]);
    out_ << '\n';
  }

  template <class... Ts>
  void row(const Ts&... cells) {
    if (sizeof...(cells) != width_) throw InputError("csv row width does not match header");
    std::size_t c = 0;
    ((out_ << (c++ ? "," : "") << cell(cells)), ...);
    out_ << '\n';
  }

 private:
  static std::string cell(double v) { return text::format_double(v); }
  static std::string cell(const std::string& s) { return text::quote_csv(s); }
  static std::string cell(const char* s) { return text::quote_csv(s); }
  template <std::integral I>
  static std::string cell(I v) {
    return std::to_string(v);
  }

  std::ostream& out_;
  std::size_t width_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline CsvTable parse_csv_table(std::istream& in) {
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw InputError("csv: empty input");
  t.header = text::split_csv(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    auto fields = text::split_csv(line);
    if (fields.size() != t.header.size())
      throw InputError(detail::concat("csv line ", lineno, ": expected ", t.header.size(), " fields, got ",
                                      fields.size()));
    t.rows.push_back(std::move(fields));
  }
  return t;
}

/// Fixed-width rendering: numeric columns right-aligned, text left-aligned,
/// two spaces between columns, a dashed rule under the header. Cell text is
/// reproduced verbatim.
inline std::string render_table(const CsvTable& t) {
  const std::size_t cols = t.header.size();
  std::vector<std::size_t> width(cols, 0);
  std::vector<bool> numeric(cols, true);
  for (std::size_t c = 0; c < cols; ++c) width[c] = t.header[c].size();
  for (const auto& r : t.rows)
    for (std::size_t c = 0; c < cols; ++c) {
      width[c] = std::max(width[c], r[c].size());
      if (!text::parse_double(r[c])) numeric[c] = false;
    }
  if (t.rows.empty()) std::fill(numeric.begin(), numeric.end(), false);

  std::string out;
  auto put = [&](const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) line += "  ";
      const std::string pad(width[c] - cells[c].size(), ' ');
      line += numeric[c] ? pad + cells[c] : cells[c] + pad;
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
  };
  put(t.header);
  std::string rule;
  for (std::size_t c = 0; c < cols; ++c) rule += (c ? "  " : "") + std::string(width[c], '-');
  out += rule + '\n';
  for (const auto& r : t.rows) put(r);
  return out;
}

}  // namespace banditmf
