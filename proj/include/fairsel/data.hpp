// Copyright 2026 The fairsel Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Tabular ingestion: RFC-4180 CSV, JSON dataset specs, one-hot encoding,
// sensitive-feature binarization, min-max normalization, seeded splits and a
// synthetic proxy-bias generator.
//
// The pipeline is
//   load_csv -> Encoder::fit / encode -> EncodedTable
//   split_indices -> Normalizer::fit (train rows) -> materialize -> Dataset

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairsel/error.hpp"
#include "fairsel/metrics.hpp"
#include "fairsel/random.hpp"

namespace fairsel {

enum class ColumnKind { kNumeric, kCategorical };

inline const char* column_kind_name(ColumnKind k) {
  return k == ColumnKind::kNumeric ? "numeric" : "categorical";
}

inline ColumnKind parse_column_kind(const std::string& s) {
  if (s == "numeric") return ColumnKind::kNumeric;
  if (s == "categorical") return ColumnKind::kCategorical;
  throw DataError("unknown column kind '" + s +
                  "' (expected numeric or categorical)");
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline std::optional<double> parse_number(std::string_view text) {
  const std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  double value = 0.0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

}  // namespace detail

// Which raw values of the sensitive column form the privileged group.
struct PrivilegedPredicate {
  enum class Op { kEquals, kIn, kGreaterEqual, kGreater, kLessEqual, kLess };

  Op op = Op::kEquals;
  std::vector<std::string> values;
  double threshold = 0.0;

  bool is_numeric() const {
    return op != Op::kEquals && op != Op::kIn;
  }

  bool matches(std::string_view text) const {
    if (is_numeric()) {
      const auto v = detail::parse_number(text);
      if (!v) {
        throw DataError("sensitive value '" + std::string(text) +
                        "' is not numeric but the privileged predicate is");
      }
      switch (op) {
        case Op::kGreaterEqual: return *v >= threshold;
        case Op::kGreater: return *v > threshold;
        case Op::kLessEqual: return *v <= threshold;
        case Op::kLess: return *v < threshold;
        default: break;
      }
    }
    const std::string t = detail::trim(text);
    const auto tv = detail::parse_number(t);
    return std::any_of(values.begin(), values.end(), [&](const std::string& v) {
      if (v == t) return true;
      const auto nv = detail::parse_number(v);
      return tv && nv && *tv == *nv;
    });
  }
};

inline void to_json(nlohmann::json& j, const PrivilegedPredicate& p) {
  using Op = PrivilegedPredicate::Op;
  switch (p.op) {
    case Op::kEquals: j = {{"equals", p.values.at(0)}}; break;
    case Op::kIn: j = {{"in", p.values}}; break;
    case Op::kGreaterEqual: j = {{"ge", p.threshold}}; break;
    case Op::kGreater: j = {{"gt", p.threshold}}; break;
    case Op::kLessEqual: j = {{"le", p.threshold}}; break;
    case Op::kLess: j = {{"lt", p.threshold}}; break;
  }
}

inline void from_json(const nlohmann::json& j, PrivilegedPredicate& p) {
  using Op = PrivilegedPredicate::Op;
  if (!j.is_object() || j.size() != 1) {
    throw DataError("privileged predicate must be an object with one key");
  }
  const auto& [key, value] = *j.items().begin();
  p = PrivilegedPredicate{};
  if (key == "equals") {
    p.op = Op::kEquals;
    p.values = {value.is_string() ? value.get<std::string>() : value.dump()};
  } else if (key == "in") {
    p.op = Op::kIn;
    for (const auto& v : value) {
      p.values.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    }
  } else {
    static const std::map<std::string, Op> kOps{{"ge", Op::kGreaterEqual},
                                                {"gt", Op::kGreater},
                                                {"le", Op::kLessEqual},
                                                {"lt", Op::kLess}};
    const auto it = kOps.find(key);
    if (it == kOps.end() || !value.is_number()) {
      throw DataError("unknown privileged predicate '" + key + "'");
    }
    p.op = it->second;
    p.threshold = value.get<double>();
  }
}

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::kNumeric;

  friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

struct DatasetSpec {
  std::string name;
  std::vector<ColumnSpec> columns;
  std::string label_column;
  std::string favorable_value;
  std::string sensitive_column;
  PrivilegedPredicate privileged;
  std::vector<std::string> drop_columns;
  char delimiter = ',';
  std::vector<std::string> missing_values{"", "?", "NA"};
  std::string notes;

  const ColumnSpec* find(const std::string& column) const {
    for (const auto& c : columns) {
      if (c.name == column) return &c;
    }
    return nullptr;
  }

  bool is_dropped(const std::string& column) const {
    return std::find(drop_columns.begin(), drop_columns.end(), column) !=
           drop_columns.end();
  }

  void validate() const {
    if (columns.empty()) throw DataError("dataset spec lists no columns");
    std::set<std::string> seen;
    for (const auto& c : columns) {
      if (!seen.insert(c.name).second) {
        throw DataError("dataset spec lists column '" + c.name + "' twice");
      }
    }
    if (!find(label_column)) {
      throw DataError("label column '" + label_column +
                      "' is not among the spec columns");
    }
    if (!find(sensitive_column)) {
      throw DataError("sensitive column '" + sensitive_column +
                      "' is not among the spec columns");
    }
    if (label_column == sensitive_column) {
      throw DataError("label and sensitive column must differ");
    }
    if (is_dropped(label_column) || is_dropped(sensitive_column)) {
      throw DataError("label and sensitive columns cannot be dropped");
    }
  }
};

inline void to_json(nlohmann::json& j, const DatasetSpec& s) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : s.columns) {
    cols.push_back({{"name", c.name}, {"kind", column_kind_name(c.kind)}});
  }
  j = {{"name", s.name},
       {"delimiter", std::string(1, s.delimiter)},
       {"missing_values", s.missing_values},
       {"columns", cols},
       {"label", {{"column", s.label_column}, {"favorable", s.favorable_value}}},
       {"sensitive",
        {{"column", s.sensitive_column}, {"privileged", s.privileged}}},
       {"drop", s.drop_columns}};
  if (!s.notes.empty()) j["notes"] = s.notes;
}

inline void from_json(const nlohmann::json& j, DatasetSpec& s) {
  try {
    s = DatasetSpec{};
    s.name = j.value("name", std::string{});
    const std::string delim = j.value("delimiter", std::string(","));
    if (delim.size() != 1) throw DataError("delimiter must be one character");
    s.delimiter = delim[0];
    if (j.contains("missing_values")) {
      s.missing_values = j.at("missing_values").get<std::vector<std::string>>();
    }
    for (const auto& c : j.at("columns")) {
      s.columns.push_back({c.at("name").get<std::string>(),
                           parse_column_kind(c.at("kind").get<std::string>())});
    }
    const auto& label = j.at("label");
    s.label_column = label.at("column").get<std::string>();
    const auto& fav = label.at("favorable");
    s.favorable_value = fav.is_string() ? fav.get<std::string>() : fav.dump();
    const auto& sens = j.at("sensitive");
    s.sensitive_column = sens.at("column").get<std::string>();
    s.privileged = sens.at("privileged").get<PrivilegedPredicate>();
    if (j.contains("drop")) {
      s.drop_columns = j.at("drop").get<std::vector<std::string>>();
    }
    s.notes = j.value("notes", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed dataset spec: ") + e.what());
  }
  s.validate();
}

inline DatasetSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset spec '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("dataset spec '" + path + "' is not valid JSON: " +
                    e.what());
  }
  return j.get<DatasetSpec>();
}

// RFC-4180 records: quoted fields, doubled quotes, CRLF or LF line endings,
// delimiters and newlines inside quotes.
inline std::vector<std::vector<std::string>> read_csv_records(
    std::istream& in, char delimiter = ',') {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  bool any = false;
  char ch;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = record.size() == 1 && record[0].empty();
    if (!blank) records.push_back(std::move(record));
    record.clear();
  };
  while (in.get(ch)) {
    any = true;
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (ch == delimiter) {
      end_field();
    } else if (ch == '\n') {
      end_record();
    } else if (ch == '\r') {
      if (in.peek() == '\n') continue;
      end_record();
    } else {
      field.push_back(ch);
      field_started = true;
    }
  }
  if (in_quotes) throw DataError("unterminated quoted CSV field");
  if (any && (!field.empty() || !record.empty())) end_record();
  return records;
}

struct RawCell {
  std::string text;
  double number = std::numeric_limits<double>::quiet_NaN();
};

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t rows_rejected_missing = 0;
};

// Spec columns in spec order; rows with a missing cell are dropped and
// counted in `report`.
struct RawTable {
  std::vector<ColumnSpec> columns;
  std::vector<std::vector<RawCell>> rows;
  LoadReport report;

  std::size_t column_index(const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (columns[c].name == name) return c;
    }
    throw DataError("column '" + name + "' not found");
  }
};

inline RawTable parse_table(std::istream& in, const DatasetSpec& spec) {
  spec.validate();
  const auto records = read_csv_records(in, spec.delimiter);
  if (records.empty()) throw DataError("CSV input is empty");
  const auto& header = records.front();
  std::vector<std::size_t> source(spec.columns.size());
  for (std::size_t c = 0; c < spec.columns.size(); ++c) {
    const auto it = std::find_if(header.begin(), header.end(),
                                 [&](const std::string& h) {
                                   return detail::trim(h) == spec.columns[c].name;
                                 });
    if (it == header.end()) {
      throw DataError("CSV header is missing column '" + spec.columns[c].name +
                      "'");
    }
    source[c] = static_cast<std::size_t>(it - header.begin());
  }
  if (records.size() == 1) throw DataError("CSV input has no data rows");

  RawTable table;
  table.columns = spec.columns;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) +
                           " fields, found " + std::to_string(rec.size()),
                       r, "*");
    }
    ++table.report.rows_read;
    std::vector<RawCell> row(spec.columns.size());
    bool missing = false;
    for (std::size_t c = 0; c < spec.columns.size(); ++c) {
      std::string text = rec[source[c]];
      const std::string trimmed = detail::trim(text);
      if (std::find(spec.missing_values.begin(), spec.missing_values.end(),
                    trimmed) != spec.missing_values.end()) {
        missing = true;
        break;
      }
      row[c].text = trimmed;
      if (spec.columns[c].kind == ColumnKind::kNumeric) {
        const auto v = detail::parse_number(trimmed);
        if (!v) {
          throw ParseError("cannot parse '" + text + "' as a number", r,
                           spec.columns[c].name);
        }
        row[c].number = *v;
      }
    }
    if (missing) {
      ++table.report.rows_rejected_missing;
      continue;
    }
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty()) {
    throw DataError("every CSV row has a missing value");
  }
  return table;
}

inline RawTable load_csv(const std::string& path, const DatasetSpec& spec) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open CSV file '" + path + "'");
  return parse_table(in, spec);
}

struct FeatureColumn {
  enum class Kind { kNumeric, kIndicator, kSensitive };

  std::string name;
  std::string source;
  Kind kind = Kind::kNumeric;
  std::string level;  // kIndicator only

  bool scaled() const { return kind == Kind::kNumeric; }

  friend bool operator==(const FeatureColumn&, const FeatureColumn&) = default;
};

// Encoded but unnormalized table. Labels are class indices with 1 = the
// favorable value.
struct EncodedTable {
  std::vector<FeatureColumn> columns;
  std::vector<double> values;  // row-major rows() x dim()
  std::vector<int> labels;
  std::vector<Group> groups;
  std::size_t sensitive_index = 0;

  std::size_t rows() const { return labels.size(); }
  std::size_t dim() const { return columns.size(); }
  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * dim(), dim()};
  }
};

// Per-column min/max from training rows. Unscaled (binary) columns pass
// through; constant columns map to 0; out-of-range values are clamped.
struct Normalizer {
  std::vector<double> min;
  std::vector<double> max;
  std::vector<bool> scaled;

  static Normalizer identity(std::size_t d) {
    return {std::vector<double>(d, 0.0), std::vector<double>(d, 1.0),
            std::vector<bool>(d, false)};
  }

  static Normalizer fit(const EncodedTable& table,
                        std::span<const std::size_t> rows) {
    const std::size_t d = table.dim();
    Normalizer n = identity(d);
    if (rows.empty()) throw DataError("cannot fit a normalizer on zero rows");
    for (std::size_t c = 0; c < d; ++c) {
      if (!table.columns[c].scaled()) continue;
      n.scaled[c] = true;
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (std::size_t r : rows) {
        const double v = table.values[r * d + c];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      n.min[c] = lo;
      n.max[c] = hi;
    }
    return n;
  }

  std::size_t dim() const { return min.size(); }

  double apply(std::size_t c, double v) const {
    if (!scaled[c]) return v;
    const double range = max[c] - min[c];
    if (!(range > 0.0)) return 0.0;
    return std::clamp((v - min[c]) / range, 0.0, 1.0);
  }

  double invert(std::size_t c, double v) const {
    if (!scaled[c]) return v;
    return min[c] + v * (max[c] - min[c]);
  }

  friend bool operator==(const Normalizer&, const Normalizer&) = default;
};

inline void to_json(nlohmann::json& j, const Normalizer& n) {
  std::vector<int> scaled(n.scaled.begin(), n.scaled.end());
  j = {{"min", n.min}, {"max", n.max}, {"scaled", scaled}};
}

inline void from_json(const nlohmann::json& j, Normalizer& n) {
  n.min = j.at("min").get<std::vector<double>>();
  n.max = j.at("max").get<std::vector<double>>();
  const auto scaled = j.at("scaled").get<std::vector<int>>();
  n.scaled.assign(scaled.begin(), scaled.end());
  if (n.max.size() != n.min.size() || n.scaled.size() != n.min.size()) {
    throw DataError("normalizer arrays differ in length");
  }
}

// Normalized features in [0, 1], ready for training or evaluation.
struct Dataset {
  std::vector<FeatureColumn> columns;
  std::vector<double> features;  // row-major size() x dim()
  std::vector<int> labels;
  std::vector<Group> groups;
  std::size_t sensitive_index = 0;
  std::size_t num_classes = 2;
  Normalizer normalizer;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return columns.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * dim(), dim()};
  }

  std::vector<double> one_hot(std::size_t i) const {
    std::vector<double> y(num_classes, 0.0);
    y.at(static_cast<std::size_t>(labels.at(i))) = 1.0;
    return y;
  }

  std::vector<std::string> column_names() const {
    std::vector<std::string> names;
    for (const auto& c : columns) names.push_back(c.name);
    return names;
  }

  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.columns = columns;
    out.sensitive_index = sensitive_index;
    out.num_classes = num_classes;
    out.normalizer = normalizer;
    out.features.reserve(indices.size() * dim());
    for (std::size_t i : indices) {
      const auto r = row(i);
      out.features.insert(out.features.end(), r.begin(), r.end());
      out.labels.push_back(labels.at(i));
      out.groups.push_back(groups.at(i));
    }
    return out;
  }

  // Recovers pre-normalization values of row i.
  std::vector<double> denormalize(std::size_t i) const {
    std::vector<double> out(dim());
    const auto r = row(i);
    for (std::size_t c = 0; c < dim(); ++c) out[c] = normalizer.invert(c, r[c]);
    return out;
  }

  void validate() const {
    const std::size_t d = dim();
    if (d == 0) throw DataError("dataset has no feature columns");
    if (features.size() != size() * d || groups.size() != size()) {
      throw DataError("dataset arrays disagree in length");
    }
    if (sensitive_index >= d) {
      throw DataError("sensitive index out of range");
    }
    for (double v : features) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw DataError("feature value outside [0, 1]");
      }
    }
    for (int y : labels) {
      if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
        throw DataError("label outside class range");
      }
    }
  }
};

inline Dataset materialize(const EncodedTable& table,
                           std::span<const std::size_t> rows,
                           const Normalizer& normalizer) {
  if (normalizer.dim() != table.dim()) {
    throw DimensionError("normalizer", table.dim(), normalizer.dim());
  }
  Dataset ds;
  ds.columns = table.columns;
  ds.sensitive_index = table.sensitive_index;
  ds.normalizer = normalizer;
  const std::size_t d = table.dim();
  ds.features.reserve(rows.size() * d);
  for (std::size_t r : rows) {
    for (std::size_t c = 0; c < d; ++c) {
      ds.features.push_back(normalizer.apply(c, table.values.at(r * d + c)));
    }
    ds.labels.push_back(table.labels.at(r));
    ds.groups.push_back(table.groups.at(r));
  }
  return ds;
}

inline std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

// Column layout and categorical vocabularies, fitted once on a raw table and
// reused to encode later files consistently.
class Encoder {
 public:
  Encoder() = default;

  static Encoder fit(const RawTable& raw, const DatasetSpec& spec) {
    spec.validate();
    Encoder e;
    e.spec_ = spec;
    for (std::size_t c = 0; c < raw.columns.size(); ++c) {
      const ColumnSpec& col = raw.columns[c];
      if (col.name == spec.label_column || spec.is_dropped(col.name)) continue;
      if (col.name == spec.sensitive_column) {
        e.columns_.push_back({col.name + "[privileged]", col.name,
                              FeatureColumn::Kind::kSensitive, {}});
        continue;
      }
      if (col.kind == ColumnKind::kNumeric) {
        e.columns_.push_back(
            {col.name, col.name, FeatureColumn::Kind::kNumeric, {}});
        continue;
      }
      std::set<std::string> levels;
      for (const auto& row : raw.rows) levels.insert(row[c].text);
      for (const auto& level : levels) {
        e.columns_.push_back({col.name + "=" + level, col.name,
                              FeatureColumn::Kind::kIndicator, level});
      }
    }
    return e;
  }

  Encoder(DatasetSpec spec, std::vector<FeatureColumn> columns)
      : spec_(std::move(spec)), columns_(std::move(columns)) {}

  const DatasetSpec& spec() const { return spec_; }
  const std::vector<FeatureColumn>& columns() const { return columns_; }

  std::size_t sensitive_index() const {
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      if (columns_[c].kind == FeatureColumn::Kind::kSensitive) return c;
    }
    throw DataError("encoder has no sensitive column");
  }

  EncodedTable encode(const RawTable& raw) const {
    if (raw.rows.empty()) throw DataError("cannot encode zero rows");
    EncodedTable t;
    t.columns = columns_;
    t.sensitive_index = sensitive_index();
    const std::size_t label_col = raw.column_index(spec_.label_column);
    const std::size_t sens_col = raw.column_index(spec_.sensitive_column);
    std::vector<std::size_t> source(columns_.size());
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      source[c] = raw.column_index(columns_[c].source);
    }
    const bool numeric_label =
        raw.columns[label_col].kind == ColumnKind::kNumeric;
    const auto favorable_number = detail::parse_number(spec_.favorable_value);

    t.values.reserve(raw.rows.size() * columns_.size());
    for (std::size_t r = 0; r < raw.rows.size(); ++r) {
      const auto& row = raw.rows[r];
      const bool privileged = spec_.privileged.matches(row[sens_col].text);
      for (std::size_t c = 0; c < columns_.size(); ++c) {
        const FeatureColumn& fc = columns_[c];
        switch (fc.kind) {
          case FeatureColumn::Kind::kSensitive:
            t.values.push_back(privileged ? 1.0 : 0.0);
            break;
          case FeatureColumn::Kind::kNumeric:
            t.values.push_back(row[source[c]].number);
            break;
          case FeatureColumn::Kind::kIndicator:
            t.values.push_back(row[source[c]].text == fc.level ? 1.0 : 0.0);
            break;
        }
      }
      // Every categorical cell must hit a known level.
      for (std::size_t c = 0; c < raw.columns.size(); ++c) {
        const auto& col = raw.columns[c];
        if (col.kind != ColumnKind::kCategorical ||
            col.name == spec_.label_column ||
            col.name == spec_.sensitive_column ||
            spec_.is_dropped(col.name)) {
          continue;
        }
        const bool known = std::any_of(
            columns_.begin(), columns_.end(), [&](const FeatureColumn& fc) {
              return fc.source == col.name && fc.level == row[c].text;
            });
        if (!known) {
          throw ParseError("unknown category '" + row[c].text + "'", r + 1,
                           col.name);
        }
      }
      bool favorable = row[label_col].text == spec_.favorable_value;
      if (numeric_label && favorable_number) {
        favorable = row[label_col].number == *favorable_number;
      }
      t.labels.push_back(favorable ? 1 : 0);
      t.groups.push_back(privileged ? Group::kPrivileged : Group::kUnprivileged);
    }
    return t;
  }

 private:
  DatasetSpec spec_;
  std::vector<FeatureColumn> columns_;
};

inline void to_json(nlohmann::json& j, const FeatureColumn& c) {
  static const char* kKinds[] = {"numeric", "indicator", "sensitive"};
  j = {{"name", c.name},
       {"source", c.source},
       {"kind", kKinds[static_cast<int>(c.kind)]},
       {"level", c.level}};
}

inline void from_json(const nlohmann::json& j, FeatureColumn& c) {
  c.name = j.at("name").get<std::string>();
  c.source = j.at("source").get<std::string>();
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "numeric") {
    c.kind = FeatureColumn::Kind::kNumeric;
  } else if (kind == "indicator") {
    c.kind = FeatureColumn::Kind::kIndicator;
  } else if (kind == "sensitive") {
    c.kind = FeatureColumn::Kind::kSensitive;
  } else {
    throw DataError("unknown feature column kind '" + kind + "'");
  }
  c.level = j.value("level", std::string{});
}

// Encodes every row and min-max scales with statistics from all rows.
inline Dataset encode_and_normalize(const RawTable& raw,
                                    const DatasetSpec& spec) {
  const Encoder encoder = Encoder::fit(raw, spec);
  const EncodedTable table = encoder.encode(raw);
  const auto rows = all_rows(table.rows());
  return materialize(table, rows, Normalizer::fit(table, rows));
}

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;

  friend bool operator==(const SplitIndices&, const SplitIndices&) = default;
};

// Seeded shuffle, then 60/20/20 with the remainder going to train.
inline SplitIndices split_indices(std::size_t n, std::uint64_t seed) {
  if (n < 5) {
    throw DataError("need at least 5 rows to split, got " + std::to_string(n));
  }
  std::vector<std::size_t> idx = all_rows(n);
  RandomEngine rng = make_engine(seed, Stream::kSplit);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(idx[i], idx[j]);
  }
  const std::size_t n_val = n / 5;
  const std::size_t n_test = n / 5;
  const std::size_t n_train = n - n_val - n_test;
  SplitIndices s;
  s.train.assign(idx.begin(), idx.begin() + n_train);
  s.validation.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
  s.test.assign(idx.begin() + n_train + n_val, idx.end());
  return s;
}

struct SplitData {
  Dataset train;
  Dataset validation;
  Dataset test;
  SplitIndices indices;
};

// Splits an encoded table and normalizes all three parts with statistics
// from the training rows only.
inline SplitData split(const EncodedTable& table, std::uint64_t seed) {
  SplitData out;
  out.indices = split_indices(table.rows(), seed);
  const Normalizer norm = Normalizer::fit(table, out.indices.train);
  out.train = materialize(table, out.indices.train, norm);
  out.validation = materialize(table, out.indices.validation, norm);
  out.test = materialize(table, out.indices.test, norm);
  return out;
}

// Splits an already-normalized dataset.
inline SplitData split(const Dataset& dataset, std::uint64_t seed) {
  SplitData out;
  out.indices = split_indices(dataset.size(), seed);
  out.train = dataset.subset(out.indices.train);
  out.validation = dataset.subset(out.indices.validation);
  out.test = dataset.subset(out.indices.test);
  return out;
}

struct SyntheticOptions {
  // How far the privileged group's latent merit is shifted upwards.
  double merit_shift = 0.3;
  // Measurement noise on the informative feature.
  double measurement_noise = 0.2;
  std::size_t noise_features = 2;
};

// Columns: sensitive bit (index 0), proxy, informative, noise...
// The latent merit z is U(0, 1 - shift) + shift * a; the label is z > 0.5 and
// the informative feature is a noisy reading of z. The proxy equals the
// sensitive bit with probability rho and is an independent fair coin
// otherwise. A classifier that can see the group uses it as a prior on z,
// which widens the true-positive-rate gap between groups.
inline EncodedTable synth_proxy_table(std::size_t n, double rho,
                                      std::uint64_t seed,
                                      const SyntheticOptions& opt = {}) {
  if (n < 100) throw InvalidArgument("synthetic data needs n >= 100");
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw InvalidArgument("proxy correlation must lie in [0, 1]");
  }
  EncodedTable t;
  t.columns.push_back(
      {"sensitive", "sensitive", FeatureColumn::Kind::kSensitive, {}});
  t.columns.push_back({"proxy", "proxy", FeatureColumn::Kind::kIndicator, "1"});
  t.columns.push_back(
      {"informative", "informative", FeatureColumn::Kind::kNumeric, {}});
  for (std::size_t i = 0; i < opt.noise_features; ++i) {
    const std::string name = "noise_" + std::to_string(i + 1);
    t.columns.push_back({name, name, FeatureColumn::Kind::kNumeric, {}});
  }
  t.sensitive_index = 0;
  RandomEngine rng = make_engine(seed, Stream::kSynthetic);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = uniform01(rng) < 0.5 ? 1.0 : 0.0;
    const bool copy = uniform01(rng) < rho;
    const double coin = uniform01(rng) < 0.5 ? 1.0 : 0.0;
    const double proxy = copy ? a : coin;
    const double z =
        uniform01(rng) * (1.0 - opt.merit_shift) + opt.merit_shift * a;
    const double informative = std::clamp(
        z + opt.measurement_noise * standard_normal(rng), 0.0, 1.0);
    t.values.push_back(a);
    t.values.push_back(proxy);
    t.values.push_back(informative);
    for (std::size_t k = 0; k < opt.noise_features; ++k) {
      t.values.push_back(uniform01(rng));
    }
    t.labels.push_back(z > 0.5 ? 1 : 0);
    t.groups.push_back(a == 1.0 ? Group::kPrivileged : Group::kUnprivileged);
  }
  return t;
}

// All synthetic features are generated inside [0, 1], so no rescaling.
inline Dataset synth_proxy(std::size_t n, double rho, std::uint64_t seed,
                           const SyntheticOptions& opt = {}) {
  const EncodedTable t = synth_proxy_table(n, rho, seed, opt);
  Normalizer identity = Normalizer::identity(t.dim());
  return materialize(t, all_rows(n), identity);
}

// Writes an encoded table as CSV plus the spec that reads it back with the
// same columns, labels and groups.
inline DatasetSpec write_table_csv(const EncodedTable& t, std::ostream& out,
                                   const std::string& name) {
  DatasetSpec spec;
  spec.name = name;
  for (const auto& c : t.columns) {
    out << c.name << ',';
    spec.columns.push_back({c.name, ColumnKind::kNumeric});
  }
  out << "label\n";
  spec.columns.push_back({"label", ColumnKind::kNumeric});
  spec.label_column = "label";
  spec.favorable_value = "1";
  spec.sensitive_column = t.columns.at(t.sensitive_index).name;
  spec.privileged.op = PrivilegedPredicate::Op::kGreaterEqual;
  spec.privileged.threshold = 0.5;
  std::ostringstream line;
  line.precision(17);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    line.str({});
    for (double v : t.row(r)) line << v << ',';
    line << t.labels[r] << '\n';
    out << line.str();
  }
  return spec;
}

}  // namespace fairsel
