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

#include "fairsel/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "gtest/gtest.h"

namespace fairsel {
namespace {

const std::string kDataDir = FAIRSEL_DATA_DIR;

DatasetSpec toy_spec() {
  DatasetSpec spec;
  spec.name = "toy";
  spec.columns = {{"size", ColumnKind::kNumeric},
                  {"flat", ColumnKind::kNumeric},
                  {"color", ColumnKind::kCategorical},
                  {"sex", ColumnKind::kCategorical},
                  {"outcome", ColumnKind::kCategorical}};
  spec.label_column = "outcome";
  spec.favorable_value = "good";
  spec.sensitive_column = "sex";
  spec.privileged.op = PrivilegedPredicate::Op::kEquals;
  spec.privileged.values = {"m"};
  return spec;
}

const char* kToyCsv =
    "size,flat,color,sex,outcome\n"
    "2,5,red,m,good\n"
    "4,5,blue,f,bad\n"
    "6,5,red,f,good\n";

RawTable toy_raw() {
  std::istringstream in(kToyCsv);
  return parse_table(in, toy_spec());
}

TEST(ReadCsv, QuotedFieldsAndLineEndings) {
  std::istringstream in("a,b\r\n\"x, y\",\"say \"\"hi\"\"\"\r\n1,\"multi\nline\"\n");
  const auto rec = read_csv_records(in, ',');
  ASSERT_EQ(rec.size(), 3u);
  EXPECT_EQ(rec[1][0], "x, y");
  EXPECT_EQ(rec[1][1], "say \"hi\"");
  EXPECT_EQ(rec[2][1], "multi\nline");
}

TEST(ReadCsv, OtherDelimiter) {
  std::istringstream in("a;b\n1;\"2;3\"\n");
  const auto rec = read_csv_records(in, ';');
  EXPECT_EQ(rec[1], (std::vector<std::string>{"1", "2;3"}));
}

TEST(ParseTable, ReportsRows) {
  const RawTable raw = toy_raw();
  EXPECT_EQ(raw.rows.size(), 3u);
  EXPECT_EQ(raw.report.rows_read, 3u);
  EXPECT_EQ(raw.rows[1][0].number, 4.0);
  EXPECT_EQ(raw.rows[1][2].text, "blue");
}

TEST(ParseTable, MissingLabelColumn) {
  std::istringstream in("size,flat,color,sex\n1,2,red,m\n");
  try {
    parse_table(in, toy_spec());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("outcome"), std::string::npos);
  }
}

TEST(ParseTable, UnparseableCellHasCoordinates) {
  std::istringstream in("size,flat,color,sex,outcome\n1,5,red,m,good\nbig,5,red,m,good\n");
  try {
    parse_table(in, toy_spec());
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 2u);
    EXPECT_EQ(e.column(), "size");
  }
}

TEST(ParseTable, EmptyInputs) {
  std::istringstream empty("");
  EXPECT_THROW(parse_table(empty, toy_spec()), DataError);
  std::istringstream header_only("size,flat,color,sex,outcome\n");
  EXPECT_THROW(parse_table(header_only, toy_spec()), DataError);
}

TEST(ParseTable, WrongFieldCount) {
  std::istringstream in("size,flat,color,sex,outcome\n1,5,red,m\n");
  EXPECT_THROW(parse_table(in, toy_spec()), ParseError);
}

TEST(ParseTable, RejectsMissingValues) {
  std::istringstream in("size,flat,color,sex,outcome\n1,5,?,m,good\n2,5,red,f,bad\n,5,red,f,bad\n");
  const RawTable raw = parse_table(in, toy_spec());
  EXPECT_EQ(raw.rows.size(), 1u);
  EXPECT_EQ(raw.report.rows_read, 3u);
  EXPECT_EQ(raw.report.rows_rejected_missing, 2u);
}

TEST(Encode, MinMaxConstantAndOneHot) {
  const Dataset ds = encode_and_normalize(toy_raw(), toy_spec());
  EXPECT_EQ(ds.column_names(),
            (std::vector<std::string>{"size", "flat", "color=blue", "color=red",
                                      "sex[privileged]"}));
  EXPECT_EQ(ds.sensitive_index, 4u);
  const std::vector<double> size{0.0, 0.5, 1.0};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto r = ds.row(i);
    EXPECT_DOUBLE_EQ(r[0], size[i]);
    EXPECT_EQ(r[1], 0.0);
    EXPECT_EQ(r[2] + r[3], 1.0);
  }
  EXPECT_EQ(ds.row(0)[4], 1.0);
  EXPECT_EQ(ds.row(1)[4], 0.0);
  EXPECT_EQ(ds.labels, (std::vector<int>{1, 0, 1}));
  EXPECT_EQ(ds.groups[0], Group::kPrivileged);
  EXPECT_EQ(ds.groups[2], Group::kUnprivileged);
  EXPECT_EQ(ds.one_hot(1), (std::vector<double>{1.0, 0.0}));
  EXPECT_NO_THROW(ds.validate());
}

TEST(Encode, DenormalizeRoundTrip) {
  const RawTable raw = toy_raw();
  const Dataset ds = encode_and_normalize(raw, toy_spec());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto back = ds.denormalize(i);
    EXPECT_NEAR(back[0], raw.rows[i][0].number, 1e-9);
    EXPECT_NEAR(back[1], raw.rows[i][1].number, 1e-9);
  }
}

TEST(Encode, UnknownCategoryFails) {
  const Encoder enc = Encoder::fit(toy_raw(), toy_spec());
  std::istringstream in("size,flat,color,sex,outcome\n1,5,green,m,good\n");
  EXPECT_THROW(enc.encode(parse_table(in, toy_spec())), ParseError);
}

TEST(Spec, JsonRoundTrip) {
  DatasetSpec spec = toy_spec();
  spec.drop_columns = {"flat"};
  spec.delimiter = ';';
  const nlohmann::json j = spec;
  const DatasetSpec back = j.get<DatasetSpec>();
  EXPECT_EQ(nlohmann::json(back), j);
  EXPECT_EQ(back.delimiter, ';');
  EXPECT_TRUE(back.is_dropped("flat"));
}

TEST(Spec, ValidationErrors) {
  DatasetSpec spec = toy_spec();
  spec.sensitive_column = spec.label_column;
  EXPECT_THROW(spec.validate(), DataError);
  spec = toy_spec();
  spec.label_column = "nope";
  EXPECT_THROW(spec.validate(), DataError);
}

TEST(Predicate, Forms) {
  const auto ge = nlohmann::json::parse(R"({"ge": 25})").get<PrivilegedPredicate>();
  EXPECT_TRUE(ge.matches("25"));
  EXPECT_FALSE(ge.matches("24.5"));
  const auto in = nlohmann::json::parse(R"({"in": ["A91", "A93"]})").get<PrivilegedPredicate>();
  EXPECT_TRUE(in.matches("A93"));
  EXPECT_FALSE(in.matches("A92"));
  EXPECT_THROW(nlohmann::json::parse(R"({"between": 1})").get<PrivilegedPredicate>(),
               DataError);
}

TEST(German, BundledFile) {
  const DatasetSpec spec = load_spec(kDataDir + "/german.json");
  const RawTable raw = load_csv(kDataDir + "/german.csv", spec);
  EXPECT_EQ(raw.rows.size(), 1000u);
  EXPECT_EQ(raw.report.rows_rejected_missing, 0u);
  EXPECT_EQ(raw.columns.size() - 1, 20u);  // raw features, label excluded

  const Dataset ds = encode_and_normalize(raw, spec);
  EXPECT_NO_THROW(ds.validate());
  const std::size_t sex = raw.column_index("personal_status_sex");
  std::size_t privileged = 0, good = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::string& code = raw.rows[i][sex].text;
    const bool male = code == "A91" || code == "A93" || code == "A94";
    EXPECT_EQ(ds.groups[i] == Group::kPrivileged, male);
    EXPECT_EQ(ds.row(i)[ds.sensitive_index], male ? 1.0 : 0.0);
    privileged += male;
    good += ds.labels[i];
  }
  EXPECT_EQ(privileged, 690u);
  EXPECT_EQ(good, 700u);
}

TEST(BundledSpecs, Load) {
  for (const char* name : {"german", "compas", "bank"}) {
    EXPECT_NO_THROW(load_spec(kDataDir + "/" + name + ".json")) << name;
  }
  EXPECT_EQ(load_spec(kDataDir + "/bank.json").delimiter, ';');
}

// A file with the bank-marketing layout, generated on the fly since the
// original data is not bundled.
TEST(Bank, ShapedFixture) {
  const DatasetSpec spec = load_spec(kDataDir + "/bank.json");
  const auto path = std::filesystem::temp_directory_path() / "fairsel_bank_fixture.csv";
  {
    std::ofstream out(path);
    for (std::size_t c = 0; c < spec.columns.size(); ++c) {
      out << (c ? ";" : "") << '"' << spec.columns[c].name << '"';
    }
    out << '\n';
    RandomEngine rng(5);
    const char* jobs[] = {"admin.", "technician", "unknown"};
    for (int i = 0; i < 45211; ++i) {
      out << 18 + rng() % 70 << ";\"" << jobs[rng() % 3]
          << "\";\"married\";\"tertiary\";\"no\";" << static_cast<long>(rng() % 5000) - 500
          << ";\"yes\";\"no\";\"cellular\";" << 1 + rng() % 31 << ";\"may\";"
          << rng() % 900 << ';' << 1 + rng() % 5 << ";-1;0;\"unknown\";\""
          << (rng() % 8 == 0 ? "yes" : "no") << "\"\n";
    }
  }
  const RawTable raw = load_csv(path.string(), spec);
  std::filesystem::remove(path);
  EXPECT_EQ(raw.rows.size(), 45211u);
  EXPECT_EQ(raw.columns.size(), 17u);
  const Dataset ds = encode_and_normalize(raw, spec);
  const std::size_t age = raw.column_index("age");
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(ds.groups[i] == Group::kPrivileged, raw.rows[i][age].number >= 25);
  }
}

TEST(Split, Proportions) {
  auto sizes = [](std::size_t n) {
    const auto s = split_indices(n, 1);
    return std::vector<std::size_t>{s.train.size(), s.validation.size(), s.test.size()};
  };
  EXPECT_EQ(sizes(1000), (std::vector<std::size_t>{600, 200, 200}));
  EXPECT_EQ(sizes(10), (std::vector<std::size_t>{6, 2, 2}));
  EXPECT_EQ(sizes(13), (std::vector<std::size_t>{9, 2, 2}));
  EXPECT_THROW(split_indices(4, 1), DataError);
}

TEST(Split, DisjointExhaustiveDeterministic) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = split_indices(257, seed);
    EXPECT_EQ(s, split_indices(257, seed));
    std::set<std::size_t> all;
    for (const auto* part : {&s.train, &s.validation, &s.test}) {
      all.insert(part->begin(), part->end());
    }
    EXPECT_EQ(all.size(), 257u);
    EXPECT_EQ(*all.rbegin(), 256u);
  }
  EXPECT_NE(split_indices(257, 1), split_indices(257, 2));
}

TEST(Split, NormalizerFromTrainOnly) {
  const DatasetSpec spec = load_spec(kDataDir + "/german.json");
  const RawTable raw = load_csv(kDataDir + "/german.csv", spec);
  const EncodedTable table = Encoder::fit(raw, spec).encode(raw);
  const SplitData parts = split(table, 3);
  const auto names = parts.train.column_names();
  const std::size_t duration = static_cast<std::size_t>(
      std::find(names.begin(), names.end(), "duration") - names.begin());
  ASSERT_LT(duration, names.size());
  double lo = 1e300, hi = -1e300;
  for (std::size_t r : parts.indices.train) {
    lo = std::min(lo, table.row(r)[duration]);
    hi = std::max(hi, table.row(r)[duration]);
  }
  EXPECT_EQ(parts.train.normalizer.min[duration], lo);
  EXPECT_EQ(parts.train.normalizer.max[duration], hi);
  EXPECT_EQ(parts.test.normalizer.min, parts.train.normalizer.min);
  for (const Dataset* ds : {&parts.train, &parts.validation, &parts.test}) {
    EXPECT_NO_THROW(ds->validate());
  }
}

double correlation(const Dataset& ds, std::size_t a, std::size_t b) {
  double ma = 0, mb = 0;
  const double n = static_cast<double>(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ma += ds.row(i)[a];
    mb += ds.row(i)[b];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double da = ds.row(i)[a] - ma, db = ds.row(i)[b] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  return sab / std::sqrt(saa * sbb);
}

TEST(Synthetic, ProxyCorrelationExtremes) {
  const Dataset independent = synth_proxy(10000, 0.0, 4);
  EXPECT_LT(std::abs(correlation(independent, 0, 1)), 0.05);
  const Dataset copy = synth_proxy(1000, 1.0, 4);
  for (std::size_t i = 0; i < copy.size(); ++i) {
    EXPECT_EQ(copy.row(i)[0], copy.row(i)[1]);
  }
  EXPECT_NO_THROW(independent.validate());
  EXPECT_EQ(independent.column_names(),
            (std::vector<std::string>{"sensitive", "proxy", "informative",
                                      "noise_1", "noise_2"}));
}

TEST(Synthetic, GroupsAndDeterminism) {
  const Dataset a = synth_proxy(500, 0.95, 9);
  const Dataset b = synth_proxy(500, 0.95, 9);
  EXPECT_EQ(a.features, b.features);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.groups[i] == Group::kPrivileged, a.row(i)[0] == 1.0);
  }
  EXPECT_THROW(synth_proxy(50, 0.5, 1), InvalidArgument);
  EXPECT_THROW(synth_proxy(500, 1.5, 1), InvalidArgument);
}

TEST(Synthetic, CsvRoundTrip) {
  const EncodedTable t = synth_proxy_table(300, 0.8, 2);
  std::stringstream csv;
  const DatasetSpec spec = write_table_csv(t, csv, "synth");
  const RawTable raw = parse_table(csv, spec);
  const EncodedTable back = Encoder::fit(raw, spec).encode(raw);
  EXPECT_EQ(back.values, t.values);
  EXPECT_EQ(back.labels, t.labels);
  EXPECT_EQ(back.groups, t.groups);
  EXPECT_EQ(back.sensitive_index, t.sensitive_index);
}

}  // namespace
}  // namespace fairsel
