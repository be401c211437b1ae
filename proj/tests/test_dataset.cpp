// Copyright 2026 The trustsense Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <sstream>
#include <string>

#include "test_support.hpp"
#include "trustsense/dataset.hpp"
#include "trustsense/random.hpp"

namespace trustsense {
namespace {

FeatureTable random_table(std::uint64_t seed, std::size_t rows, std::size_t cols, int subjects) {
  Rng rng(seed);
  FeatureTable t;
  for (std::size_t c = 0; c < cols; ++c) t.columns.push_back("f" + std::to_string(c));
  t.x.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      t.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rng.normal(3.0 * static_cast<double>(c), 2.0);
    }
    t.y.push_back(rng.bernoulli(0.5) ? 1 : 0);
    t.subject.push_back(static_cast<int>(rng.index(static_cast<std::uint64_t>(subjects))));
    t.row_id.push_back(r);
  }
  return t;
}

FeatureTable parse(const std::string& text, const CsvOptions& opts = {}) {
  std::istringstream in(text);
  return parse_csv(in, opts);
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kIo;
}

TEST(Labels, EncodesTokens) {
  EXPECT_EQ(encode_label("trust"), 1);
  EXPECT_EQ(encode_label(" Distrust "), 0);
  EXPECT_EQ(encode_label("TRUST"), 1);
  EXPECT_EQ(encode_label("1"), 1);
  EXPECT_EQ(encode_label("0"), 0);
  EXPECT_EQ(kind_of([] { encode_label("maybe"); }), ErrorKind::kLabel);
  EXPECT_EQ(kind_of([] { encode_label("2"); }), ErrorKind::kLabel);
}

TEST(Csv, ParsesLabelsAndSubjects) {
  const auto t = parse("a,b,y,subject\n1,2,trust,5\n3.5,-4e-3,distrust,6\n");
  ASSERT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.columns, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.y, (std::vector<int>{1, 0}));
  EXPECT_EQ(t.subject, (std::vector<int>{5, 6}));
  EXPECT_EQ(t.x(1, 1), -4e-3);
}

TEST(Csv, MissingSubjectColumnMakesEachRowItsOwnSubject) {
  const auto t = parse("\xEF\xBB\xBF" "a,y\r\n1,1\r\n2,0\r\n3,1\r\n");
  EXPECT_EQ(t.subject, (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(t.columns.front(), "a");
}

TEST(Csv, ErrorsCarryLocation) {
  try {
    parse("a,b,y\n1,2,1\n1,x,0\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParse);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'b'"), std::string::npos) << msg;
  }
  EXPECT_EQ(kind_of([] { parse("a,b,y\n"); }), ErrorKind::kParse);
  EXPECT_EQ(kind_of([] { parse("a,b\n1,2\n"); }), ErrorKind::kParse);
  EXPECT_EQ(kind_of([] { parse("a,y\n1,perhaps\n"); }), ErrorKind::kParse);
  EXPECT_EQ(kind_of([] { parse("a,y\n1,2,3\n"); }), ErrorKind::kParse);
  EXPECT_EQ(kind_of([] { parse(""); }), ErrorKind::kParse);
  EXPECT_EQ(kind_of([] { parse("a,y\nnan,1\n"); }), ErrorKind::kParse);
}

TEST(Csv, ExpectedColumnsAreEnforced) {
  CsvOptions opts;
  opts.expected_columns = {"Mean - C3", "GSR_MaxPhasic"};
  EXPECT_NO_THROW(parse("Mean \xE2\x80\x93 C3,GSR_MaxPhasic,y\n1,2,1\n", opts));
  try {
    parse("Mean - C3,Other,y\n1,2,1\n", opts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("GSR_MaxPhasic"), std::string::npos);
  }
}

TEST(Csv, RoundTripIsExact) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto t = random_table(seed, 30, 5, 4);
    t.x(0, 0) = 0.1 + 0.2;
    t.x(1, 1) = 1e-300;
    t.x(2, 2) = -123456789.123456789;
    std::stringstream buf;
    write_csv(t, buf);
    const auto back = parse_csv(buf);
    EXPECT_EQ(back.columns, t.columns);
    EXPECT_EQ(back.y, t.y);
    EXPECT_EQ(back.subject, t.subject);
    EXPECT_TRUE(back.x == t.x);
  }
}

TEST(Csv, FileRoundTripAndMissingFile) {
  testing::TempDir dir("csv");
  const auto t = random_table(1, 10, 3, 3);
  save_csv(t, dir / "t.csv");
  EXPECT_TRUE(load_csv(dir / "t.csv").x == t.x);
  EXPECT_EQ(kind_of([&] { load_csv(dir / "missing.csv"); }), ErrorKind::kIo);
}

TEST(Table, SelectColumnsByNormalizedName) {
  FeatureTable t;
  t.columns = {"Mean Frequency - P4", "GSR_MaxPhasic"};
  t.x = Matrix{{1.0, 2.0}, {3.0, 4.0}};
  t.y = {0, 1};
  t.subject = {0, 1};
  t.row_id = {0, 1};
  const std::vector<std::string> names{"GSR_MaxPhasic", "Mean Frequency \xE2\x80\x93 P4"};
  const auto s = t.select_columns(names);
  EXPECT_EQ(s.columns, (std::vector<std::string>{"GSR_MaxPhasic", "Mean Frequency - P4"}));
  EXPECT_EQ(s.x(1, 0), 4.0);
  EXPECT_EQ(s.x(1, 1), 3.0);
  const std::vector<std::string> bad{"nope"};
  EXPECT_EQ(kind_of([&] { t.select_columns(bad); }), ErrorKind::kSchema);
}

TEST(Scaler, PopulationStatisticsAndApply) {
  FeatureTable t;
  t.columns = {"a", "b"};
  t.x = Matrix{{1.0, 5.0}, {3.0, 5.0}, {5.0, 5.0}, {7.0, 5.0}};
  t.y = {0, 1, 0, 1};
  t.subject = {0, 1, 2, 3};
  t.row_id = {0, 1, 2, 3};
  const auto p = standardize_fit(t);
  EXPECT_DOUBLE_EQ(p.mean[0], 4.0);
  EXPECT_DOUBLE_EQ(p.sd[0], std::sqrt(5.0));
  EXPECT_TRUE(p.degenerate[1]);
  const auto s = standardize_apply(p, t);
  EXPECT_DOUBLE_EQ(s.x(0, 0), -3.0 / std::sqrt(5.0));
  EXPECT_EQ(s.x(2, 1), 5.0);
  EXPECT_EQ(ScalerParams::from_json(p.to_json()), p);
}

TEST(Scaler, StandardizedTrainingColumnsHaveUnitMoments) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto t = random_table(seed, 40, 6, 5);
    const auto s = standardize_apply(standardize_fit(t), t);
    for (Eigen::Index c = 0; c < s.x.cols(); ++c) {
      const double m = s.x.col(c).mean();
      const double var = (s.x.col(c).array() - m).square().mean();
      EXPECT_NEAR(m, 0.0, 1e-12);
      EXPECT_NEAR(var, 1.0, 1e-12);
    }
  }
}

TEST(Scaler, ColumnMismatch) {
  const auto t = random_table(1, 10, 3, 2);
  auto p = standardize_fit(t);
  p.columns.pop_back();
  EXPECT_EQ(kind_of([&] { standardize_apply(p, t); }), ErrorKind::kSchema);
}

TEST(Balance, DownsamplesMajorityKeepingOrder) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto t = random_table(seed, 60, 2, 6);
    if (t.count_label(0) == 0 || t.count_label(1) == 0) continue;
    const auto b = balance_downsample(t, seed);
    const auto minority = std::min(t.count_label(0), t.count_label(1));
    EXPECT_EQ(b.count_label(0), minority);
    EXPECT_EQ(b.count_label(1), minority);
    EXPECT_TRUE(std::is_sorted(b.row_id.begin(), b.row_id.end()));
    for (std::size_t r = 0; r < b.rows(); ++r) {
      EXPECT_TRUE(b.x.row(static_cast<Eigen::Index>(r)) == t.x.row(static_cast<Eigen::Index>(b.row_id[r])));
    }
    const auto again = balance_downsample(t, seed);
    EXPECT_EQ(again.row_id, b.row_id);
  }
}

TEST(Balance, SingleClassFails) {
  auto t = random_table(2, 10, 2, 2);
  std::fill(t.y.begin(), t.y.end(), 1);
  EXPECT_EQ(kind_of([&] { balance_downsample(t, 1); }), ErrorKind::kBalance);
}

TEST(SubjectSplit, DisjointCoveringSubjects) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto t = random_table(seed, 200, 2, 20);
    const auto plan = subject_split(t, 0.7, seed);
    for (int s : plan.train_subjects) EXPECT_FALSE(plan.validation_subjects.contains(s));
    EXPECT_EQ(plan.train_subjects.size() + plan.validation_subjects.size(), t.subjects().size());
    EXPECT_EQ(plan.train_rows.size() + plan.validation_rows.size(), t.rows());
    EXPECT_EQ(plan.train_subjects.size(),
              static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(t.subjects().size()))));
    for (auto r : plan.validation_rows) EXPECT_TRUE(plan.validation_subjects.contains(t.subject[r]));
  }
}

TEST(SubjectSplit, NeedsTwoSubjects) {
  const auto t = random_table(1, 10, 2, 1);
  EXPECT_EQ(kind_of([&] { subject_split(t, 0.7, 1); }), ErrorKind::kSplit);
  const auto u = random_table(1, 10, 2, 5);
  EXPECT_EQ(kind_of([&] { subject_split(u, 1.0, 1); }), ErrorKind::kSplit);
}

TEST(RowSplit, PartitionsRows) {
  const auto t = random_table(4, 50, 2, 3);
  const auto plan = row_split(t, 0.7, 4);
  EXPECT_EQ(plan.train_rows.size(), 35u);
  EXPECT_EQ(plan.validation_rows.size(), 15u);
}

TEST(KFold, FoldsPartitionRowsWithBalancedSizes) {
  for (std::size_t n : {10u, 11u, 97u, 1000u}) {
    for (int k : {2, 3, 10}) {
      const auto plan = kfold_partition(n, k, n * 31 + static_cast<std::size_t>(k));
      std::size_t total = 0, lo = n, hi = 0;
      for (int f = 0; f < k; ++f) {
        const auto rows = plan.fold_rows(f);
        total += rows.size();
        lo = std::min(lo, rows.size());
        hi = std::max(hi, rows.size());
        EXPECT_EQ(rows.size() + plan.rows_outside_fold(f).size(), n);
      }
      EXPECT_EQ(total, n);
      EXPECT_LE(hi - lo, 1u);
    }
  }
}

TEST(KFold, SeededAndValidated) {
  EXPECT_EQ(kfold_partition(100, 10, 3).fold_of_row, kfold_partition(100, 10, 3).fold_of_row);
  EXPECT_NE(kfold_partition(100, 10, 3).fold_of_row, kfold_partition(100, 10, 4).fold_of_row);
  EXPECT_EQ(kind_of([] { kfold_partition(100, 1, 0); }), ErrorKind::kPartition);
  EXPECT_EQ(kind_of([] { kfold_partition(5, 6, 0); }), ErrorKind::kPartition);
}

}  // namespace
}  // namespace trustsense
