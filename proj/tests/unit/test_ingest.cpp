#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "volsynth/ingest.hpp"

namespace {

using namespace volsynth;
using namespace volsynth::ingest;

FeatureFrame parse(const std::string& csv) {
  std::istringstream in(csv);
  return parse_dataset(in, "close");
}

FeatureFrame daily_frame(Date first, std::size_t n) {
  std::vector<Date> dates;
  for (std::size_t i = 0; i < n; ++i) dates.push_back(first.plus_days(static_cast<long>(i)));
  FeatureFrame f(dates, "x");
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i);
  f.set_column("x", x);
  return f;
}

TEST(Ingest, ThreeRowFileHasOneColumn) {
  auto f = parse("date,close\n2020-01-01,1\n2020-01-02,2\n2020-01-03,3\n");
  EXPECT_EQ(f.rows(), 3u);
  ASSERT_EQ(f.column_names().size(), 1u);
  EXPECT_EQ(f.column_names()[0], "close");
  EXPECT_EQ(f.values("close"), (std::vector<double>{1, 2, 3}));
}

TEST(Ingest, DuplicateDateIsRejected) {
  EXPECT_ERROR_CODE(parse("date,close\n2020-01-01,1\n2020-01-01,2\n"), ErrorCode::kDuplicateDate);
}

TEST(Ingest, NonMonotoneDateIsRejected) {
  EXPECT_ERROR_CODE(parse("date,close\n2020-01-02,1\n2020-01-01,2\n"), ErrorCode::kNonMonotoneDate);
}

TEST(Ingest, GapIsRejected) {
  EXPECT_ERROR_CODE(parse("date,close\n2020-01-01,1\n2020-01-03,2\n"), ErrorCode::kDateGap);
}

TEST(Ingest, MissingDateColumnIsRejected) {
  EXPECT_ERROR_CODE(parse("day,close\n2020-01-01,1\n"), ErrorCode::kMissingDateColumn);
}

TEST(Ingest, MissingFileIsRejected) {
  EXPECT_ERROR_CODE(load_dataset("/nonexistent/volsynth.csv", "close"), ErrorCode::kMissingFile);
}

TEST(Ingest, ErrorCategoriesAreDistinct) {
  std::set<ErrorCode> codes{ErrorCode::kMissingFile, ErrorCode::kMissingDateColumn,
                            ErrorCode::kDuplicateDate, ErrorCode::kNonMonotoneDate};
  EXPECT_EQ(codes.size(), 4u);
}

TEST(Ingest, UnparseableCellBecomesMissing) {
  auto f = parse("date,close\n2020-01-01,1\n2020-01-02,abc\n2020-01-03,3\n");
  const auto& c = f.column("close");
  EXPECT_TRUE(c[0].has_value());
  EXPECT_FALSE(c[1].has_value());
  EXPECT_DOUBLE_EQ(*c[2], 3.0);
}

TEST(Ingest, BackfillLeadingGap) {
  auto f = daily_frame(Date::from_ymd(2020, 1, 1), 4);
  f.set_column("a", Column{std::nullopt, std::nullopt, 5.0, 7.0});
  auto out = fill_missing(f, FillPolicy{{"a"}, {}});
  EXPECT_EQ(out.values("a"), (std::vector<double>{5, 5, 5, 7}));
}

TEST(Ingest, BackfillInteriorCarriesForward) {
  auto f = daily_frame(Date::from_ymd(2020, 1, 1), 4);
  f.set_column("a", Column{1.0, std::nullopt, 3.0, std::nullopt});
  auto out = fill_missing(f, FillPolicy{{"a"}, {}});
  EXPECT_EQ(out.values("a"), (std::vector<double>{1, 1, 3, 3}));
}

TEST(Ingest, ZeroFill) {
  auto f = daily_frame(Date::from_ymd(2020, 1, 1), 3);
  f.set_column("w", Column{std::nullopt, std::nullopt, 3.0});
  auto out = fill_missing(f, FillPolicy{{}, {"w"}});
  EXPECT_EQ(out.values("w"), (std::vector<double>{0, 0, 3}));
}

TEST(Ingest, CompleteColumnUnchanged) {
  auto f = daily_frame(Date::from_ymd(2020, 1, 1), 3);
  EXPECT_EQ(fill_missing(f, FillPolicy{}), f);
}

TEST(Ingest, AllMissingBackfillFails) {
  auto f = daily_frame(Date::from_ymd(2020, 1, 1), 2);
  f.set_column("a", Column{std::nullopt, std::nullopt});
  EXPECT_ERROR_CODE(fill_missing(f, FillPolicy{{"a"}, {}}), ErrorCode::kAllMissing);
}

TEST(Ingest, OverlappingPoliciesFail) {
  auto f = daily_frame(Date::from_ymd(2020, 1, 1), 2);
  EXPECT_ERROR_CODE(fill_missing(f, FillPolicy{{"x"}, {"x"}}), ErrorCode::kFillPolicy);
}

TEST(Ingest, UncoveredMissingColumnFails) {
  auto f = daily_frame(Date::from_ymd(2020, 1, 1), 2);
  f.set_column("a", Column{std::nullopt, 1.0});
  EXPECT_ERROR_CODE(fill_missing(f, FillPolicy{}), ErrorCode::kFillPolicy);
}

TEST(IngestProperty, FillIsIdempotentAndComplete) {
  std::mt19937_64 rng(11);
  std::bernoulli_distribution missing(0.3);
  std::uniform_real_distribution<double> value(-5, 5);
  for (int trial = 0; trial < 50; ++trial) {
    auto f = daily_frame(Date::from_ymd(2020, 1, 1), 30);
    Column a(30), b(30);
    for (std::size_t i = 0; i < 30; ++i) {
      if (!missing(rng)) a[i] = value(rng);
      if (!missing(rng)) b[i] = value(rng);
    }
    a[17] = 1.0;
    f.set_column("a", a);
    f.set_column("b", b);
    FillPolicy p{{"a"}, {"b"}};
    auto once = fill_missing(f, p);
    EXPECT_FALSE(once.has_missing("a"));
    EXPECT_FALSE(once.has_missing("b"));
    EXPECT_EQ(fill_missing(once, p), once);
  }
}

TEST(Ingest, PaperSplitRowCounts) {
  const Date first = Date::from_ymd(2016, 1, 2);
  const Date last = Date::from_ymd(2021, 9, 21);
  auto f = daily_frame(first, static_cast<std::size_t>(last - first + 1));
  auto s = split_by_date(f, SplitBoundaries{Date::from_ymd(2020, 1, 2), Date::from_ymd(2020, 11, 11), last});
  EXPECT_EQ(s.train.rows(), 1462u);
  EXPECT_EQ(s.validation.rows(), 314u);
  EXPECT_EQ(s.test.rows(), 314u);
  EXPECT_EQ(s.validation.dates().front(), Date::from_ymd(2020, 1, 3));
  EXPECT_EQ(s.test.dates().front(), Date::from_ymd(2020, 11, 12));
}

TEST(IngestProperty, SplitsConcatenateToPrefix) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 10 + rng() % 50;
    auto f = daily_frame(Date::from_ymd(2019, 3, 1), n);
    std::vector<std::size_t> cuts{rng() % (n - 2), 0, 0};
    cuts[1] = cuts[0] + 1 + rng() % (n - cuts[0] - 2);
    cuts[2] = cuts[1] + 1 + rng() % (n - cuts[1] - 1);
    SplitBoundaries b{f.dates()[cuts[0]], f.dates()[cuts[1]], f.dates()[cuts[2]]};
    auto s = split_by_date(f, b);
    EXPECT_EQ(s.train.rows() + s.validation.rows() + s.test.rows(), cuts[2] + 1);
    std::vector<double> joined;
    for (const auto* part : {&s.train, &s.validation, &s.test}) {
      auto v = part->values("x");
      joined.insert(joined.end(), v.begin(), v.end());
    }
    auto expected = f.slice(0, cuts[2] + 1).values("x");
    EXPECT_EQ(joined, expected);
  }
}

TEST(Ingest, SplitOutsideRangeFails) {
  auto f = daily_frame(Date::from_ymd(2020, 1, 1), 10);
  EXPECT_ERROR_CODE(split_by_date(f, SplitBoundaries{Date::from_ymd(2020, 1, 3), Date::from_ymd(2020, 1, 5),
                                                     Date::from_ymd(2020, 2, 1)}),
                    ErrorCode::kBoundary);
  EXPECT_ERROR_CODE(split_by_date(f, SplitBoundaries{Date::from_ymd(2020, 1, 5), Date::from_ymd(2020, 1, 3),
                                                     Date::from_ymd(2020, 1, 8)}),
                    ErrorCode::kBoundary);
}

TEST(IngestProperty, CsvRoundTripIsExact) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> value(-1e6, 1e6);
  std::bernoulli_distribution missing(0.2);
  auto f = daily_frame(Date::from_ymd(2018, 12, 25), 40);
  Column c(40);
  for (auto& cell : c) {
    if (!missing(rng)) cell = value(rng) / 3.0;
  }
  f.set_column("noisy", c);
  f.set_column("tiny", std::vector<double>(40, 1e-300));
  std::ostringstream out;
  write_csv(f, out);
  std::istringstream in(out.str());
  auto back = parse_dataset(in, "x");
  EXPECT_EQ(back, f);
}

TEST(Ingest, MergeJoinsByDate) {
  auto base = daily_frame(Date::from_ymd(2020, 1, 1), 5);
  auto extra = daily_frame(Date::from_ymd(2020, 1, 3), 5);
  extra.drop_column("x");
  extra.set_column("w", std::vector<double>{10, 11, 12, 13, 14});
  auto m = merge_columns(base, extra);
  EXPECT_EQ(m.rows(), 5u);
  const auto& w = m.column("w");
  EXPECT_FALSE(w[0].has_value());
  EXPECT_FALSE(w[1].has_value());
  EXPECT_DOUBLE_EQ(*w[2], 10.0);
  EXPECT_DOUBLE_EQ(*w[4], 12.0);
}

TEST(Ingest, FixtureLoads) {
  auto f = load_dataset(testutil::data_dir() / "fixture" / "dataset.csv", "close");
  EXPECT_EQ(f.rows(), 300u);
  EXPECT_TRUE(f.has_missing("exchange_inflow"));
  EXPECT_FALSE(f.has_missing("close"));
}

}  // namespace
