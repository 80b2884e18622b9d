#include "helpers.hpp"

using namespace kdlab;
using kdtest::error_kind;
using kdtest::parse;

namespace {

const std::string kHeader = "date,ticker,open,high,low,close,volume\n";

std::string row(const std::string& date, const std::string& t, double close) {
  std::ostringstream s;
  s << date << ',' << t << ',' << close << ',' << close << ',' << close << ',' << close << ",100\n";
  return s.str();
}

MarketPanel gap_panel() {
  // B lacks the middle date
  return parse(kHeader + row("2010-01-04", "A", 10) + row("2010-01-05", "A", 11) + row("2010-01-06", "A", 12) +
               row("2010-01-04", "B", 20) + row("2010-01-06", "B", 22));
}

}  // namespace

TEST(LoadCsv, CompleteFileRoundTrips) {
  auto p = parse(kHeader + row("2010-01-04", "AAPL", 1) + row("2010-01-05", "AAPL", 2) + row("2010-01-06", "AAPL", 3) +
                 row("2010-01-04", "MSFT", 4) + row("2010-01-05", "MSFT", 5) + row("2010-01-06", "MSFT", 6));
  EXPECT_EQ(p.num_assets(), 2u);
  EXPECT_EQ(p.num_dates(), 3u);
  EXPECT_TRUE(p.rectangular());
  EXPECT_EQ(p.assets[1], "MSFT");
  EXPECT_DOUBLE_EQ(p.close(1, 2), 6.0);

  std::ostringstream out;
  write_ohlcv_csv(p, out);
  auto again = parse(out.str());
  EXPECT_EQ(again.assets, p.assets);
  EXPECT_EQ(again.dates, p.dates);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(again.close(a, t), p.close(a, t));
}

TEST(LoadCsv, DuplicateRowIsRejectedWithLine) {
  try {
    parse(kHeader + row("2010-01-04", "AAPL", 1) + row("2010-01-04", "AAPL", 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Duplicate);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(LoadCsv, ZeroCloseNamesTheRow) {
  try {
    parse(kHeader + row("2010-01-04", "AAPL", 1) + "2010-01-05,AAPL,1,1,1,0,100\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Validation);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(LoadCsv, MalformedRowsAndHeaders) {
  EXPECT_EQ(error_kind([] { parse(""); }), ErrorKind::Parse);
  EXPECT_EQ(error_kind([] { parse("date,ticker,close\n"); }), ErrorKind::Parse);
  EXPECT_EQ(error_kind([] { parse(kHeader + "2010-01-04,A,1,1,1\n"); }), ErrorKind::Parse);
  EXPECT_EQ(error_kind([] { parse(kHeader + "2010-13-04,A,1,1,1,1,1\n"); }), ErrorKind::Parse);
  EXPECT_EQ(error_kind([] { parse(kHeader + "2010-01-04,A,1,1,1,x,1\n"); }), ErrorKind::Parse);
  EXPECT_EQ(error_kind([] { load_ohlcv_csv("/nonexistent/file.csv"); }), ErrorKind::Io);
}

TEST(AlignAndClean, DropAssetRemovesIncompleteAsset) {
  auto p = align_and_clean(gap_panel(), MissingPolicy::DropAsset);
  ASSERT_EQ(p.num_assets(), 1u);
  EXPECT_EQ(p.assets[0], "A");
  EXPECT_EQ(p.num_dates(), 3u);
}

TEST(AlignAndClean, ForwardFillCopiesPriorRecord) {
  auto p = align_and_clean(gap_panel(), MissingPolicy::ForwardFill);
  ASSERT_EQ(p.num_assets(), 2u);
  EXPECT_TRUE(p.rectangular());
  EXPECT_DOUBLE_EQ(p.close(1, 1), 20.0);
  EXPECT_DOUBLE_EQ(p.close(1, 2), 22.0);
}

TEST(AlignAndClean, NothingToFillFromIsEmpty) {
  // every asset misses the first date of the union
  auto p = parse(kHeader + row("2010-01-04", "A", 1) + row("2010-01-05", "A", 1) + row("2010-01-05", "B", 1) +
                 row("2010-01-06", "B", 1));
  p.bars[0][0].reset();
  EXPECT_EQ(error_kind([&] { align_and_clean(p, MissingPolicy::ForwardFill); }), ErrorKind::EmptyPanel);
}

TEST(Normalize, DividesByFirstClose) {
  auto p = normalize_prices(kdtest::panel_from_closes({{50, 55, 60}, {10, 20, 5}, {1000, 1000, 1000}}));
  EXPECT_DOUBLE_EQ(p.close(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(p.close(0, 1), 1.1);
  EXPECT_DOUBLE_EQ(p.close(0, 2), 1.2);
  EXPECT_DOUBLE_EQ(p.close(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(p.close(2, 0), 1.0);
  EXPECT_DOUBLE_EQ(p.bar(0, 0).volume, 1e6);
}

TEST(Normalize, SingleDateAndIdempotence) {
  auto one = normalize_prices(kdtest::panel_from_closes({{7}, {9}}));
  EXPECT_EQ(one.close(0, 0), 1.0);
  EXPECT_EQ(one.close(1, 0), 1.0);
  std::mt19937_64 rng(3);
  auto p = kdtest::random_panel(rng, 4, 30);
  auto once = normalize_prices(p);
  auto twice = normalize_prices(once);
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t t = 0; t < 30; ++t) EXPECT_EQ(once.close(a, t), twice.close(a, t));
}

TEST(Returns, SimpleAndLogExamples) {
  EXPECT_NEAR(compute_returns(kdtest::panel_from_closes({{100, 110}}), ReturnKind::Simple).values[0][0], 0.1, 1e-15);
  auto flat = compute_returns(kdtest::panel_from_closes({{100, 100, 100}}), ReturnKind::Log);
  EXPECT_EQ(flat.values[0][0], 0.0);
  EXPECT_EQ(flat.values[1][0], 0.0);
  auto r = compute_returns(kdtest::panel_from_closes({{100, 110, 99}}), ReturnKind::Simple);
  EXPECT_NEAR(r.values[0][0], 0.10, 1e-15);
  EXPECT_NEAR(r.values[1][0], -0.10, 1e-15);
  EXPECT_EQ(r.rows(), 2u);
  EXPECT_EQ(error_kind([] { compute_returns(kdtest::panel_from_closes({{1}}), ReturnKind::Simple); }),
            ErrorKind::Length);
}

TEST(Returns, RelativeExamples) {
  EXPECT_DOUBLE_EQ(price_relatives(kdtest::panel_from_closes({{100, 110}})).values[0][0], 1.1);
  EXPECT_EQ(price_relatives(kdtest::panel_from_closes({{3, 3, 3}})).values[1][0], 1.0);
  EXPECT_EQ(price_relatives(kdtest::panel_from_closes({{100, 50}})).values[0][0], 0.5);
}

TEST(Returns, CompoundingRecoversPriceRatioAndRelativesAgree) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = kdtest::random_panel(rng, 3, 200);
    auto r = compute_returns(p, ReturnKind::Simple);
    auto x = price_relatives(p);
    for (std::size_t a = 0; a < 3; ++a) {
      double growth = 1.0;
      for (std::size_t t = 0; t < r.rows(); ++t) {
        growth *= 1.0 + r.values[t][a];
        ASSERT_EQ(x.values[t][a], r.values[t][a] + 1.0);
      }
      const double ratio = p.close(a, 199) / p.close(a, 0);
      ASSERT_LE(std::abs(growth - ratio) / ratio, 1e-12);
    }
  }
}

TEST(Split, CountsAndCoverage) {
  auto p = kdtest::panel_from_closes({std::vector<double>(10, 1.0)});
  auto parts = split(p, p.dates[5], p.dates[7]);
  EXPECT_EQ(parts.train.num_dates(), 6u);
  EXPECT_EQ(parts.validation.num_dates(), 2u);
  EXPECT_EQ(parts.trading.num_dates(), 2u);
  std::vector<Date> joined = parts.train.dates;
  joined.insert(joined.end(), parts.validation.dates.begin(), parts.validation.dates.end());
  joined.insert(joined.end(), parts.trading.dates.begin(), parts.trading.dates.end());
  EXPECT_EQ(joined, p.dates);
}

TEST(Split, EmptyPieceAndRangeErrors) {
  auto p = kdtest::panel_from_closes({std::vector<double>(10, 1.0)});
  EXPECT_EQ(error_kind([&] { split(p, p.dates[9], Date{std::chrono::year{2030} / 1 / 1}); }), ErrorKind::Range);
  EXPECT_EQ(error_kind([&] { split(p, p.dates[8], p.dates[9]); }), ErrorKind::EmptySplit);
  EXPECT_EQ(error_kind([&] { split(p, Date{std::chrono::year{2000} / 1 / 1}, p.dates[5]); }), ErrorKind::Range);
  EXPECT_EQ(error_kind([&] { split(p, p.dates[6], p.dates[5]); }), ErrorKind::Range);
}

TEST(Split, BoundaryBetweenTradingDaysSnapsDown) {
  // 2021-03-05 is a Friday; the following Saturday is not a trading day
  auto p = kdtest::panel_from_closes({std::vector<double>(10, 1.0)});
  ASSERT_EQ(format_date(p.dates[4]), "2021-03-05");
  auto parts = split(p, Date{std::chrono::year{2021} / 3 / 6}, p.dates[7]);
  EXPECT_EQ(parts.train.num_dates(), 5u);
  EXPECT_EQ(parts.train.dates.back(), p.dates[4]);
}
