#include <gtest/gtest.h>

#include <sstream>

#include "stwind/data.hpp"
#include "stwind/error.hpp"

using namespace stwind;

namespace {

const char* kHeader = "farm_id,lat_or_x,lon_or_y,capacity,timestamp,power_mw\n";

std::string two_farm_csv(double frac) {
  std::ostringstream s;
  s << kHeader;
  const char* ts[] = {"2009-01-01T00:00:00Z", "2009-01-01T00:15:00Z", "2009-01-01T00:30:00Z", "2009-01-01T00:45:00Z"};
  for (const char* id : {"B", "A"})
    for (const char* t : ts) s << id << ",1.5,2.5,10," << t << "," << frac * 10.0 << "\n";
  return s.str();
}

Portfolio synthetic(Index farms, Index steps, double value = 0.5) {
  std::vector<Farm> fs;
  for (Index j = 0; j < farms; ++j) fs.push_back({"F" + std::to_string(j), {double(j), 0.0}, 1.0});
  std::vector<std::int64_t> times;
  for (Index t = 0; t < steps; ++t) times.push_back(1230768000 + 900 * t);
  return Portfolio(fs, times, Eigen::MatrixXd::Constant(farms, steps, value));
}

}  // namespace

TEST(LoadPortfolio, NormalizesByCapacity) {
  std::istringstream in(two_farm_csv(0.5));
  const auto p = parse_portfolio(in);
  EXPECT_EQ(p.n_farms(), 2);
  EXPECT_EQ(p.n_times(), 4);
  EXPECT_TRUE(p.power().isApproxToConstant(0.5));
  EXPECT_EQ(p.farms()[0].id, "A");  // sorted by id
  EXPECT_EQ(p.step_seconds(), 900);
}

TEST(LoadPortfolio, FullCapacityIsOne) {
  std::istringstream in(two_farm_csv(1.0));
  EXPECT_TRUE(parse_portfolio(in).power().isApproxToConstant(1.0));
}

TEST(LoadPortfolio, MissingTimestampNamesFarmAndTime) {
  std::string csv = two_farm_csv(0.5);
  const std::string drop = "A,1.5,2.5,10,2009-01-01T00:30:00Z,5\n";
  csv.erase(csv.find(drop), drop.size());
  std::istringstream in(csv);
  try {
    parse_portfolio(in);
    FAIL() << "no gap error";
  } catch (const GapError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("'A'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("2009-01-01T00:30:00Z"), std::string::npos) << msg;
  }
}

TEST(LoadPortfolio, RowErrors) {
  {
    std::istringstream in(std::string(kHeader) + "A,1,2,10,2009-01-01T00:00:00Z\n");
    try {
      parse_portfolio(in);
      FAIL();
    } catch (const ParseError& e) {
      EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
  }
  {
    std::istringstream in(std::string(kHeader) + "A,1,2,10,2009-01-01T00:00:00Z,1\nA,1,2,10,2009-01-01T00:00:00Z,2\n");
    EXPECT_THROW(parse_portfolio(in), DuplicateError);
  }
  {
    std::istringstream in(std::string(kHeader) + "A,1,2,10,2009-01-01T00:00:00Z,10.2\n");
    EXPECT_THROW(parse_portfolio(in), RangeError);
  }
  {
    // within the 1% tolerance, clipped to 1
    std::istringstream in(std::string(kHeader) + "A,1,2,10,2009-01-01T00:00:00Z,10.05\nA,1,2,10,2009-01-01T00:15:00Z,0\n");
    EXPECT_DOUBLE_EQ(parse_portfolio(in).power()(0, 0), 1.0);
  }
}

TEST(LoadPortfolio, WriteRoundTrip) {
  std::istringstream in(two_farm_csv(0.25));
  const auto p = parse_portfolio(in);
  std::ostringstream out;
  write_portfolio(p, out);
  std::istringstream back(out.str());
  const auto q = parse_portfolio(back);
  EXPECT_EQ(q.farms(), p.farms());
  EXPECT_EQ(q.times(), p.times());
  EXPECT_TRUE(q.power().isApprox(p.power()));
}

TEST(FilterFarms, ZeroFractionThreshold) {
  std::vector<Farm> fs{{"clean", {0, 0}, 1.0}, {"windless", {1, 0}, 1.0}, {"edge", {2, 0}, 1.0}};
  std::vector<std::int64_t> times;
  for (int t = 0; t < 100; ++t) times.push_back(900 * t);
  Eigen::MatrixXd power = Eigen::MatrixXd::Constant(3, 100, 0.4);
  power.row(1).head(11).setZero();  // 0.11 > 0.10
  power.row(2).head(10).setZero();  // exactly 0.10
  const Portfolio p(fs, times, power);
  const auto kept = filter_farms(p, 0.10);
  ASSERT_EQ(kept.n_farms(), 2);
  EXPECT_EQ(kept.farms()[0].id, "clean");
  EXPECT_EQ(kept.farms()[1].id, "edge");
  EXPECT_EQ(filter_farms(p, 1.0).n_farms(), 3);
  power.setZero();
  EXPECT_THROW(filter_farms(Portfolio(fs, times, power), 0.1), EmptyPortfolioError);
}

TEST(MakeWindows, Counts) {
  EXPECT_EQ(make_windows(synthetic(1, 364 * 96), 192, 20, 192).size(), 181u);
  EXPECT_EQ(make_windows(synthetic(1, 212), 192, 20, 5).size(), 1u);
  const auto ws = make_windows(synthetic(2, 212), 192, 20, 192);
  ASSERT_EQ(ws.size(), 1u);
  EXPECT_EQ(ws[0].length(), 192);
  EXPECT_EQ(ws[0].horizon(), 20);
  EXPECT_EQ(ws[0].truth.rows(), 2);
  EXPECT_EQ(ws[0].horizon_times.front(), ws[0].train.times().back() + 900);
  EXPECT_THROW(make_windows(synthetic(1, 211), 192, 20, 192), InsufficientDataError);
}

TEST(MakeWindows, OffsetsFollowStride) {
  const auto p = synthetic(1, 100);
  const auto ws = make_windows(p, 20, 5, 30);
  ASSERT_EQ(ws.size(), 3u);
  EXPECT_EQ(ws[1].offset, 30);
  EXPECT_EQ(ws[2].offset, 60);
  EXPECT_EQ(ws[2].train.times().front(), p.times()[60]);
}

TEST(Rfc3339, ParseAndFormat) {
  EXPECT_EQ(parse_rfc3339("1970-01-01T00:00:00Z"), 0);
  EXPECT_EQ(parse_rfc3339("2009-01-01T00:00:00Z"), 1230768000);
  EXPECT_EQ(parse_rfc3339("2009-01-01T01:00:00+01:00"), 1230768000);
  EXPECT_EQ(parse_rfc3339("2008-12-31T23:00:00-01:00"), 1230768000);
  EXPECT_EQ(format_rfc3339(1230768000 + 900), "2009-01-01T00:15:00Z");
  EXPECT_EQ(parse_rfc3339("2012-02-29T12:34:56Z"), parse_rfc3339(format_rfc3339(parse_rfc3339("2012-02-29T12:34:56Z"))));
  EXPECT_THROW(parse_rfc3339("2009-01-01 00:00:00"), ParseError);
  EXPECT_THROW(parse_rfc3339("2009-13-01T00:00:00Z"), ParseError);
}

TEST(PortfolioTest, InvariantsAndSlices) {
  const auto p = synthetic(3, 10);
  EXPECT_EQ(p.select_farms({2, 0}).farms()[0].id, "F2");
  EXPECT_EQ(p.slice_times(4, 3).n_times(), 3);
  EXPECT_THROW(p.slice_times(8, 3), DimensionError);
  std::vector<std::int64_t> irregular{0, 900, 2700};
  EXPECT_THROW(Portfolio({{"A", {0, 0}, 1.0}}, irregular, Eigen::MatrixXd::Zero(1, 3)), GapError);
  EXPECT_THROW(Portfolio({{"A", {0, 0}, 1.0}}, {0, 900}, Eigen::MatrixXd::Constant(1, 2, 1.5)), RangeError);
}
