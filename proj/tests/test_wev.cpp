#include <gtest/gtest.h>

#include <cstdlib>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "shapkit/error.hpp"
#include "shapkit/wev.hpp"

using namespace shapkit;
using namespace shapkit::wev;

namespace {

std::string data_path(const std::string& name) {
  const char* d = std::getenv("SHAPKIT_DATA");
  return std::string(d ? d : "data") + "/" + name;
}

// Independent range: share of each artifact column times the weight bounds.
std::pair<double, double> oracle_range(const std::vector<oracle::WevRow>& rows, std::size_t r) {
  const double lo_w[4] = {0.27, 0.15, 0.05, 0.15};
  const double hi_w[4] = {0.40, 0.35, 0.15, 0.25};
  double lo = 0, hi = 0;
  for (int a = 0; a < 4; ++a) {
    auto get = [a](const oracle::WevRow& x) { return a == 0 ? x.code : a == 1 ? x.dec : a == 2 ? x.doc : x.fix; };
    double col = 0;
    for (const auto& x : rows) col += static_cast<double>(get(x));
    if (col == 0) continue;
    lo += 100 * get(rows[r]) / col * lo_w[a];
    hi += 100 * get(rows[r]) / col * hi_w[a];
  }
  return {lo, hi};
}

void check_table(const std::string& file, const std::vector<oracle::WevRow>& expect) {
  const auto in = load_wev_file(data_path(file));
  const auto rep = report(in.matrix, WeightRanges{}, in.rewards);
  ASSERT_EQ(rep.rows.size(), expect.size());
  for (std::size_t r = 0; r < expect.size(); ++r) {
    const auto& row = rep.rows[r];
    const auto& e = expect[r];
    EXPECT_EQ(row.role, e.role);
    const auto [lo, hi] = oracle_range(expect, r);
    EXPECT_NEAR(row.range.lo, lo, 1e-12) << e.role;
    EXPECT_NEAR(row.range.hi, hi, 1e-12) << e.role;
    // printed ranges agree to within one display unit
    EXPECT_NEAR(row.range.lo, e.lo, 0.1 + 1e-9) << e.role;
    EXPECT_NEAR(row.range.hi, e.hi, 0.1 + 1e-9) << e.role;
    EXPECT_EQ(row.reward, e.reward);
    EXPECT_EQ(row.adjustment, e.adj) << e.role;
  }
}

ContributionMatrix random_matrix(std::mt19937_64& rng, int roles) {
  ContributionMatrix m;
  std::uniform_int_distribution<int> d(0, 20);
  for (int r = 0; r < roles; ++r) {
    m.roles.push_back("r" + std::to_string(r));
    m.counts.push_back({d(rng), d(rng), d(rng), d(rng)});
  }
  return m;
}

}  // namespace

TEST(WevTables, BmiRows) { check_table("wev_bmi.csv", oracle::kBmi); }
TEST(WevTables, ArtCanvasRows) { check_table("wev_artcanvas.csv", oracle::kArtCanvas); }

TEST(WevTables, TextReportShowsOneDecimal) {
  const auto in = load_wev_file(data_path("wev_bmi.csv"));
  const auto text = report(in.matrix, WeightRanges{}, in.rewards).text();
  EXPECT_NE(text.find("30.9-47.1"), std::string::npos) << text;
  EXPECT_NE(text.find("+5.9"), std::string::npos);
  EXPECT_NE(text.find("-13.3"), std::string::npos);
}

TEST(Wev, MinimalAdjustment) {
  EXPECT_EQ(minimal_adjustment(10, {5, 15}), 0.0);
  EXPECT_EQ(minimal_adjustment(5, {5, 15}), 0.0);
  EXPECT_EQ(minimal_adjustment(2, {5, 15}), 3.0);
  EXPECT_EQ(minimal_adjustment(20, {5, 15}), -5.0);
  EXPECT_THROW(minimal_adjustment(-1, {5, 15}), InvalidArgument);
}

TEST(Wev, Round1HalvesAwayFromZero) {
  EXPECT_EQ(round1(3.75), 3.8);
  EXPECT_EQ(round1(3.7499999999999996), 3.8);
  EXPECT_EQ(round1(-3.75), -3.8);
  EXPECT_EQ(round1(-0.04), 0.0);
  EXPECT_FALSE(std::signbit(round1(-0.04)));
}

TEST(Wev, SingleRoleTakesEveryNonEmptyColumn) {
  ContributionMatrix m{{"solo"}, {{3, 0, 1, 0}}};
  const auto r = wev_range(m, WeightRanges{}, "solo");
  EXPECT_NEAR(r.lo, 27 + 5, 1e-12);
  EXPECT_NEAR(r.hi, 40 + 15, 1e-12);
  EXPECT_THROW(wev_range(m, WeightRanges{}, "ghost"), NotFoundError);
}

TEST(Wev, ZeroColumnContributesNothing) {
  ContributionMatrix m{{"a", "b"}, {{1, 0, 0, 0}, {1, 0, 0, 0}}};
  const auto r = wev_range(m, WeightRanges{}, "a");
  EXPECT_NEAR(r.lo, 13.5, 1e-12);
  EXPECT_NEAR(r.hi, 20, 1e-12);
  ContributionMatrix zero{{"a"}, {{0, 0, 0, 0}}};
  EXPECT_EQ(wev_range(zero, WeightRanges{}, "a").hi, 0.0);
}

TEST(WevProperties, ScaleInvarianceAndColumnSums) {
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 300; ++rep) {
    const auto m = random_matrix(rng, 1 + rep % 7);
    auto scaled = m;
    const int k = 2 + rep % 5;
    for (auto& row : scaled.counts)
      for (auto& c : row) c *= k;
    double lo_sum = 0, hi_sum = 0, lo_expect = 0, hi_expect = 0;
    const WeightRanges w;
    for (int a = 0; a < kArtifacts; ++a) {
      std::int64_t col = 0;
      for (const auto& row : m.counts) col += row[a];
      if (col > 0) {
        lo_expect += 100 * w.w[a].lo;
        hi_expect += 100 * w.w[a].hi;
      }
    }
    for (const auto& role : m.roles) {
      const auto a = wev_range(m, w, role);
      const auto b = wev_range(scaled, w, role);
      EXPECT_NEAR(a.lo, b.lo, 1e-9);
      EXPECT_NEAR(a.hi, b.hi, 1e-9);
      EXPECT_LE(a.lo, a.hi);
      lo_sum += a.lo;
      hi_sum += a.hi;
    }
    EXPECT_NEAR(lo_sum, lo_expect, 1e-9);
    EXPECT_NEAR(hi_sum, hi_expect, 1e-9);
  }
}

TEST(WevProperties, MoreWorkNeverLowersTheRange) {
  std::mt19937_64 rng(10);
  for (int rep = 0; rep < 300; ++rep) {
    auto m = random_matrix(rng, 2 + rep % 5);
    const auto before = wev_range(m, WeightRanges{}, "r0");
    m.counts[0][rep % kArtifacts] += 1 + rep % 3;
    const auto after = wev_range(m, WeightRanges{}, "r0");
    EXPECT_GE(after.lo + 1e-12, before.lo);
    EXPECT_GE(after.hi + 1e-12, before.hi);
  }
}

TEST(WevProperties, AdjustedRewardLandsInRange) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> rew(0, 60);
  for (int rep = 0; rep < 1000; ++rep) {
    const WevRange r{std::uniform_real_distribution<double>(0, 30)(rng), 0};
    const WevRange range{r.lo, r.lo + std::uniform_real_distribution<double>(0, 30)(rng)};
    const double reward = rew(rng);
    const double adj = minimal_adjustment(reward, range);
    EXPECT_GE(reward + adj, range.lo - 1e-9);
    EXPECT_LE(reward + adj, range.hi + 1e-9);
    // nothing smaller would do
    if (adj != 0) EXPECT_TRUE(reward < range.lo || reward > range.hi);
  }
}

TEST(WevWeights, JsonAndValidation) {
  const auto w = load_weights_file(data_path("wev_weights_default.json"));
  EXPECT_EQ(w.to_json(), WeightRanges{}.to_json());
  EXPECT_THROW(WeightRanges::from_json({{"code", {0.5, 0.4}}}), InvalidArgument);
  EXPECT_THROW(WeightRanges::from_json({{"tests", {0.1, 0.2}}}), ParseError);
  EXPECT_THROW(WeightRanges::from_json({{"code", {0.1}}}), ParseError);
  EXPECT_EQ(WeightRanges::from_json({{"doc", {0.1, 0.2}}}).w[2].hi, 0.2);
}

TEST(WevCsv, Errors) {
  EXPECT_THROW(parse_wev_csv(""), ParseError);
  EXPECT_THROW(parse_wev_csv("role,code,dec,doc,fix\nA,1,2,3,4\n"), ParseError);
  EXPECT_THROW(parse_wev_csv("role,code,dec,doc,fix,reward_pct\nA,1,2,3\n"), ParseError);
  EXPECT_THROW(parse_wev_csv("role,code,dec,doc,fix,reward_pct\nA,1,x,3,4,5\n"), ParseError);
  EXPECT_THROW(parse_wev_csv("role,code,dec,doc,fix,reward_pct\nA,1,-2,3,4,5\n"), ParseError);
  EXPECT_THROW(parse_wev_csv("role,code,dec,doc,fix,reward_pct\nA,1,2,3,4,5\nA,1,2,3,4,5\n"), ParseError);
  EXPECT_THROW(parse_wev_csv("role,code,dec,doc,fix,reward_pct\n"), ParseError);
  try {
    parse_wev_csv("role,code,dec,doc,fix,reward_pct\nA,1,2,3,4,5\nB,1,2,3,4,five\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_wev_file("/nonexistent.csv"), NotFoundError);
}

TEST(WevCsv, QuotedRolesAndComments) {
  const auto in = parse_wev_csv("# team\nrole,code,dec,doc,fix,reward_pct\n\"Lead, QA\",1,0,0,0,50\n");
  EXPECT_EQ(in.matrix.roles[0], "Lead, QA");
  const auto rep = report(in.matrix, WeightRanges{}, in.rewards);
  EXPECT_NE(rep.csv().find("\"Lead, QA\""), std::string::npos);
}

TEST(WevCsv, ReportCsvRoundTripsExactly) {
  const auto in = load_wev_file(data_path("wev_artcanvas.csv"));
  const auto rep = report(in.matrix, WeightRanges{}, in.rewards);
  std::istringstream ss(rep.csv());
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, "role,code,dec,doc,fix,wev_lo,wev_hi,reward_pct,adjustment");
  for (const auto& row : rep.rows) {
    ASSERT_TRUE(std::getline(ss, line));
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
    ASSERT_EQ(f.size(), 9u);
    EXPECT_EQ(f[0], row.role);
    EXPECT_EQ(std::stod(f[5]), row.range.lo);
    EXPECT_EQ(std::stod(f[6]), row.range.hi);
    EXPECT_EQ(std::stod(f[8]), row.adjustment);
  }
}

TEST(WevJson, ParsesRoles) {
  const auto in = parse_wev_json({{"roles", {{{"role", "A"}, {"code", 2}, {"reward_pct", 40}}, {{"role", "B"}, {"doc", 1}}}}});
  EXPECT_EQ(in.matrix.counts[0][0], 2);
  EXPECT_EQ(in.rewards[1], 0.0);
  EXPECT_THROW(parse_wev_json({{"people", {}}}), ParseError);
  EXPECT_THROW(report(in.matrix, WeightRanges{}, {1}), InvalidArgument);
}
