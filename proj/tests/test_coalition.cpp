#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "oracles.hpp"
#include "shapkit/coalition.hpp"
#include "shapkit/error.hpp"

using namespace shapkit;

namespace {

CharacteristicGame table_game(int n, std::vector<double> t) { return CharacteristicGame::from_table(n, std::move(t)); }

}  // namespace

TEST(Coalition, BitmaskOps) {
  auto c = Coalition::of({0, 2});
  EXPECT_TRUE(c.contains(0));
  EXPECT_FALSE(c.contains(1));
  EXPECT_EQ(c.size(), 2);
  EXPECT_EQ(c.with(1).size(), 3);
  EXPECT_EQ(c.without(0), Coalition::of({2}));
  EXPECT_EQ(Coalition::grand(3).mask(), 7u);
  EXPECT_EQ(c.members(), (std::vector<int>{0, 2}));
}

TEST(Coalition, GameRejectsNonzeroEmptyValue) {
  EXPECT_THROW(CharacteristicGame(2, [](Coalition c) { return c.mask() == 0 ? 1.0 : 2.0; }), InvalidArgument);
  EXPECT_THROW(table_game(2, {0, 1, 2}), InvalidArgument);
  EXPECT_THROW(CharacteristicGame(0, [](Coalition) { return 0.0; }), InvalidArgument);
}

TEST(Shapley, WeightsMatchFactorialFormula) {
  for (int n = 1; n <= 20; ++n) {
    for (int s = 0; s < n; ++s) {
      const double expect = oracle::factorial(s) * oracle::factorial(n - s - 1) / oracle::factorial(n);
      EXPECT_NEAR(shapley_weight(s, n), expect, 1e-15 * std::max(1.0, expect)) << s << "/" << n;
    }
  }
  EXPECT_THROW(shapley_weight(3, 3), OutOfRange);
  EXPECT_THROW(shapley_weight(-1, 3), OutOfRange);
}

TEST(Shapley, EscapeRoomGame) {
  const auto [a, b] = shapley_two_agent(0, 0, 9);
  EXPECT_EQ(a, 4.5);
  EXPECT_EQ(b, 4.5);
  const auto phi = shapley_exact(table_game(2, {0, 0, 0, 9}));
  EXPECT_EQ(phi.payoffs, (std::vector<double>{4.5, 4.5}));
}

TEST(Shapley, TwoAgentClosedForm) {
  const auto [a, b] = shapley_two_agent(2, 3, 10);
  EXPECT_DOUBLE_EQ(a, 0.5 * 2 + 0.5 * (10 - 3));
  EXPECT_DOUBLE_EQ(b, 0.5 * 3 + 0.5 * (10 - 2));
}

TEST(Shapley, SingletonAndAdditive) {
  EXPECT_EQ(shapley_exact(table_game(1, {0, 7})).payoffs, std::vector<double>{7});
  // additive: v(C) = sum of weights
  const std::vector<double> w{2, 3.5, 5};
  CharacteristicGame g(3, [&](Coalition c) {
    double s = 0;
    for (int i : c.members()) s += w[i];
    return s;
  });
  const auto phi = shapley_exact(g);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(phi[i], w[i], 1e-12);
}

TEST(Shapley, MarginalContributionErrors) {
  auto g = table_game(2, {0, 1, 2, 4});
  EXPECT_EQ(marginal_contribution(g, 1, Coalition::of({0})), 3.0);
  EXPECT_THROW(marginal_contribution(g, 0, Coalition::of({0})), InvalidArgument);
  EXPECT_THROW(marginal_contribution(g, 2, Coalition{}), OutOfRange);
}

TEST(Shapley, ExactMatchesPermutationOracle) {
  std::mt19937_64 rng(2024);
  for (int n = 1; n <= 6; ++n) {
    for (int rep = 0; rep < 20; ++rep) {
      const auto t = oracle::random_table(n, rng);
      const auto expect = oracle::permutation_shapley(n, [&](std::uint64_t m) { return t[m]; });
      const auto phi = shapley_exact(table_game(n, t));
      for (int i = 0; i < n; ++i) EXPECT_NEAR(phi[i], expect[i], 1e-9);
    }
  }
}

// Efficiency, symmetry, dummy and additivity on random games.
TEST(ShapleyProperties, AxiomsOnRandomGames) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> pick_n(2, 8);
  for (int rep = 0; rep < 1000; ++rep) {
    const int n = pick_n(rng);
    auto t = oracle::random_table(n, rng);
    const std::size_t full = (std::size_t{1} << n) - 1;

    // agents 0 and 1 symmetric; the last agent a dummy when n >= 3
    const int dummy = n - 1;
    for (std::size_t m = 0; m <= full; ++m) {
      if ((m & 1) && !(m & 2)) t[m] = t[(m & ~std::size_t{1}) | 2];
    }
    if (dummy > 1) {
      for (std::size_t m = 0; m <= full; ++m)
        if (m >> dummy & 1) t[m] = t[m & ~(std::size_t{1} << dummy)];
    }

    const auto g = table_game(n, t);
    const auto phi = shapley_exact(g);
    EXPECT_NEAR(phi.total(), t[full], 1e-9);
    EXPECT_NEAR(phi[0], phi[1], 1e-9);
    if (dummy > 1) EXPECT_NEAR(phi[dummy], 0.0, 1e-9);

    const auto t2 = oracle::random_table(n, rng);
    const auto h = table_game(n, t2);
    const auto sum = shapley_exact(g + h);
    const auto phi2 = shapley_exact(h);
    for (int i = 0; i < n; ++i) EXPECT_NEAR(sum[i], phi[i] + phi2[i], 1e-9);
  }
}

TEST(Shapley, ExactCapRaisesResourceLimit) {
  CharacteristicGame g(17, [](Coalition c) { return static_cast<double>(c.size()); });
  EXPECT_THROW(shapley_exact(g), ResourceLimitError);
  EXPECT_NO_THROW(shapley_exact(CharacteristicGame(3, [](Coalition c) { return double(c.size()); }), 3));
}

TEST(ShapleySampled, DeterministicAndThreadIndependent) {
  std::mt19937_64 rng(3);
  const auto t = oracle::random_table(8, rng);
  const auto g = table_game(8, t);
  const auto a = shapley_sampled(g, 20000, 99, 1);
  const auto b = shapley_sampled(g, 20000, 99, 4);
  const auto c = shapley_sampled(g, 20000, 99, 0);
  EXPECT_EQ(a.payoffs, b.payoffs);
  EXPECT_EQ(a.payoffs, c.payoffs);
  const auto d = shapley_sampled(g, 20000, 100, 4);
  EXPECT_NE(a.payoffs, d.payoffs);
}

TEST(ShapleySampled, ConvergesToExact) {
  std::mt19937_64 rng(5);
  const auto t = oracle::random_table(8, rng);
  const auto g = table_game(8, t);
  const auto exact = shapley_exact(g);
  const auto est = shapley_sampled(g, 200000, 1);
  for (int i = 0; i < 8; ++i) EXPECT_NEAR(est[i], exact[i], 0.1);
  // each sampled ordering is efficient, so the estimate is too
  EXPECT_NEAR(est.total(), t.back(), 1e-9);
}

TEST(ShapleySampled, TwoPlayerPermutationsAreExact) {
  // with n = 2 each ordering is one of two; efficiency forces the sum exactly
  const auto g = table_game(2, {0, 0, 0, 9});
  const auto est = shapley_sampled(g, 100000, 0);
  EXPECT_NEAR(est[0], 4.5, 0.05);
  EXPECT_THROW(shapley_sampled(g, 0, 0), InvalidArgument);
}

TEST(SidePayments, EscapeRoomSingleTransfer) {
  const auto plan = side_payments(Allocation{{-1, 10}}, Allocation{{4.5, 4.5}});
  EXPECT_EQ(plan.transfers[1][0], 5.5);
  EXPECT_EQ(plan.transfers[0][1], 0.0);
  EXPECT_EQ(plan.volume(), 5.5);
  EXPECT_EQ(plan.net(), (std::vector<double>{5.5, -5.5}));
}

TEST(SidePayments, EqualAllocationsGiveEmptyPlan) {
  const auto plan = side_payments(Allocation{{1, 2, 3}}, Allocation{{1, 2, 3}});
  EXPECT_TRUE(plan.empty());
}

TEST(SidePayments, MismatchedTotalsAreInfeasible) {
  EXPECT_THROW(side_payments(Allocation{{1, 2}}, Allocation{{1, 3}}), InfeasibleError);
  EXPECT_THROW(side_payments(Allocation{{1, 2}}, Allocation{{3}}), InfeasibleError);
}

TEST(SidePaymentsProperties, PlanReachesTargetWithMinimalVolume) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(-20, 20);
  for (int rep = 0; rep < 500; ++rep) {
    const int n = 2 + rep % 7;
    std::vector<double> a(n), b(n);
    double sa = 0, sb = 0;
    for (int i = 0; i < n; ++i) {
      a[i] = d(rng);
      b[i] = d(rng);
      sa += a[i];
      sb += b[i];
    }
    for (int i = 0; i < n; ++i) b[i] += (sa - sb) / n;
    const auto plan = side_payments(Allocation{a}, Allocation{b});
    const auto net = plan.net();
    double surplus = 0;
    for (int i = 0; i < n; ++i) {
      EXPECT_NEAR(a[i] + net[i], b[i], 1e-8);
      surplus += std::max(0.0, a[i] - b[i]);
      for (int j = 0; j < n; ++j) EXPECT_GE(plan.transfers[i][j], 0.0);
    }
    // nobody both pays and receives, so volume equals total surplus
    EXPECT_NEAR(plan.volume(), surplus, 1e-8);
  }
}

TEST(GameFile, ParsesEscapeRoomFile) {
  const auto g = load_game_json(R"({"n": 2, "values": {"": 0, "0": 0, "1": 0, "0,1": 9}})");
  EXPECT_EQ(g.n(), 2);
  EXPECT_EQ(g.value(Coalition::grand(2)), 9.0);
  EXPECT_EQ(shapley_exact(g).payoffs, (std::vector<double>{4.5, 4.5}));
}

TEST(GameFile, MalformedInputsAreParseErrors) {
  EXPECT_THROW(load_game_json("{\"n\": 2, \"values\": "), ParseError);
  EXPECT_THROW(load_game_json(R"({"values": {}})"), ParseError);
  EXPECT_THROW(load_game_json(R"({"n": 2, "values": {"": 0, "0": 1, "1": 1}})"), ParseError);
  EXPECT_THROW(load_game_json(R"({"n": 2, "values": {"": 0, "0": 1, "1": 1, "1,0": 2}})"), ParseError);
  EXPECT_THROW(load_game_json(R"({"n": 2, "values": {"": 0, "0": 1, "1": 1, "0,1": "x"}})"), ParseError);
  EXPECT_THROW(load_game_file("/nonexistent/game.json"), Error);
}

TEST(GameFile, ParseErrorReportsPosition) {
  try {
    load_game_json("{\n  \"n\": 2,\n  \"values\": [1,,]\n}");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Shapley, EscapeRoomUnderOneMillisecond) {
  const auto g = table_game(2, {0, 0, 0, 9});
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 100; ++i) (void)shapley_exact(g);
  const auto dt = std::chrono::steady_clock::now() - t0;
  EXPECT_LT((std::chrono::duration<double, std::milli>(dt).count() / 100), 1.0);
}
