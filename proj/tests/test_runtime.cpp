#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "shapkit/escape_room.hpp"
#include "shapkit/raid_battle.hpp"
#include "shapkit/runtime.hpp"

using namespace shapkit;

namespace {

PipelineConfig pipe(PipelineVariant v) {
  PipelineConfig c;
  c.variant = v;
  return c;
}

EpisodeResult escape_run(const std::string& a, const std::string& b, PipelineVariant v, std::uint64_t seed = 0) {
  escape::EscapeRoomEnv env;
  return run_episode(env, {make_policy(a), make_policy(b)}, pipe(v), seed);
}

EpisodeResult raid_run(const std::vector<std::string>& names, PipelineVariant v, std::uint64_t seed) {
  raid::RaidBattleEnv env;
  std::vector<PolicyPtr> ps;
  for (const auto& n : names) ps.push_back(make_policy(n));
  return run_episode(env, ps, pipe(v), seed);
}

// Throws the given error from the chosen hook.
class Faulty final : public Policy {
 public:
  enum class Where { kNegotiate, kSettle, kActAtTurn2 };
  explicit Faulty(Where w) : where_(w) {}
  std::string name() const override { return "faulty"; }
  std::optional<std::string> act(const ActContext& ctx) override {
    if (where_ == Where::kActAtTurn2 && ctx.env.turn() == 2) throw BackendError("model unreachable", 3);
    return inner_->act(ctx);
  }
  std::optional<NegotiationMessage> negotiate(const PricingContext&) override {
    if (where_ == Where::kNegotiate) throw GrammarError("unrecognized message template", "sure, deal");
    return std::nullopt;
  }
  std::optional<NegotiationMessage> settle(const SettlementContext& ctx) override {
    if (where_ == Where::kSettle) throw FrameError("reply has no <s>...</s> message");
    return inner_->settle(ctx);
  }

 private:
  Where where_;
  PolicyPtr inner_ = shapley_negotiator();
};

class Cheater final : public Policy {
 public:
  std::string name() const override { return "cheater"; }
  std::optional<std::string> act(const ActContext&) override { return "Heal"; }
};

}  // namespace

TEST(Pipeline, Names) {
  for (auto v : {PipelineVariant::kLlmOnly, PipelineVariant::kNeg, PipelineVariant::kSts, PipelineVariant::kSc})
    EXPECT_EQ(parse_pipeline(to_string(v)), v);
  EXPECT_THROW(parse_pipeline("sc"), InvalidArgument);
  EXPECT_EQ(PipelineConfig::from_json("STS").variant, PipelineVariant::kSts);
  const auto c = PipelineConfig::from_json({{"variant", "SC"}, {"counterfactual", "resimulate"}});
  EXPECT_EQ(c.counterfactual, CounterfactualMode::kResimulate);
  EXPECT_EQ(PipelineConfig::from_json(c.to_json()).to_json(), c.to_json());
  EXPECT_THROW(PipelineConfig::from_json({{"max_negotiation_rounds", 0}}), InvalidArgument);
  EXPECT_THROW(PipelineConfig::from_json({{"reasoner", "oracle"}}), InvalidArgument);
  EXPECT_THROW(PipelineConfig::from_json(3), ParseError);
}

TEST(EscapeEpisodes, GreedyWithoutTalkBothFail) {
  const auto r = escape_run("greedy_selfish", "greedy_selfish", PipelineVariant::kLlmOnly);
  EXPECT_EQ(r.settlement.allocation.payoffs, (std::vector<double>{-1, -1}));
  EXPECT_EQ(r.settlement.allocation.payoffs, r.settlement.realized.payoffs);
  EXPECT_TRUE(r.transcript.empty());
  EXPECT_TRUE(r.settlement.transfers.empty());
}

TEST(EscapeEpisodes, IntentsAloneCoordinateButStayUnfair) {
  const auto r = escape_run("shapley_negotiator", "shapley_negotiator", PipelineVariant::kNeg);
  EXPECT_EQ(r.trajectory.steps[0].actions, (std::vector<std::optional<std::string>>{"Door", "Lever"}));
  EXPECT_EQ(r.settlement.allocation.payoffs, (std::vector<double>{10, -1}));
  ASSERT_EQ(r.transcript.size(), 2u);
  EXPECT_EQ(r.transcript[0]["raw"], "<s>I propose to open the door</s>");
  EXPECT_EQ(r.transcript[1]["raw"], "<s>I propose to pull the lever</s>");
}

TEST(EscapeEpisodes, PricedAdjustmentEqualizes) {
  const auto r = escape_run("shapley_negotiator", "shapley_negotiator", PipelineVariant::kSts);
  EXPECT_EQ(r.settlement.realized.payoffs, (std::vector<double>{10, -1}));
  EXPECT_EQ(r.settlement.allocation.payoffs, (std::vector<double>{4.5, 4.5}));
  EXPECT_EQ(r.settlement.transfers.transfers[0][1], 5.5);
  bool offered = false;
  for (const auto& m : r.transcript) offered |= m["parsed"]["type"] == "transfer" && m["parsed"]["amount"] == 5.5;
  EXPECT_TRUE(offered);
}

TEST(EscapeEpisodes, ShapleySettlementAgrees) {
  const auto r = escape_run("shapley_negotiator", "shapley_negotiator", PipelineVariant::kSc);
  const auto& s = r.settlement;
  EXPECT_FALSE(s.fallback) << s.note;
  EXPECT_EQ(s.allocation.payoffs, (std::vector<double>{4.5, 4.5}));
  ASSERT_TRUE(s.shapley && s.marginal);
  EXPECT_EQ(s.shapley->payoffs, (std::vector<double>{4.5, 4.5}));
  EXPECT_EQ(s.marginal->payoffs, (std::vector<double>{9, 9}));
  EXPECT_EQ(s.transfers.transfers[0][1], 5.5);
  bool settled = false;
  for (const auto& m : r.transcript) settled |= m["phase"] == "settlement";
  EXPECT_TRUE(settled);
}

TEST(EscapeEpisodes, GreedyTalkersStillCollide) {
  // greedy ignores what it hears, so NEG does not rescue it
  const auto r = escape_run("greedy_selfish", "greedy_selfish", PipelineVariant::kNeg);
  EXPECT_EQ(r.settlement.realized.payoffs, (std::vector<double>{-1, -1}));
}

TEST(Control, GreedyTrajectoryIgnoresThePipeline) {
  const std::vector<std::string> greedy(4, "greedy_selfish");
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto base = raid_run(greedy, PipelineVariant::kLlmOnly, seed).trajectory;
    for (auto v : {PipelineVariant::kNeg, PipelineVariant::kSts, PipelineVariant::kSc}) {
      auto t = raid_run(greedy, v, seed).trajectory;
      EXPECT_EQ(t.steps, base.steps) << to_string(v);
    }
  }
  const auto e = escape_run("greedy_selfish", "greedy_selfish", PipelineVariant::kLlmOnly).trajectory;
  EXPECT_EQ(escape_run("greedy_selfish", "greedy_selfish", PipelineVariant::kSc).trajectory.steps, e.steps);
}

TEST(Runtime, SettlementConservesTheRealizedTotal) {
  const std::vector<std::string> names{"greedy_selfish", "role_balanced", "shapley_negotiator"};
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    for (auto v : {PipelineVariant::kLlmOnly, PipelineVariant::kNeg, PipelineVariant::kSts, PipelineVariant::kSc}) {
      std::vector<std::string> mix;
      for (int h = 0; h < 4; ++h) mix.push_back(names[(seed + h) % 3]);
      const auto r = raid_run(mix, v, seed);
      const auto& s = r.settlement;
      EXPECT_NEAR(s.allocation.total(), s.realized.total(), 1e-9);
      const auto net = s.transfers.net();
      for (int h = 0; h < 4; ++h) EXPECT_NEAR(s.realized[h] + net[h], s.allocation[h], 1e-9);
      if (v == PipelineVariant::kSc) {
        ASSERT_TRUE(s.shapley);
        EXPECT_NEAR(s.shapley->total(), s.realized.total(), 1e-9);
      }
    }
  }
}

TEST(Runtime, ShapleyNegotiatorsSettleOnShapleyValues) {
  const auto r = raid_run(std::vector<std::string>(4, "shapley_negotiator"), PipelineVariant::kSc, 3);
  const auto& s = r.settlement;
  ASSERT_FALSE(s.fallback) << s.note;
  for (int h = 0; h < 4; ++h) EXPECT_NEAR(s.allocation[h], (*s.shapley)[h], 1e-9);
  ASSERT_GE(s.claim_rounds.size(), 3u);
}

TEST(Runtime, SettlementClaimsConcedeMonotonically) {
  std::vector<PolicyPtr> ps(4, shapley_negotiator());
  PipelineConfig cfg = pipe(PipelineVariant::kSc);
  const auto traj = oracle::fixture_trajectory();
  const auto s = settle_episode(traj, ps, cfg);
  ASSERT_FALSE(s.fallback) << s.note;
  ASSERT_GE(s.claim_rounds.size(), 3u);
  double prev = INFINITY;
  for (int r = 0; r < 3; ++r) {
    double l1 = 0;
    for (int h = 0; h < 4; ++h) l1 += std::abs(*s.claim_rounds[r][h] - (*s.shapley)[h]);
    EXPECT_LE(l1, prev + 1e-12);
    prev = l1;
  }
  EXPECT_NEAR(prev, 0.0, 1e-9);
}

TEST(Runtime, GreedyClaimsKeepRealizedPayoffs) {
  const auto r = raid_run(std::vector<std::string>(4, "greedy_selfish"), PipelineVariant::kSc, 0);
  EXPECT_EQ(r.settlement.allocation.payoffs, r.settlement.realized.payoffs);
}

TEST(Runtime, OneRoundIsTooShortToSettle) {
  escape::EscapeRoomEnv env;
  PipelineConfig cfg = pipe(PipelineVariant::kSc);
  cfg.max_negotiation_rounds = 1;
  const auto r = run_episode(env, {shapley_negotiator(), shapley_negotiator()}, cfg, 0);
  EXPECT_TRUE(r.settlement.fallback);
  EXPECT_EQ(r.settlement.allocation.payoffs, r.settlement.realized.payoffs);
}

TEST(Runtime, GrammarErrorsBecomeSkippedTurns) {
  escape::EscapeRoomEnv env;
  auto bad = std::make_shared<Faulty>(Faulty::Where::kNegotiate);
  const auto r = run_episode(env, {bad, shapley_negotiator()}, pipe(PipelineVariant::kSts), 0);
  EXPECT_FALSE(r.aborted);
  bool skipped = false;
  for (const auto& m : r.transcript) skipped |= m.value("skipped", false);
  EXPECT_TRUE(skipped);
  EXPECT_EQ(r.trajectory.steps.size(), 1u);
}

TEST(Runtime, FrameErrorsInSettlementAreSkipped) {
  escape::EscapeRoomEnv env;
  auto bad = std::make_shared<Faulty>(Faulty::Where::kSettle);
  const auto r = run_episode(env, {bad, shapley_negotiator()}, pipe(PipelineVariant::kSc), 0);
  EXPECT_FALSE(r.aborted);
  EXPECT_TRUE(r.settlement.fallback);
}

TEST(Runtime, BackendFailureAbortsButKeepsThePartialLog) {
  raid::RaidBattleEnv env;
  auto bad = std::make_shared<Faulty>(Faulty::Where::kActAtTurn2);
  const auto r = run_episode(env, {bad, role_balanced(), role_balanced(), role_balanced()},
                             pipe(PipelineVariant::kSc), 0);
  EXPECT_TRUE(r.aborted);
  EXPECT_NE(r.error.find("model unreachable"), std::string::npos);
  EXPECT_EQ(r.trajectory.steps.size(), 2u);
  EXPECT_TRUE(r.settlement.fallback);
}

TEST(Runtime, IllegalActionsAndArityAreRejected) {
  raid::RaidBattleEnv env;
  auto c = std::make_shared<Cheater>();
  EXPECT_THROW(run_episode(env, {c, c, c}, pipe(PipelineVariant::kLlmOnly), 0), InvalidArgument);
  // Heal is legal, so cheat with a taunt while on cooldown instead
  auto taunt = fixed_script({{"Taunt", "Fireball", "Fireball", "Fireball"}, {"Taunt", "Fireball", "Fireball", "Fireball"}});
  EXPECT_THROW(run_episode(env, {taunt, taunt, taunt, taunt}, pipe(PipelineVariant::kLlmOnly), 0),
               IllegalActionError);
}

TEST(Runtime, RecordsProvenance) {
  const auto r = raid_run(std::vector<std::string>(4, "role_balanced"), PipelineVariant::kSc, 7);
  EXPECT_EQ(r.trajectory.seed, 7u);
  EXPECT_EQ(r.trajectory.pipeline, "SC");
  EXPECT_EQ(r.trajectory.policies, std::vector<std::string>(4, "role_balanced"));
  EXPECT_EQ(r.trajectory.config["level"], 1);
}

TEST(Batch, DeterministicAcrossThreadCounts) {
  std::vector<BatchJob> jobs;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    for (const char* p : {"LLM_ONLY", "SC"}) {
      BatchJob j;
      j.env_id = "raid_battle";
      j.policies = std::vector<std::string>(4, seed % 2 ? "role_balanced" : "shapley_negotiator");
      j.pipeline = PipelineConfig::from_json(p);
      j.seed = seed;
      jobs.push_back(j);
    }
  }
  const auto a = run_batch(jobs, 1);
  const auto b = run_batch(jobs, 4);
  ASSERT_EQ(a.size(), jobs.size());
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    EXPECT_EQ(to_jsonl(a[k].trajectory), to_jsonl(b[k].trajectory));
    EXPECT_EQ(a[k].settlement.to_json(), b[k].settlement.to_json());
    EXPECT_EQ(a[k].trajectory.seed, jobs[k].seed);
  }
}

TEST(Batch, LlmPoliciesNeedABackend) {
  BatchJob j;
  j.env_id = "escape_room";
  j.policies = {"llm", "greedy_selfish"};
  const auto r = run_batch({j}, 1);
  EXPECT_TRUE(r[0].aborted);
}
