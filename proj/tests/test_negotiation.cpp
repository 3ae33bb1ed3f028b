#include <gtest/gtest.h>

#include <functional>
#include <random>
#include <sstream>

#include "session_model.hpp"
#include "shapkit/negotiation.hpp"

using namespace shapkit;
using namespace oracle;

TEST(Message, VerbatimTemplatesParse) {
  EXPECT_EQ(parse_message("<s>I propose to pull the lever</s>"), NegotiationMessage(Intent{"pull the lever"}));
  EXPECT_EQ(parse_message("<s>I propose transferring 5.5 because you paid the lever cost</s>"),
            NegotiationMessage(TransferProposal{5.5, "you paid the lever cost"}));
  EXPECT_EQ(parse_message("<s>I propose transferring -2 because I took the hit</s>"),
            NegotiationMessage(TransferProposal{-2, "I took the hit"}));
  EXPECT_EQ(parse_message("<s>I agree because the split matches contributions</s>"), NegotiationMessage(agree("the split matches contributions")));
  EXPECT_EQ(parse_message("<s>I disagree because too low</s>"), NegotiationMessage(disagree("too low")));
  EXPECT_EQ(parse_message("<s>I counter-propose transferring 3 because meet halfway</s>"),
            NegotiationMessage(counter_propose(3, "meet halfway")));
}

TEST(Message, FrameErrors) {
  EXPECT_THROW(parse_message("I agree because x"), FrameError);
  EXPECT_THROW(parse_message("<s>I agree because x"), FrameError);
  EXPECT_THROW(parse_message("<s>I agree <s>because</s> x</s>"), FrameError);
  EXPECT_THROW(parse_message("<s>"), FrameError);
}

TEST(Message, GrammarErrorsKeepTheSpan) {
  try {
    parse_message("<s>Let's split it</s>");
    FAIL();
  } catch (const GrammarError& e) {
    EXPECT_EQ(e.span(), "Let's split it");
  }
  EXPECT_THROW(parse_message("<s>I propose transferring lots because x</s>"), GrammarError);
  EXPECT_THROW(parse_message("<s>I propose transferring 5</s>"), GrammarError);
  EXPECT_THROW(parse_message("<s>I propose transferring inf because x</s>"), GrammarError);
  EXPECT_THROW(parse_message("<s>I counter-propose because no</s>"), GrammarError);
  EXPECT_THROW(parse_message("<s>I propose to </s>"), GrammarError);
}

TEST(Message, ExtractTagged) {
  EXPECT_EQ(extract_tagged("Sure. <s>I agree because ok</s> thanks"), "<s>I agree because ok</s>");
  EXPECT_FALSE(extract_tagged("no tags here"));
  EXPECT_FALSE(extract_tagged("<s>unterminated"));
}

TEST(MessageProperties, RenderParseRoundTrip) {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 1000; ++i) {
    const auto m = random_message(rng);
    const std::string text = render_message(m);
    const auto back = parse_message(text);
    EXPECT_EQ(back, m) << text;
    EXPECT_EQ(render_message(back), text);
  }
}

TEST(Session, RejectsBadSetup) {
  EXPECT_THROW(Session({}, 3), InvalidArgument);
  EXPECT_THROW(Session({0, 1}, 0), InvalidArgument);
  EXPECT_THROW(Session({0, 0}, 3), InvalidArgument);
}

TEST(Session, OfferAcceptedInOneRound) {
  Session s({0, 1}, 5);
  s.advance(0, TransferProposal{5.5, "compensation"});
  EXPECT_TRUE(s.open());
  s.advance(1, agree("fine"));
  EXPECT_EQ(s.status(), SessionStatus::kAgreed);
  ASSERT_TRUE(s.agreement());
  EXPECT_EQ(s.agreement()->proposer, 0);
  EXPECT_EQ(s.agreement()->proposal.amount, 5.5);
  EXPECT_THROW(s.advance(0, agree("late")), SessionClosedError);
}

TEST(Session, ThreePartyNeedsEveryone) {
  Session s({2, 0, 1}, 3);
  s.advance(2, TransferProposal{1, "x"});
  s.advance(0, agree("ok"));
  EXPECT_TRUE(s.open());
  s.advance(1, counter_propose(2, "more"));  // clears agrees
  s.advance(2, agree("ok"));
  s.advance(0, agree("ok"));
  EXPECT_EQ(s.status(), SessionStatus::kAgreed);
  EXPECT_EQ(s.agreement()->proposer, 1);
  EXPECT_EQ(s.agreement()->claims[0], 1.0);
  EXPECT_EQ(s.agreement()->claims[2], 2.0);
}

TEST(Session, TranscriptJsonl) {
  Session s({0, 1}, 2);
  s.advance(0, Intent{"go through the door"});
  s.pass(1);
  std::ostringstream out;
  s.write_jsonl(out);
  const auto j = nlohmann::json::parse(out.str());
  EXPECT_EQ(j["round"], 1);
  EXPECT_EQ(j["raw"], "<s>I propose to go through the door</s>");
  EXPECT_EQ(j["parsed"]["type"], "intent");
}

TEST(SessionModel, AllShortSequencesMatchTheModel) {
  long checked = 0;
  std::function<void(const Session&, const Model&, int)> dfs = [&](const Session& s, const Model& m, int depth) {
    if (depth == 6) return;
    for (int sender = 0; sender < 2; ++sender) {
      for (int k = 0; k < 6; ++k) {
        const auto mv = static_cast<Move>(k);
        const double amt = depth + 1;  // distinct per position
        Model m2 = m;
        Session s2 = s;
        const auto expect = model_step(m2, sender, mv, amt);
        try {
          apply(s2, sender, mv, amt);
          ASSERT_EQ(expect, Outcome::kOk);
        } catch (const SessionClosedError&) {
          ASSERT_EQ(expect, Outcome::kClosed);
          continue;
        } catch (const ProtocolError&) {
          ASSERT_EQ(expect, Outcome::kOutOfTurn);
          continue;
        }
        ++checked;
        ASSERT_EQ(std::string(to_string(s2.status())), m2.status);
        ASSERT_EQ(s2.round(), m2.round);
        if (m2.status == "open") ASSERT_EQ(s2.next_speaker(), m2.turn);
        const auto st = s2.standing();
        ASSERT_EQ(st.has_value(), m2.proposer >= 0);
        if (st) {
          ASSERT_EQ(st->first, m2.proposer);
          ASSERT_EQ(st->second.amount, m2.amount);
        }
        for (int i = 0; i < 2; ++i) ASSERT_EQ(s2.claims()[i], m2.claims[i]);
        ASSERT_EQ(s2.agreement().has_value(), m2.status == "agreed");
        if (s2.agreement()) ASSERT_EQ(s2.agreement()->proposal.amount, m2.amount);
        dfs(s2, m2, depth + 1);
      }
    }
  };
  dfs(Session({0, 1}, kMaxRounds), Model{}, 0);
  EXPECT_GT(checked, 1000);
}

TEST(Session, ValueSemanticsAdvance) {
  const Session s({0, 1}, 3);
  const Session t = advance(s, 0, TransferProposal{1, "x"});
  EXPECT_TRUE(s.transcript().empty());
  EXPECT_EQ(t.transcript().size(), 1u);
  EXPECT_THROW(advance(t, 0, agree("x")), ProtocolError);
  EXPECT_THROW(advance(t, 5, agree("x")), InvalidArgument);
}
