#include "shapkit/policies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "shapkit/escape_room.hpp"
#include "shapkit/raid_battle.hpp"

namespace shapkit {

namespace {

constexpr double kClaimTol = 1e-9;

bool legal(const ActContext& ctx, const std::string& label) {
  const auto acts = ctx.env.legal_actions(ctx.agent);
  return std::find(acts.begin(), acts.end(), label) != acts.end();
}

std::optional<std::string> first_legal(const ActContext& ctx) {
  const auto acts = ctx.env.legal_actions(ctx.agent);
  if (acts.empty()) return std::nullopt;
  return acts.front();
}

const raid::RaidBattleEnv& as_raid(const Environment& env) {
  const auto* r = dynamic_cast<const raid::RaidBattleEnv*>(&env);
  if (r == nullptr) throw InvalidArgument("expected a raid battle environment");
  return *r;
}

std::optional<std::pair<int, TransferProposal>> standing_by_other(const Session& s, int agent) {
  auto st = s.standing();
  if (st && st->first != agent) return st;
  return std::nullopt;
}

std::size_t participant_index(const Session& s, int agent) {
  const auto& p = s.participants();
  return static_cast<std::size_t>(std::find(p.begin(), p.end(), agent) - p.begin());
}

/// True when every participant has a claim on the table, the claims exhaust
/// the pool, and this agent's own claim already equals `target`.
bool table_settled(const Session& s, int agent, double target, double pool) {
  const auto& claims = s.claims();
  double sum = 0.0;
  for (const auto& c : claims) {
    if (!c) return false;
    sum += *c;
  }
  const auto& own = claims[participant_index(s, agent)];
  const double scale = std::max(1.0, std::abs(pool));
  return std::abs(*own - target) <= kClaimTol * scale && std::abs(sum - pool) <= kClaimTol * scale;
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(6);
  ss << v;
  return ss.str();
}

std::optional<NegotiationMessage> compliant_settle(const SettlementContext& ctx, int concession_rounds) {
  const double target = concession_claim(ctx, concession_rounds);
  if (ctx.session.standing() && table_settled(ctx.session, ctx.agent, target, ctx.pool)) {
    return agree("the claims on the table match each agent's Shapley share");
  }
  return TransferProposal{target, "my marginal contribution is " + fmt(ctx.marginal[ctx.agent]) +
                                      " and my Shapley share is " + fmt(ctx.shapley[ctx.agent])};
}

class GreedySelfish final : public Policy {
 public:
  std::string name() const override { return "greedy_selfish"; }

  std::optional<std::string> act(const ActContext& ctx) override {
    if (ctx.env.id() == escape::kEnvId) return legal(ctx, "Door") ? std::optional<std::string>("Door") : first_legal(ctx);
    if (ctx.env.id() == raid::kEnvId) {
      return legal(ctx, "Fireball") ? std::optional<std::string>("Fireball") : first_legal(ctx);
    }
    // generic: highest immediate own payoff among legal actions
    const auto acts = ctx.env.legal_actions(ctx.agent);
    std::optional<std::string> best;
    double best_v = 0.0;
    for (const auto& a : acts) {
      JointAction j = ctx.announced;
      j[ctx.agent] = a;
      const double v = ctx.env.preview_payoffs(j)[ctx.agent];
      if (!best || v > best_v) {
        best = a;
        best_v = v;
      }
    }
    return best;
  }

  std::optional<NegotiationMessage> negotiate(const PricingContext& ctx) override {
    const auto st = standing_by_other(ctx.session, ctx.agent);
    if (!st) return std::nullopt;
    if (st->second.amount > 0.0) return agree("I am happy to be paid");
    return disagree("I will not pay for an action I did not choose");
  }

  std::optional<NegotiationMessage> settle(const SettlementContext& ctx) override {
    const double own = ctx.realized[ctx.agent];
    if (ctx.session.standing() && table_settled(ctx.session, ctx.agent, own, ctx.pool)) {
      return agree("everyone keeps what they earned");
    }
    return TransferProposal{own, "I keep the " + fmt(own) + " I earned"};
  }
};

class RoleBalanced final : public Policy {
 public:
  std::string name() const override { return "role_balanced"; }

  std::optional<std::string> act(const ActContext& ctx) override {
    if (ctx.env.legal_actions(ctx.agent).empty()) return std::nullopt;
    if (ctx.env.id() == escape::kEnvId) return ctx.agent == 0 ? "Lever" : "Door";
    if (ctx.env.id() != raid::kEnvId) return first_legal(ctx);

    const auto& r = as_raid(ctx.env);
    const auto& st = r.state();
    const int n = static_cast<int>(st.heroes.size());
    const int t = st.turn;
    auto can = [&](int h, raid::Skill s) {
      const auto acts = r.legal_actions(h);
      return std::find(acts.begin(), acts.end(), raid::to_string(s)) != acts.end();
    };
    const double attack = r.config().boss_attack;
    // tank: first hero in rotation from t%4 that survives both hits
    int taunter = -1;
    for (int k = 0; k < n && taunter < 0; ++k) {
      const int h = (t + k) % n;
      if (can(h, raid::Skill::kTaunt) && st.heroes[h].hp > 2.0 * attack) taunter = h;
    }
    // healer from (t+2)%4, only while somebody is within one hit of dying
    bool lethal = false;
    for (const auto& hero : st.heroes) lethal |= hero.alive() && hero.hp <= attack;
    int healer = -1;
    for (int k = 0; k < n && healer < 0 && lethal; ++k) {
      const int h = (t + 2 + k) % n;
      if (h != taunter && can(h, raid::Skill::kHeal)) healer = h;
    }
    if (ctx.agent == taunter) return raid::to_string(raid::Skill::kTaunt);
    if (ctx.agent == healer) return raid::to_string(raid::Skill::kHeal);
    return legal(ctx, "Fireball") ? std::optional<std::string>("Fireball") : first_legal(ctx);
  }

  std::optional<NegotiationMessage> negotiate(const PricingContext& ctx) override {
    if (standing_by_other(ctx.session, ctx.agent)) return agree("the price follows the roles we agreed on");
    return std::nullopt;
  }

  std::optional<NegotiationMessage> settle(const SettlementContext& ctx) override { return compliant_settle(ctx, 3); }
};

class ShapleyNegotiator final : public Policy {
 public:
  ShapleyNegotiator(std::shared_ptr<Reasoner> reasoner, int rounds)
      : reasoner_(reasoner ? std::move(reasoner) : std::make_shared<RuleBasedReasoner>()), rounds_(rounds) {
    if (rounds_ < 1) throw InvalidArgument("concession_rounds must be >= 1");
  }

  std::string name() const override { return "shapley_negotiator"; }

  std::optional<std::string> act(const ActContext& ctx) override {
    const auto acts = ctx.env.legal_actions(ctx.agent);
    if (acts.empty()) return std::nullopt;
    if (ctx.env.id() == raid::kEnvId) return act_raid(ctx);
    return act_cooperative(ctx);
  }

  std::optional<NegotiationMessage> negotiate(const PricingContext& ctx) override {
    if (const auto st = standing_by_other(ctx.session, ctx.agent)) {
      return agree("the proposed price matches the externality");
    }
    if (ctx.session.standing()) return std::nullopt;  // own proposal is on the table
    const ShortTermResult r = short_term_step(*reasoner_, ctx.env, ctx.planned, ctx.agent);
    const double amount = r.proposal.amount;
    if (amount > 0.0 && ctx.pricing_round >= 1) return r.proposal;  // offers go first
    if (amount < 0.0 && ctx.pricing_round >= 2) return r.proposal;  // requests wait one round for an offer
    return std::nullopt;
  }

  std::optional<NegotiationMessage> settle(const SettlementContext& ctx) override {
    return compliant_settle(ctx, rounds_);
  }

 private:
  // Own component of the best joint completion of what was announced.
  std::optional<std::string> act_cooperative(const ActContext& ctx) {
    const int n = ctx.env.num_agents();
    std::vector<std::vector<std::string>> options(n);
    for (int j = 0; j < n; ++j) {
      if (j == ctx.agent || !ctx.announced[j]) {
        options[j] = ctx.env.legal_actions(j);
        if (options[j].empty()) options[j] = {""};
      } else {
        options[j] = {*ctx.announced[j]};
      }
    }
    std::vector<std::size_t> idx(n, 0);
    std::optional<std::string> best;
    double best_v = 0.0;
    while (true) {
      JointAction j(n);
      for (int k = 0; k < n; ++k)
        if (!options[k][idx[k]].empty()) j[k] = options[k][idx[k]];
      const auto pay = ctx.env.preview_payoffs(j);
      const double v = std::accumulate(pay.begin(), pay.end(), 0.0);
      if (!best || v > best_v) {
        best = j[ctx.agent];
        best_v = v;
      }
      int k = n - 1;
      while (k >= 0 && ++idx[k] == options[k].size()) idx[k--] = 0;
      if (k < 0) break;
    }
    return best;
  }

  std::optional<std::string> act_raid(const ActContext& ctx) {
    const auto& r = as_raid(ctx.env);
    const auto& hero = r.state().heroes[ctx.agent];
    const double attack = r.config().boss_attack;
    JointAction planned = ctx.announced;
    planned[ctx.agent] = "Fireball";
    if (!legal(ctx, "Fireball")) return first_legal(ctx);
    const ExternalityJudgement j = reasoner_->classify_externality(ctx.env, ctx.agent, planned);
    if (j.sign == ExternalitySign::kPositive) return "Fireball";
    bool taunter = false;
    bool healer = false;
    for (int k = 0; k < static_cast<int>(ctx.announced.size()); ++k) {
      if (k == ctx.agent) continue;
      taunter |= ctx.announced[k] == "Taunt";
      healer |= ctx.announced[k] == "Heal";
    }
    // only tank when both hits can be survived
    if (!taunter && legal(ctx, "Taunt") && hero.hp > 2.0 * attack) return "Taunt";
    bool lethal = false;
    for (const auto& h : r.state().heroes) lethal |= h.alive() && h.hp <= attack;
    if (lethal && !healer && legal(ctx, "Heal")) return "Heal";
    return "Fireball";
  }

  std::shared_ptr<Reasoner> reasoner_;
  int rounds_;
};

class FixedScript final : public Policy {
 public:
  explicit FixedScript(std::vector<std::vector<std::optional<std::string>>> script) : script_(std::move(script)) {}
  std::string name() const override { return "fixed_script"; }
  std::optional<std::string> act(const ActContext& ctx) override {
    const int t = ctx.env.turn();
    if (t < 0 || t >= static_cast<int>(script_.size())) return std::nullopt;
    const auto& row = script_[t];
    if (ctx.agent >= static_cast<int>(row.size())) return std::nullopt;
    return row[ctx.agent];
  }

 private:
  std::vector<std::vector<std::optional<std::string>>> script_;
};

std::string transcript_text(const Session& s) {
  std::string out;
  for (const auto& e : s.transcript()) {
    out += "agent " + std::to_string(e.sender) + ": " + render_message(e.message) + "\n";
  }
  return out.empty() ? "(none)\n" : out;
}

NegotiationMessage parse_reply(const std::string& reply) {
  const auto tagged = extract_tagged(reply);
  if (!tagged) throw FrameError("reply has no <s>...</s> message");
  return parse_message(*tagged);
}

class LlmPolicy final : public Policy {
 public:
  LlmPolicy(LlmBackendConfig cfg, PromptTemplates prompts) : cfg_(std::move(cfg)), prompts_(std::move(prompts)) {}
  std::string name() const override { return "llm"; }

  std::optional<std::string> act(const ActContext& ctx) override {
    const auto acts = ctx.env.legal_actions(ctx.agent);
    if (acts.empty()) return std::nullopt;
    std::string legal_list;
    for (const auto& a : acts) legal_list += (legal_list.empty() ? "" : ", ") + a;
    const std::string reply = llm_complete(cfg_, prompts_.render("act", {{"agent", std::to_string(ctx.agent)},
                                                                        {"env", std::string(ctx.env.id())},
                                                                        {"state", ctx.env.snapshot().dump()},
                                                                        {"announced", describe_joint(ctx.env, ctx.announced)},
                                                                        {"legal", legal_list}}));
    std::optional<std::string> pick;
    std::size_t at = std::string::npos;
    for (const auto& a : acts) {
      const auto p = reply.find(a);
      if (p != std::string::npos && (at == std::string::npos || p < at)) {
        at = p;
        pick = a;
      }
    }
    return pick ? pick : acts.front();
  }

  std::optional<NegotiationMessage> negotiate(const PricingContext& ctx) override {
    return parse_reply(llm_complete(cfg_, prompts_.render("negotiate", {{"agent", std::to_string(ctx.agent)},
                                                                         {"env", std::string(ctx.env.id())},
                                                                         {"planned", describe_joint(ctx.env, ctx.planned)},
                                                                         {"transcript", transcript_text(ctx.session)}})));
  }

  std::optional<NegotiationMessage> settle(const SettlementContext& ctx) override {
    std::string realized;
    for (double v : ctx.realized) realized += (realized.empty() ? "" : ", ") + fmt(v);
    return parse_reply(llm_complete(cfg_, prompts_.render("settle", {{"agent", std::to_string(ctx.agent)},
                                                                      {"pool", fmt(ctx.pool)},
                                                                      {"marginal", fmt(ctx.marginal[ctx.agent])},
                                                                      {"phi", fmt(ctx.shapley[ctx.agent])},
                                                                      {"realized", realized},
                                                                      {"transcript", transcript_text(ctx.session)}})));
  }

 private:
  LlmBackendConfig cfg_;
  PromptTemplates prompts_;
};

}  // namespace

double concession_claim(const SettlementContext& ctx, int concession_rounds) {
  const auto n = ctx.marginal.size();
  const double delta_sum = std::accumulate(ctx.marginal.begin(), ctx.marginal.end(), 0.0);
  const double anchor = delta_sum != 0.0 ? ctx.pool * ctx.marginal[ctx.agent] / delta_sum
                                         : ctx.pool / static_cast<double>(n);
  const double phi = ctx.shapley[ctx.agent];
  if (concession_rounds <= 1 || ctx.round >= concession_rounds) return phi;
  const double w = static_cast<double>(ctx.round - 1) / (concession_rounds - 1);
  return anchor + w * (phi - anchor);
}

PolicyPtr greedy_selfish() { return std::make_shared<GreedySelfish>(); }
PolicyPtr role_balanced() { return std::make_shared<RoleBalanced>(); }
PolicyPtr shapley_negotiator(std::shared_ptr<Reasoner> reasoner, int concession_rounds) {
  return std::make_shared<ShapleyNegotiator>(std::move(reasoner), concession_rounds);
}
PolicyPtr fixed_script(std::vector<std::vector<std::optional<std::string>>> script) {
  return std::make_shared<FixedScript>(std::move(script));
}
PolicyPtr llm_policy(LlmBackendConfig cfg, PromptTemplates prompts) {
  return std::make_shared<LlmPolicy>(std::move(cfg), std::move(prompts));
}

PolicyPtr make_policy(const std::string& name) {
  if (name == "greedy_selfish") return greedy_selfish();
  if (name == "role_balanced") return role_balanced();
  if (name == "shapley_negotiator") return shapley_negotiator();
  throw InvalidArgument("unknown scripted policy '" + name + "'");
}

}  // namespace shapkit
