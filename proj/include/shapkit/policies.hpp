#pragma once

// Agent policies. A policy picks an action each turn and, in pipelines with
// negotiation, speaks in the pre-act and settlement sessions. Returning
// nullopt from a negotiation hook passes the turn.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "shapkit/coalition.hpp"
#include "shapkit/environment.hpp"
#include "shapkit/llm.hpp"
#include "shapkit/negotiation.hpp"
#include "shapkit/shapley_cot.hpp"

namespace shapkit {

struct ActContext {
  const Environment& env;
  int agent;
  /// Actions already announced this turn (nullopt where unknown).
  const JointAction& announced;
};

struct PricingContext {
  const Environment& env;
  int agent;
  const JointAction& planned;  // every participant's announced action
  const Session& session;
  int pricing_round;  // 1 for the first round after the intents
};

struct SettlementContext {
  int agent;
  const Session& session;
  int round;
  double pool;                        // realized total utility R(N)
  const std::vector<double>& realized;
  const std::vector<double>& marginal;  // Delta_i from the log
  const Allocation& shapley;            // full-coalition values
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  /// Must return a label from env.legal_actions(agent), or nullopt when that list is empty.
  virtual std::optional<std::string> act(const ActContext& ctx) = 0;
  virtual std::optional<NegotiationMessage> negotiate(const PricingContext&) { return std::nullopt; }
  virtual std::optional<NegotiationMessage> settle(const SettlementContext&) { return std::nullopt; }
};

using PolicyPtr = std::shared_ptr<Policy>;

/// Always the largest immediate local payoff (Door, Fireball). Never pays;
/// accepts offers and rejects requests; claims its realized payoff at settlement.
PolicyPtr greedy_selfish();

/// Fixed roles. Escape room: agent 0 pulls the lever, the others go for the door.
/// Raid, turn t: the tank is the first hero in rotation from t%4 that can Taunt
/// and would survive both boss hits; nobody taunts when no hero qualifies. Hero
/// (t+2)%4 (or the next in rotation) heals while some living hero is within
/// one hit of dying. Everyone else casts Fireball.
/// Accepts any standing proposal and settles like a Shapley negotiator.
PolicyPtr role_balanced();

/// Picks the cooperative action given what others announced, prices its
/// externality through short_term_step, and at settlement concedes from its
/// marginal-contribution share to its Shapley share over `concession_rounds`.
PolicyPtr shapley_negotiator(std::shared_ptr<Reasoner> reasoner = nullptr, int concession_rounds = 3);

/// Plays back actions[turn][agent]; idles when the script runs out.
PolicyPtr fixed_script(std::vector<std::vector<std::optional<std::string>>> script);

/// Model-driven policy. Illegal or unparsable actions fall back to the first
/// legal action; unparsable negotiation replies raise GrammarError, which the
/// runner turns into a skipped turn.
PolicyPtr llm_policy(LlmBackendConfig cfg, PromptTemplates prompts = PromptTemplates::defaults());

/// Scripted policies by name: greedy_selfish, role_balanced, shapley_negotiator.
PolicyPtr make_policy(const std::string& name);

/// Target claim of a compliant negotiator in settlement round `round`: starts at
/// the marginal-contribution share of the pool and moves linearly to the Shapley
/// value, reaching it in round `concession_rounds`.
double concession_claim(const SettlementContext& ctx, int concession_rounds);

}  // namespace shapkit
