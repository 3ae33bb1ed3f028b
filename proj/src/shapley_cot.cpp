#include "shapkit/shapley_cot.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "shapkit/escape_room.hpp"
#include "shapkit/raid_battle.hpp"
#include "shapkit/runtime.hpp"

namespace shapkit {

namespace {

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(6);
  ss << v;
  return ss.str();
}

bool is_action(const std::optional<std::string>& a, std::string_view label) { return a && *a == label; }

int live_agent_count(const Environment& env) {
  int live = 0;
  for (int i = 0; i < env.num_agents(); ++i)
    if (!env.legal_actions(i).empty()) ++live;
  return live;
}

ExternalityJudgement classify_escape(const Environment& env, int agent, const JointAction& planned) {
  JointAction idle = planned;
  idle[agent] = std::nullopt;
  const auto with = env.preview_payoffs(planned);
  const auto without = env.preview_payoffs(idle);
  double delta = 0.0;
  for (int j = 0; j < env.num_agents(); ++j)
    if (j != agent) delta += with[j] - without[j];
  ExternalityJudgement out;
  out.sign = delta >= 0.0 ? ExternalitySign::kPositive : ExternalitySign::kNegative;
  out.rationale = "my action changes the others' payoff by " + fmt(delta) + " relative to staying idle";
  return out;
}

ExternalityJudgement classify_raid(const Environment& env, int agent, const JointAction& planned) {
  const auto* raid_env = dynamic_cast<const raid::RaidBattleEnv*>(&env);
  if (raid_env == nullptr) throw InvalidArgument("raid reasoning needs a RaidBattleEnv");
  const auto& st = raid_env->state();
  const auto& cfg = raid_env->config();
  ExternalityJudgement out;
  const auto& own = planned[agent];
  if (is_action(own, "Taunt")) {
    out.rationale = "taunting absorbs the boss attacks aimed at my allies";
    return out;
  }
  if (is_action(own, "Heal")) {
    out.rationale = "healing restores the most injured hero";
    return out;
  }
  bool taunter = false;
  bool healer = false;
  for (int j = 0; j < static_cast<int>(planned.size()); ++j) {
    if (j == agent) continue;
    taunter |= is_action(planned[j], "Taunt");
    healer |= is_action(planned[j], "Heal");
  }
  if (!taunter) {
    out.sign = ExternalitySign::kNegative;
    out.rationale = "nobody taunts, so skipping Taunt leaves the two weakest allies exposed to " +
                    fmt(cfg.boss_attack) + " damage each";
    return out;
  }
  for (int j = 0; j < static_cast<int>(st.heroes.size()); ++j) {
    if (j == agent || !st.heroes[j].alive()) continue;
    if (st.heroes[j].hp <= 2.0 * cfg.boss_attack && !healer) {
      out.sign = ExternalitySign::kNegative;
      out.rationale = "ally " + std::to_string(j) + " is at " + fmt(st.heroes[j].hp) + " HP and nobody heals";
      return out;
    }
  }
  out.rationale = "damage shortens the fight for everyone while allies are covered";
  return out;
}

}  // namespace

std::string_view to_string(ExternalitySign s) { return s == ExternalitySign::kPositive ? "+" : "-"; }

std::string_view to_string(CompensationDirection d) {
  return d == CompensationDirection::kOffer ? "offer_compensation" : "request_compensation";
}

std::string_view to_string(CounterfactualMode m) {
  return m == CounterfactualMode::kAblateLog ? "ablate_log" : "resimulate";
}

CounterfactualMode parse_counterfactual_mode(std::string_view s) {
  if (s == "ablate_log") return CounterfactualMode::kAblateLog;
  if (s == "resimulate") return CounterfactualMode::kResimulate;
  throw InvalidArgument("unknown counterfactual mode '" + std::string(s) + "'");
}

PayoffEstimate RuleBasedReasoner::estimate_cooperative_payoff(const Environment& env, const JointAction& planned) {
  if (env.id() == escape::kEnvId) {
    const auto* e = dynamic_cast<const escape::EscapeRoomEnv*>(&env);
    const auto& m = e ? e->matrix() : escape::PayoffMatrix::canonical();
    const auto& cell = m.at(escape::EscapeAction::kLever, escape::EscapeAction::kDoor);
    return {cell.first + cell.second, "exact"};
  }
  if (env.id() == raid::kEnvId) {
    const auto* r = dynamic_cast<const raid::RaidBattleEnv*>(&env);
    if (r == nullptr) throw InvalidArgument("raid reasoning needs a RaidBattleEnv");
    const auto& cfg = r->config();
    const auto& st = r->state();
    const auto immediate = env.preview_payoffs(planned);
    double value = std::accumulate(immediate.begin(), immediate.end(), 0.0);
    // Optimistic team reward: living heroes all casting Fireball from now on.
    const int living = st.living_count();
    if (living > 0) {
      const int turns_left =
          static_cast<int>(std::ceil(st.boss_hp / (cfg.fireball_mean * living)));
      const int finish = st.turn + std::max(1, turns_left);
      if (finish <= cfg.max_turns) {
        value += raid::global_reward(st.dead_count(), static_cast<int>(st.heroes.size()), finish, cfg.max_turns);
      }
    }
    return {value, "heuristic"};
  }
  const auto immediate = env.preview_payoffs(planned);
  return {std::accumulate(immediate.begin(), immediate.end(), 0.0), "heuristic"};
}

ExternalityJudgement RuleBasedReasoner::classify_externality(const Environment& env, int agent,
                                                             const JointAction& planned) {
  if (env.id() == escape::kEnvId) return classify_escape(env, agent, planned);
  if (env.id() == raid::kEnvId) return classify_raid(env, agent, planned);
  return classify_escape(env, agent, planned);
}

TransferProposal RuleBasedReasoner::draft_adjustment(const ExternalityAssessment& assessment, const Environment& env,
                                                     const JointAction& planned, const PayoffEstimate&) {
  const auto immediate = env.preview_payoffs(planned);
  int actors = 0;
  double sum = 0.0;
  for (std::size_t j = 0; j < planned.size(); ++j) {
    if (!planned[j]) continue;
    ++actors;
    sum += immediate[j];
  }
  const double fair = actors > 0 ? sum / actors : 0.0;
  const double own = immediate[assessment.agent];
  double amount = own - fair;
  if (assessment.direction() == CompensationDirection::kOffer) {
    amount = std::max(0.0, amount);
  } else {
    amount = std::min(0.0, amount);
  }
  if (amount == 0.0) amount = 0.0;  // no negative zero in rendered text
  std::string why;
  if (amount > 0.0) {
    why = "my action pays me " + fmt(own) + " against a fair share of " + fmt(fair) + " and " + assessment.rationale;
  } else if (amount < 0.0) {
    why = "my action earns me " + fmt(own) + " against a fair share of " + fmt(fair) + " while " + assessment.rationale;
  } else {
    why = "no adjustment is needed since " + assessment.rationale;
  }
  return TransferProposal{amount, why};
}

ShortTermResult short_term_step(Reasoner& reasoner, const Environment& env, const JointAction& planned, int agent) {
  if (agent < 0 || agent >= static_cast<int>(planned.size()) || !planned[agent]) {
    throw InvalidArgument("agent " + std::to_string(agent) + " has no planned action");
  }
  if (env.num_agents() < 2 || live_agent_count(env) < 2) {
    throw NoCounterpartyError("externalities need at least two agents");
  }
  ShortTermResult out;
  out.estimate = reasoner.estimate_cooperative_payoff(env, planned);
  const ExternalityJudgement j = reasoner.classify_externality(env, agent, planned);
  out.assessment = ExternalityAssessment{agent, j.sign, j.rationale};
  out.proposal = reasoner.draft_adjustment(out.assessment, env, planned, out.estimate);
  return out;
}

double collective_outcome(const TrajectoryRecord& traj) {
  double total = 0.0;
  for (const auto& s : traj.steps) total = std::accumulate(s.rewards.begin(), s.rewards.end(), total);
  return total;
}

double coalition_outcome(const TrajectoryRecord& traj, Coalition members, CounterfactualMode mode) {
  if (!traj.seed) throw ProvenanceError("trajectory has no seed and cannot be replayed");
  if (traj.agents < 1 || members.mask() >> traj.agents != 0) throw OutOfRange("coalition outside the trajectory's agents");
  if (mode == CounterfactualMode::kResimulate) return resimulate_outcome(traj, members);
  if (traj.env_id == escape::kEnvId) return escape::ablated_outcome(traj, members);
  if (traj.env_id == raid::kEnvId) return raid::ablated_outcome(traj, members);
  throw ReplayError("no replay available for environment '" + traj.env_id + "'");
}

double marginal_contribution_traj(const TrajectoryRecord& traj, int agent, CounterfactualMode mode) {
  if (agent < 0 || agent >= traj.agents) {
    throw OutOfRange("agent " + std::to_string(agent) + " does not appear in the trajectory");
  }
  const Coalition all = Coalition::grand(traj.agents);
  return coalition_outcome(traj, all, mode) - coalition_outcome(traj, all.without(agent), mode);
}

double coalition_weight_sum(int n) {
  // Coalitions of size s: C(n-1, s) of them, each weighted s!(n-s-1)!/n!.
  double sum = 0.0;
  double binom = 1.0;
  for (int s = 0; s < n; ++s) {
    sum += binom * shapley_weight(s, n);
    binom = binom * (n - 1 - s) / (s + 1);
  }
  return sum;
}

CharacteristicGame trajectory_game(const TrajectoryRecord& traj, CounterfactualMode cf) {
  if (!traj.seed) throw ProvenanceError("trajectory has no seed and cannot be replayed");
  const int n = traj.agents;
  std::vector<double> table(std::size_t{1} << n, 0.0);
  for (std::size_t m = 1; m < table.size(); ++m) table[m] = coalition_outcome(traj, Coalition(m), cf);
  return CharacteristicGame::from_table(n, std::move(table));
}

Allocation shapley_from_trajectory(const TrajectoryRecord& traj, TrajectoryShapleyMode mode, CounterfactualMode cf) {
  const int n = traj.agents;
  if (n < 1) throw InvalidArgument("trajectory has no agents");
  if (mode == TrajectoryShapleyMode::kFullCoalition) return shapley_exact(trajectory_game(traj, cf));
  Allocation out{std::vector<double>(n)};
  const double weights = coalition_weight_sum(n);
  for (int i = 0; i < n; ++i) out.payoffs[i] = weights * marginal_contribution_traj(traj, i, cf);
  return out;
}

std::vector<double> percentage_split(const Allocation& phi) {
  const double sum = phi.total();
  if (sum == 0.0) throw DegenerateSplitError("Shapley values sum to zero; no percentage split exists");
  std::vector<double> out(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i) out[i] = 100.0 * phi[i] / sum;
  return out;
}

TransferProposal build_offer(double phi_i, double phi_sum, double pool, int agent) {
  if (pool == 0.0) throw InvalidArgument("the reward pool is empty");
  if (phi_sum == 0.0) throw DegenerateSplitError("Shapley values sum to zero; no share can be claimed");
  const double share = phi_i / phi_sum;
  double amount = share * pool;
  if (amount == 0.0) amount = 0.0;
  return TransferProposal{amount, "agent " + std::to_string(agent) + " has Shapley value " + fmt(phi_i) + ", a " +
                                      fmt(100.0 * share) + "% share of the pool"};
}

}  // namespace shapkit
