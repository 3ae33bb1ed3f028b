#pragma once

// Act-time externality reasoning and post-episode credit assignment.
//
// Short term: estimate the cooperative payoff of the planned joint action,
// classify the sign of the agent's externality on the others, and draft a
// price adjustment (offer when harmful, request when beneficial).
//
// Long term: R(N, traj) from the log, R(C, traj) by counterfactual replay,
// marginal contributions and Shapley values over those coalition outcomes.

#include <memory>
#include <string>
#include <vector>

#include "shapkit/coalition.hpp"
#include "shapkit/environment.hpp"
#include "shapkit/negotiation.hpp"
#include "shapkit/trajectory.hpp"

namespace shapkit {

struct PayoffEstimate {
  double value = 0.0;
  std::string confidence;  // "exact", "heuristic", or backend-provided text
};

enum class ExternalitySign { kPositive, kNegative };
enum class CompensationDirection { kRequest, kOffer };

std::string_view to_string(ExternalitySign s);
std::string_view to_string(CompensationDirection d);

struct ExternalityJudgement {
  ExternalitySign sign = ExternalitySign::kPositive;
  std::string rationale;
};

struct ExternalityAssessment {
  int agent = 0;
  ExternalitySign sign = ExternalitySign::kPositive;
  std::string rationale;
  /// Negative externalities offer compensation; positive ones request it.
  CompensationDirection direction() const {
    return sign == ExternalitySign::kNegative ? CompensationDirection::kOffer : CompensationDirection::kRequest;
  }
};

/// Pluggable reasoning backend. `env` is positioned at the decision point.
class Reasoner {
 public:
  virtual ~Reasoner() = default;
  virtual PayoffEstimate estimate_cooperative_payoff(const Environment& env, const JointAction& planned) = 0;
  virtual ExternalityJudgement classify_externality(const Environment& env, int agent, const JointAction& planned) = 0;
  virtual TransferProposal draft_adjustment(const ExternalityAssessment& assessment, const Environment& env,
                                            const JointAction& planned, const PayoffEstimate& estimate) = 0;
};

/// Deterministic offline reasoner.
///  - Escape room: the cooperative optimum is read off the payoff matrix and the
///    externality sign is the change in the partner's payoff versus idling.
///  - Raid battle: Fireball is harmful when nobody taunts (the boss then hits the
///    two weakest allies) or when an ally is in lethal range and nobody heals;
///    Taunt and Heal are beneficial.
///  Drafts price the gap between the agent's immediate payoff and the mean
///  immediate payoff of the planned joint action, signed by direction.
class RuleBasedReasoner final : public Reasoner {
 public:
  PayoffEstimate estimate_cooperative_payoff(const Environment& env, const JointAction& planned) override;
  ExternalityJudgement classify_externality(const Environment& env, int agent, const JointAction& planned) override;
  TransferProposal draft_adjustment(const ExternalityAssessment& assessment, const Environment& env,
                                    const JointAction& planned, const PayoffEstimate& estimate) override;
};

struct ShortTermResult {
  PayoffEstimate estimate;
  ExternalityAssessment assessment;
  TransferProposal proposal;
};

/// Throws NoCounterpartyError in single-agent settings and InvalidArgument when
/// the agent has no planned action.
ShortTermResult short_term_step(Reasoner& reasoner, const Environment& env, const JointAction& planned, int agent);

enum class CounterfactualMode { kAblateLog, kResimulate };
enum class TrajectoryShapleyMode { kLiteral, kFullCoalition };

std::string_view to_string(CounterfactualMode m);
CounterfactualMode parse_counterfactual_mode(std::string_view s);

/// Sum of every agent's reward over every step, terminal reward included.
double collective_outcome(const TrajectoryRecord& traj);

/// R(C, traj). Throws ProvenanceError without a seed, ReplayError for an unknown env.
double coalition_outcome(const TrajectoryRecord& traj, Coalition members,
                         CounterfactualMode mode = CounterfactualMode::kAblateLog);

/// R(N, traj) - R(N \ {agent}, traj).
double marginal_contribution_traj(const TrajectoryRecord& traj, int agent,
                                  CounterfactualMode mode = CounterfactualMode::kAblateLog);

/// Sum over C of the coalition weights for an n-player game (1 up to rounding).
double coalition_weight_sum(int n);

/// kLiteral weights the constant marginal contribution over every coalition,
/// which collapses to that contribution. kFullCoalition builds v(C) = R(C, traj)
/// and runs the exact solver.
Allocation shapley_from_trajectory(const TrajectoryRecord& traj, TrajectoryShapleyMode mode,
                                   CounterfactualMode cf = CounterfactualMode::kAblateLog);

/// The game v(C) = R(C, traj) itself.
CharacteristicGame trajectory_game(const TrajectoryRecord& traj, CounterfactualMode cf = CounterfactualMode::kAblateLog);

/// phi_i / sum(phi) in percent. Throws DegenerateSplitError when the sum is 0.
std::vector<double> percentage_split(const Allocation& phi);

/// Claim of phi_i / phi_sum of `pool` for the agent, reasoning citing phi_i.
TransferProposal build_offer(double phi_i, double phi_sum, double pool, int agent);

}  // namespace shapkit
