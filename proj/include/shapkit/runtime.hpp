#pragma once

// Episode runner for the four pipeline variants:
//   LLM_ONLY  agents act independently, no messages, payoffs as realized
//   NEG       intents are exchanged before every joint step
//   STS       NEG plus priced adjustments from the short-term reasoning step;
//             agreed prices are settled as transfers at the end
//   SC        STS plus the post-episode settlement on trajectory Shapley values
//
// Pre-act session per turn: round 1 every living agent announces an intent in
// index order (announcements are binding); later rounds carry at most one
// priced adjustment. Settlement session: every agent states a claim on the
// realized total until the claims are unanimously accepted.

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shapkit/coalition.hpp"
#include "shapkit/environment.hpp"
#include "shapkit/policies.hpp"
#include "shapkit/shapley_cot.hpp"
#include "shapkit/trajectory.hpp"

namespace shapkit {

enum class PipelineVariant { kLlmOnly, kNeg, kSts, kSc };

std::string_view to_string(PipelineVariant v);
PipelineVariant parse_pipeline(std::string_view s);

struct PipelineConfig {
  PipelineVariant variant = PipelineVariant::kSc;
  int max_negotiation_rounds = 5;
  std::string reasoner = "rule_based";  // or "llm"
  CounterfactualMode counterfactual = CounterfactualMode::kAblateLog;

  bool negotiation() const { return variant != PipelineVariant::kLlmOnly; }
  bool short_term() const { return variant == PipelineVariant::kSts || variant == PipelineVariant::kSc; }
  bool long_term() const { return variant == PipelineVariant::kSc; }

  void validate() const;
  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);
};

struct Settlement {
  Allocation realized;
  Allocation allocation;  // final payoffs
  TransferPlan transfers;  // realized -> allocation
  bool fallback = false;   // settlement session timed out; payoffs left as realized
  std::string note;
  std::optional<Allocation> marginal;  // Delta_i (SC only)
  std::optional<Allocation> shapley;   // full-coalition values (SC only)
  /// Claims on the table at the end of each settlement round (SC only).
  std::vector<std::vector<std::optional<double>>> claim_rounds;

  nlohmann::json to_json() const;
};

struct EpisodeResult {
  TrajectoryRecord trajectory;
  Settlement settlement;
  /// One object per negotiation message: phase, turn, round, sender, raw, parsed.
  std::vector<nlohmann::json> transcript;
  bool aborted = false;
  std::string error;
  ErrorClass error_class = ErrorClass::kBackend;  // meaningful when aborted
};

/// Policies are matched to agents by index. Backend failures abort the episode:
/// the partial trajectory is kept and the settlement falls back to realized
/// payoffs. `seed` drives the environment's draws.
EpisodeResult run_episode(Environment& env, const std::vector<PolicyPtr>& policies, const PipelineConfig& cfg,
                          std::uint64_t seed);

/// Post-task settlement on a finished trajectory (the last stage of run_episode).
/// Appends settlement messages to `transcript` when given.
Settlement settle_episode(const TrajectoryRecord& traj, const std::vector<PolicyPtr>& policies,
                          const PipelineConfig& cfg, std::vector<nlohmann::json>* transcript = nullptr);

/// R(C, traj) by re-running the episode from its seed and first state with the
/// agents outside C forced to idle. Policies are rebuilt from the recorded
/// scripted policy names. Throws ProvenanceError when either is missing.
double resimulate_outcome(const TrajectoryRecord& traj, Coalition members);

struct BatchJob {
  std::string env_id;
  nlohmann::json env_config = nlohmann::json::object();
  std::vector<std::string> policies;  // scripted names or "llm"
  PipelineConfig pipeline;
  std::uint64_t seed = 0;
};

/// Runs independent episodes on up to `parallelism` threads; results keep job order.
std::vector<EpisodeResult> run_batch(const std::vector<BatchJob>& jobs, int parallelism,
                                     const std::optional<LlmBackendConfig>& backend = std::nullopt);

}  // namespace shapkit
