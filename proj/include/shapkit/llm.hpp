#pragma once

// Optional model backend: an OpenAI-compatible chat-completions client plus the
// prompt templates the LLM-driven policy and reasoner fill in. Nothing here is
// needed offline; scripted policies never touch the network.

#include <functional>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "shapkit/shapley_cot.hpp"

namespace shapkit {

struct LlmBackendConfig {
  std::string base_url = "https://api.deepseek.com/v1";
  std::string model = "deepseek-chat";
  std::string api_key_env = "SHAPKIT_API_KEY";  // empty: send no Authorization header
  double timeout_s = 60.0;
  int max_retries = 2;
  double temperature = 0.0;
  int backoff_ms = 500;  // first retry delay, doubled each attempt
  /// Receives request/response lines with the key scrubbed. Optional.
  std::function<void(const std::string&)> log;

  void validate() const;
  static LlmBackendConfig from_json(const nlohmann::json& j);
  /// Never contains the key itself, only the variable name.
  nlohmann::json to_json() const;
};

/// Process-wide cap on concurrent in-flight requests (default 4).
void set_llm_concurrency(int max_in_flight);

/// One chat completion. Retries transport errors, 429 and 5xx with exponential
/// backoff; throws BackendError carrying the number of attempts made.
std::string llm_complete(const LlmBackendConfig& cfg, const std::string& prompt);

/// Replaces every occurrence of `secret` with "***".
std::string redact(std::string text, const std::string& secret);

/// Versioned prompt text with {placeholder} substitution.
class PromptTemplates {
 public:
  static PromptTemplates defaults();
  /// Keys present in `overrides` replace the defaults; "version" renames the set.
  static PromptTemplates with_overrides(const nlohmann::json& overrides);

  const std::string& version() const { return version_; }
  const std::string& text(const std::string& name) const;
  /// Throws NotFoundError for an unknown template or an unfilled placeholder.
  std::string render(const std::string& name, const std::map<std::string, std::string>& vars) const;

 private:
  std::string version_;
  std::map<std::string, std::string> text_;
};

/// Reasoner backed by the model. Replies are parsed leniently: the first number
/// for estimates, a sign word for the externality, a tagged proposal for drafts.
class LlmReasoner final : public Reasoner {
 public:
  LlmReasoner(LlmBackendConfig cfg, PromptTemplates prompts = PromptTemplates::defaults());

  PayoffEstimate estimate_cooperative_payoff(const Environment& env, const JointAction& planned) override;
  ExternalityJudgement classify_externality(const Environment& env, int agent, const JointAction& planned) override;
  TransferProposal draft_adjustment(const ExternalityAssessment& assessment, const Environment& env,
                                    const JointAction& planned, const PayoffEstimate& estimate) override;

 private:
  LlmBackendConfig cfg_;
  PromptTemplates prompts_;
};

/// Helpers shared with the policy layer.
std::string describe_joint(const Environment& env, const JointAction& joint);
std::optional<double> first_number(std::string_view text);

}  // namespace shapkit
