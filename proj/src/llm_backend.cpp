#include "shapkit/llm.hpp"

#ifdef SHAPKIT_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>

namespace shapkit {

namespace {

class InFlightLimiter {
 public:
  void set_limit(int n) {
    std::lock_guard lock(mu_);
    limit_ = std::max(1, n);
    cv_.notify_all();
  }
  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return active_ < limit_; });
    ++active_;
  }
  void release() {
    std::lock_guard lock(mu_);
    --active_;
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int limit_ = 4;
  int active_ = 0;
};

InFlightLimiter& limiter() {
  static InFlightLimiter l;
  return l;
}

struct Slot {
  Slot() { limiter().acquire(); }
  ~Slot() { limiter().release(); }
  Slot(const Slot&) = delete;
  Slot& operator=(const Slot&) = delete;
};

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // prefix + /chat/completions
};

Endpoint split_url(const std::string& base) {
  const auto scheme = base.find("://");
  if (scheme == std::string::npos) throw InvalidArgument("base_url needs a scheme: " + base);
  const auto slash = base.find('/', scheme + 3);
  Endpoint ep;
  ep.origin = base.substr(0, slash);
  std::string prefix = slash == std::string::npos ? "" : base.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  ep.path = prefix + "/chat/completions";
  return ep;
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

std::string fmt(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

}  // namespace

void LlmBackendConfig::validate() const {
  if (!(timeout_s > 0.0)) throw InvalidArgument("llm timeout must be positive");
  if (max_retries < 0) throw InvalidArgument("max_retries must be >= 0");
  if (base_url.empty() || model.empty()) throw InvalidArgument("llm base_url and model are required");
}

LlmBackendConfig LlmBackendConfig::from_json(const nlohmann::json& j) {
  LlmBackendConfig c;
  if (!j.is_object()) throw ParseError("backend config must be an object");
  c.base_url = j.value("base_url", c.base_url);
  c.model = j.value("model", c.model);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.timeout_s = j.value("timeout", c.timeout_s);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.temperature = j.value("temperature", c.temperature);
  c.backoff_ms = j.value("backoff_ms", c.backoff_ms);
  c.validate();
  return c;
}

nlohmann::json LlmBackendConfig::to_json() const {
  return {{"base_url", base_url}, {"model", model},       {"api_key_env", api_key_env}, {"timeout", timeout_s},
          {"max_retries", max_retries}, {"temperature", temperature}, {"backoff_ms", backoff_ms}};
}

void set_llm_concurrency(int max_in_flight) { limiter().set_limit(max_in_flight); }

std::string redact(std::string text, const std::string& secret) {
  if (secret.empty()) return text;
  for (auto pos = text.find(secret); pos != std::string::npos; pos = text.find(secret, pos + 3)) {
    text.replace(pos, secret.size(), "***");
  }
  return text;
}

std::string llm_complete(const LlmBackendConfig& cfg, const std::string& prompt) {
  cfg.validate();
  std::string key;
  if (!cfg.api_key_env.empty()) {
    const char* v = std::getenv(cfg.api_key_env.c_str());
    if (v == nullptr || *v == '\0') throw BackendError("environment variable " + cfg.api_key_env + " is not set", 0);
    key = v;
  }
  const Endpoint ep = split_url(cfg.base_url);
  const nlohmann::json body = {{"model", cfg.model},
                               {"temperature", cfg.temperature},
                               {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};
  const std::string payload = body.dump();
  auto log = [&](const std::string& line) {
    if (cfg.log) cfg.log(redact(line, key));
  };

  httplib::Headers headers;
  if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

  Slot slot;
  std::string last_error;
  const int attempts = cfg.max_retries + 1;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(cfg.backoff_ms) << (attempt - 2)));
    }
    httplib::Client client(ep.origin);
    const auto secs = std::chrono::duration<double>(cfg.timeout_s);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
    log("request attempt=" + std::to_string(attempt) + " POST " + ep.origin + ep.path + " " + payload);
    auto res = client.Post(ep.path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      log("response attempt=" + std::to_string(attempt) + " " + last_error);
      continue;
    }
    log("response attempt=" + std::to_string(attempt) + " status=" + std::to_string(res->status) + " " + res->body);
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      if (retryable_status(res->status)) continue;
      throw BackendError(redact(last_error + ": " + res->body, key), attempt);
    }
    try {
      const auto reply = nlohmann::json::parse(res->body);
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("malformed completion reply: ") + e.what(), attempt);
    }
  }
  throw BackendError(redact(last_error, key) + " after " + std::to_string(attempts) + " attempts", attempts);
}

PromptTemplates PromptTemplates::defaults() {
  PromptTemplates p;
  p.version_ = "v1";
  p.text_["act"] =
      "You are agent {agent} in the {env} game.\n"
      "Current state: {state}\n"
      "Actions announced so far this turn: {announced}\n"
      "Your legal actions: {legal}\n"
      "Answer with exactly one action name from the legal list.";
  p.text_["negotiate"] =
      "You are agent {agent} in the {env} game and are bargaining before acting.\n"
      "Planned joint action: {planned}\n"
      "Messages so far:\n{transcript}\n"
      "Reply with one tagged message, using one of these forms:\n"
      "<s>I propose transferring X because R</s>  (X > 0 you pay the others, X < 0 you ask them to pay you)\n"
      "<s>I agree because R</s>\n"
      "<s>I disagree because R</s>\n"
      "<s>I counter-propose transferring X because R</s>";
  p.text_["settle"] =
      "You are agent {agent} splitting a joint reward of {pool} after the episode.\n"
      "Your marginal contribution: {marginal}. Shapley estimate of your share: {phi}.\n"
      "Realized payoffs: {realized}\n"
      "Messages so far:\n{transcript}\n"
      "State the amount you claim as <s>I propose transferring X because R</s>, "
      "or accept the standing claims with <s>I agree because R</s>.";
  p.text_["estimate"] =
      "Game: {env}. State: {state}. Planned joint action: {planned}.\n"
      "What total payoff would the group earn if everyone cooperated from here? Reply with a single number.";
  p.text_["classify"] =
      "Game: {env}. State: {state}. Planned joint action: {planned}.\n"
      "Does agent {agent}'s action help or hurt the other agents? Reply 'positive' or 'negative' and one sentence.";
  p.text_["draft"] =
      "Game: {env}. Planned joint action: {planned}. Cooperative estimate: {estimate}.\n"
      "Agent {agent}'s action has a {sign} effect on the others ({rationale}).\n"
      "Propose a price as <s>I propose transferring X because R</s> where X > 0 means agent {agent} pays "
      "and X < 0 means agent {agent} is paid.";
  return p;
}

PromptTemplates PromptTemplates::with_overrides(const nlohmann::json& overrides) {
  PromptTemplates p = defaults();
  if (overrides.is_null()) return p;
  if (!overrides.is_object()) throw ParseError("prompt overrides must be an object");
  for (const auto& [k, v] : overrides.items()) {
    if (!v.is_string()) throw ParseError("prompt override '" + k + "' must be a string");
    if (k == "version") {
      p.version_ = v.get<std::string>();
    } else {
      p.text_[k] = v.get<std::string>();
    }
  }
  return p;
}

const std::string& PromptTemplates::text(const std::string& name) const {
  auto it = text_.find(name);
  if (it == text_.end()) throw NotFoundError("no prompt template named '" + name + "'");
  return it->second;
}

std::string PromptTemplates::render(const std::string& name, const std::map<std::string, std::string>& vars) const {
  const std::string& tpl = text(name);
  std::string out;
  out.reserve(tpl.size());
  for (std::size_t i = 0; i < tpl.size(); ++i) {
    if (tpl[i] == '{') {
      const auto close = tpl.find('}', i);
      if (close != std::string::npos) {
        const std::string key = tpl.substr(i + 1, close - i - 1);
        auto it = vars.find(key);
        if (it != vars.end()) {
          out += it->second;
          i = close;
          continue;
        }
        // only identifier-like keys count as placeholders
        if (!key.empty() && key.find_first_not_of("abcdefghijklmnopqrstuvwxyz_") == std::string::npos) {
          throw NotFoundError("prompt '" + name + "' needs a value for {" + key + "}");
        }
      }
    }
    out += tpl[i];
  }
  return out;
}

std::string describe_joint(const Environment& env, const JointAction& joint) {
  std::string out = "[";
  for (std::size_t i = 0; i < joint.size(); ++i) {
    if (i) out += ", ";
    out += "agent " + std::to_string(i) + ": " + (joint[i] ? env.intent_phrase(*joint[i]) : std::string("undecided"));
  }
  return out + "]";
}

std::optional<double> first_number(std::string_view text) {
  static const std::regex num(R"([-+]?\d+(\.\d+)?)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(text.begin(), text.end(), m, num)) return std::nullopt;
  return std::stod(m.str());
}

LlmReasoner::LlmReasoner(LlmBackendConfig cfg, PromptTemplates prompts)
    : cfg_(std::move(cfg)), prompts_(std::move(prompts)) {}

PayoffEstimate LlmReasoner::estimate_cooperative_payoff(const Environment& env, const JointAction& planned) {
  const std::string reply = llm_complete(cfg_, prompts_.render("estimate", {{"env", std::string(env.id())},
                                                                            {"state", env.snapshot().dump()},
                                                                            {"planned", describe_joint(env, planned)}}));
  const auto v = first_number(reply);
  if (!v) throw GrammarError("no number in estimate reply", reply);
  return {*v, "model"};
}

ExternalityJudgement LlmReasoner::classify_externality(const Environment& env, int agent, const JointAction& planned) {
  const std::string reply = llm_complete(cfg_, prompts_.render("classify", {{"env", std::string(env.id())},
                                                                            {"state", env.snapshot().dump()},
                                                                            {"planned", describe_joint(env, planned)},
                                                                            {"agent", std::to_string(agent)}}));
  std::string lower = reply;
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  const auto neg = lower.find("negative");
  const auto pos = lower.find("positive");
  if (neg == std::string::npos && pos == std::string::npos) throw GrammarError("no externality sign in reply", reply);
  ExternalityJudgement out;
  out.sign = (neg != std::string::npos && (pos == std::string::npos || neg < pos)) ? ExternalitySign::kNegative
                                                                                   : ExternalitySign::kPositive;
  out.rationale = reply;
  return out;
}

TransferProposal LlmReasoner::draft_adjustment(const ExternalityAssessment& assessment, const Environment& env,
                                               const JointAction& planned, const PayoffEstimate& estimate) {
  const std::string reply =
      llm_complete(cfg_, prompts_.render("draft", {{"env", std::string(env.id())},
                                                   {"planned", describe_joint(env, planned)},
                                                   {"estimate", fmt(estimate.value)},
                                                   {"agent", std::to_string(assessment.agent)},
                                                   {"sign", assessment.sign == ExternalitySign::kNegative ? "negative" : "positive"},
                                                   {"rationale", assessment.rationale}}));
  const auto tagged = extract_tagged(reply);
  if (!tagged) throw FrameError("no tagged proposal in reply");
  const auto msg = parse_message(*tagged);
  if (const auto* p = std::get_if<TransferProposal>(&msg)) return *p;
  throw GrammarError("draft reply is not a transfer proposal", *tagged);
}

}  // namespace shapkit
