#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "shapkit/trajectory.hpp"

namespace shapkit {

/// Joint action as serialized labels; nullopt is a no-op.
using JointAction = std::vector<std::optional<std::string>>;

/// Stepping interface shared by the episode runner and the replay tools.
/// Actions cross this boundary as labels ("Door", "Fireball", ...); each
/// environment also exposes a typed API of its own.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string_view id() const = 0;
  virtual int num_agents() const = 0;
  virtual void reset(std::uint64_t seed) = 0;
  virtual bool done() const = 0;
  virtual int turn() const = 0;
  virtual nlohmann::json snapshot() const = 0;
  virtual nlohmann::json config_json() const = 0;

  /// Labels the agent may play now; empty when the agent cannot act.
  virtual std::vector<std::string> legal_actions(int agent) const = 0;
  virtual void step(const JointAction& joint) = 0;

  /// Steps taken so far, plus the terminal reward step once done.
  virtual TrajectoryRecord trajectory() const = 0;

  /// Per-agent payoff this step would pay if played now (no side effects).
  virtual std::vector<double> preview_payoffs(const JointAction& joint) const = 0;

  /// Maps an intent phrase ("pull the lever") to an action label, if known.
  virtual std::optional<std::string> action_from_intent(std::string_view phrase) const = 0;
  /// Phrase used when announcing an action in an Intent message.
  virtual std::string intent_phrase(const std::string& label) const = 0;
};

/// Builds an environment from its id and JSON config ("escape_room", "raid_battle").
std::unique_ptr<Environment> make_environment(std::string_view env_id, const nlohmann::json& config);

}  // namespace shapkit
