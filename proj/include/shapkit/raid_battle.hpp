#pragma once

// Four heroes against a boss. Each turn:
//   1. heroes act simultaneously (Fireball damages the boss, Heal restores the
//      most-injured living hero, Taunt marks the hero as a target);
//   2. if the boss still stands it attacks twice; attacks go to taunters when
//      any taunt (one each, both on a lone taunter), otherwise to the two
//      lowest-HP living heroes;
//   3. local rewards are paid and cooldowns tick. Deaths resolve after step 2.
// A win pays the team 100 * (1 - dead/heroes) * (1 - turns/max_turns).

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "shapkit/coalition.hpp"
#include "shapkit/environment.hpp"

namespace shapkit::raid {

inline constexpr std::string_view kEnvId = "raid_battle";
inline constexpr int kHeroes = 4;
inline constexpr int kSkills = 3;

enum class Skill { kTaunt = 0, kFireball = 1, kHeal = 2 };

std::string to_string(Skill s);
std::optional<Skill> parse_skill(std::string_view label);

/// Boss HP by level: 1 -> 2000, 2 -> 2500, 3 -> 3000.
double boss_hp_for_level(int level);

/// Every field has a default; values the game never states (hero HP, draw
/// spread, cooldown length) are interpretations and can be overridden.
struct RaidConfig {
  int level = 1;
  int max_turns = 10;
  std::uint64_t seed = 0;
  double fireball_mean = 125.0;  // open interval (100, 150)
  double heal_mean = 175.0;      // open interval (150, 200)
  double skill_std = 10.0;
  double hero_max_hp = 1000.0;
  double boss_attack = 300.0;
  double reward_fireball = 2.0;
  double reward_taunt = 0.5;
  double reward_heal = 0.5;
  int taunt_cooldown = 1;

  double boss_hp() const { return boss_hp_for_level(level); }
  double local_reward(Skill s) const;

  /// Throws InvalidArgument on any violated invariant.
  void validate() const;

  nlohmann::json to_json() const;
  /// Omitted fields take defaults; a "boss_hp" field must agree with the level.
  static RaidConfig from_json(const nlohmann::json& j);
};

struct HeroState {
  double hp = 0.0;
  double max_hp = 0.0;
  std::array<int, kSkills> cooldowns{};

  bool alive() const { return hp > 0.0; }
  friend bool operator==(const HeroState&, const HeroState&) = default;
};

struct LedgerEntry {
  double damage_dealt = 0.0;
  double healing_done = 0.0;
  double taunt_blocked = 0.0;
  friend bool operator==(const LedgerEntry&, const LedgerEntry&) = default;
};

struct RaidState {
  std::vector<HeroState> heroes;
  double boss_hp = 0.0;
  int turn = 0;
  std::vector<LedgerEntry> ledger;

  static RaidState initial(const RaidConfig& cfg);

  bool boss_defeated() const { return boss_hp <= 0.0; }
  int dead_count() const;
  int living_count() const;

  nlohmann::json to_json() const;
  static RaidState from_json(const nlohmann::json& j);
  friend bool operator==(const RaidState&, const RaidState&) = default;
};

using HeroActions = std::vector<std::optional<Skill>>;

/// Stochastic amount for (hero, skill) this turn, already clamped at 0.
using DrawFn = std::function<double(int hero, Skill skill)>;

/// Gaussian draws from a counter-based stream keyed by (seed, turn, hero), so one
/// hero's draws never depend on what the others did.
DrawFn seeded_draws(const RaidConfig& cfg, std::uint64_t seed, int turn);

struct StepResult {
  RaidState next;
  std::vector<double> rewards;                // local rewards
  std::vector<std::optional<double>> draws;   // amount each hero drew, if any
  std::vector<LedgerEntry> delta;             // this step's ledger increments
  std::vector<int> boss_targets;              // hero hit by each boss attack
};

/// One turn. Errors: ProtocolError (episode over, action by a dead hero),
/// IllegalActionError (skill on cooldown).
StepResult step(const RaidConfig& cfg, const RaidState& state, const HeroActions& actions, const DrawFn& draws);

bool episode_over(const RaidConfig& cfg, const RaidState& state);

/// 100 * (1 - dead/total) * (1 - turns_used/max_turns).
double global_reward(int dead, int total_heroes, int turns_used, int max_turns);

/// Terminal team reward: global_reward on a win, 0 otherwise.
double terminal_reward(const RaidConfig& cfg, const RaidState& state);

/// Per-hero totals summed from the logged step increments.
std::vector<LedgerEntry> contribution_ledger(const TrajectoryRecord& traj);

/// R(C, traj): replay the log from its first state with heroes outside C idle,
/// using the logged draws. Members' local rewards plus, on a win, the team reward.
double ablated_outcome(const TrajectoryRecord& traj, Coalition members);

class RaidBattleEnv final : public Environment {
 public:
  explicit RaidBattleEnv(RaidConfig cfg = {}, std::optional<RaidState> start = std::nullopt);

  std::string_view id() const override { return kEnvId; }
  int num_agents() const override { return kHeroes; }
  void reset(std::uint64_t seed) override;
  bool done() const override;
  int turn() const override { return state_.turn; }
  nlohmann::json snapshot() const override { return state_.to_json(); }
  nlohmann::json config_json() const override;
  std::vector<std::string> legal_actions(int agent) const override;
  void step(const JointAction& joint) override;
  TrajectoryRecord trajectory() const override;
  std::vector<double> preview_payoffs(const JointAction& joint) const override;
  std::optional<std::string> action_from_intent(std::string_view phrase) const override;
  std::string intent_phrase(const std::string& label) const override;

  const RaidConfig& config() const { return cfg_; }
  const RaidState& state() const { return state_; }

  /// Steps with caller-supplied draws (fixtures and replays).
  void step_with(const HeroActions& actions, const DrawFn& draws);

 private:
  TrajectoryStep terminal_step() const;

  RaidConfig cfg_;
  std::optional<RaidState> start_;
  std::uint64_t seed_ = 0;
  RaidState state_;
  std::vector<TrajectoryStep> steps_;
};

}  // namespace shapkit::raid
