#include "shapkit/raid_battle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "shapkit/rng.hpp"

namespace shapkit::raid {

namespace {

constexpr std::array<std::string_view, kSkills> kSkillNames = {"Taunt", "Fireball", "Heal"};

int idx(Skill s) { return static_cast<int>(s); }

// Most injured living hero (largest HP deficit), lowest index on ties.
std::optional<int> most_injured(const std::vector<HeroState>& heroes) {
  std::optional<int> best;
  double best_deficit = -1.0;
  for (int h = 0; h < static_cast<int>(heroes.size()); ++h) {
    if (!heroes[h].alive()) continue;
    const double deficit = heroes[h].max_hp - heroes[h].hp;
    if (deficit > best_deficit) {
      best = h;
      best_deficit = deficit;
    }
  }
  return best;
}

// Living heroes sorted by HP ascending, index breaking ties.
std::vector<int> by_lowest_hp(const std::vector<HeroState>& heroes) {
  std::vector<int> order;
  for (int h = 0; h < static_cast<int>(heroes.size()); ++h)
    if (heroes[h].alive()) order.push_back(h);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return heroes[a].hp < heroes[b].hp; });
  return order;
}

nlohmann::json ledger_array(const std::vector<LedgerEntry>& l, double LedgerEntry::*field) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : l) out.push_back(e.*field);
  return out;
}

}  // namespace

std::string to_string(Skill s) { return std::string(kSkillNames[idx(s)]); }

std::optional<Skill> parse_skill(std::string_view label) {
  for (int i = 0; i < kSkills; ++i)
    if (kSkillNames[i] == label) return static_cast<Skill>(i);
  return std::nullopt;
}

double boss_hp_for_level(int level) {
  switch (level) {
    case 1:
      return 2000.0;
    case 2:
      return 2500.0;
    case 3:
      return 3000.0;
    default:
      throw InvalidArgument("raid level must be 1, 2 or 3, got " + std::to_string(level));
  }
}

double RaidConfig::local_reward(Skill s) const {
  switch (s) {
    case Skill::kFireball:
      return reward_fireball;
    case Skill::kTaunt:
      return reward_taunt;
    case Skill::kHeal:
      return reward_heal;
  }
  return 0.0;
}

void RaidConfig::validate() const {
  boss_hp_for_level(level);
  if (max_turns != 10) throw InvalidArgument("max_turns is fixed at 10");
  if (!(fireball_mean > 100.0 && fireball_mean < 150.0)) throw InvalidArgument("fireball_mean must lie in (100, 150)");
  if (!(heal_mean > 150.0 && heal_mean < 200.0)) throw InvalidArgument("heal_mean must lie in (150, 200)");
  if (!(skill_std >= 0.0)) throw InvalidArgument("skill_std must be >= 0");
  if (!(hero_max_hp > 0.0)) throw InvalidArgument("hero_max_hp must be positive");
  if (!(boss_attack > 0.0)) throw InvalidArgument("boss_attack must be positive");
  if (reward_fireball != 2.0 || reward_taunt != 0.5 || reward_heal != 0.5) {
    throw InvalidArgument("local rewards are fixed at Fireball 2, Taunt 0.5, Heal 0.5");
  }
  if (taunt_cooldown < 0) throw InvalidArgument("taunt_cooldown must be >= 0");
}

nlohmann::json RaidConfig::to_json() const {
  return {{"level", level},
          {"boss_hp", boss_hp()},
          {"max_turns", max_turns},
          {"seed", seed},
          {"fireball_mean", fireball_mean},
          {"heal_mean", heal_mean},
          {"skill_std", skill_std},
          {"hero_max_hp", hero_max_hp},
          {"boss_attack", boss_attack},
          {"local_reward", {{"Fireball", reward_fireball}, {"Taunt", reward_taunt}, {"Heal", reward_heal}}},
          {"taunt_cooldown", taunt_cooldown}};
}

RaidConfig RaidConfig::from_json(const nlohmann::json& j) {
  RaidConfig c;
  if (!j.is_object()) throw InvalidArgument("raid config must be a JSON object");
  try {
    c.level = j.value("level", c.level);
    c.max_turns = j.value("max_turns", c.max_turns);
    c.seed = j.value("seed", c.seed);
    c.fireball_mean = j.value("fireball_mean", c.fireball_mean);
    c.heal_mean = j.value("heal_mean", c.heal_mean);
    c.skill_std = j.value("skill_std", c.skill_std);
    c.hero_max_hp = j.value("hero_max_hp", c.hero_max_hp);
    c.boss_attack = j.value("boss_attack", c.boss_attack);
    c.taunt_cooldown = j.value("taunt_cooldown", c.taunt_cooldown);
    if (j.contains("local_reward")) {
      const auto& lr = j["local_reward"];
      c.reward_fireball = lr.value("Fireball", c.reward_fireball);
      c.reward_taunt = lr.value("Taunt", c.reward_taunt);
      c.reward_heal = lr.value("Heal", c.reward_heal);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("raid config: ") + e.what());
  }
  if (j.contains("boss_hp") && j["boss_hp"].get<double>() != boss_hp_for_level(c.level)) {
    throw InvalidArgument("boss_hp does not match level " + std::to_string(c.level));
  }
  c.validate();
  return c;
}

RaidState RaidState::initial(const RaidConfig& cfg) {
  RaidState s;
  s.heroes.assign(kHeroes, HeroState{cfg.hero_max_hp, cfg.hero_max_hp, {}});
  s.boss_hp = cfg.boss_hp();
  s.ledger.assign(kHeroes, LedgerEntry{});
  return s;
}

int RaidState::dead_count() const {
  return static_cast<int>(std::count_if(heroes.begin(), heroes.end(), [](const HeroState& h) { return !h.alive(); }));
}

int RaidState::living_count() const { return static_cast<int>(heroes.size()) - dead_count(); }

nlohmann::json RaidState::to_json() const {
  nlohmann::json hp = nlohmann::json::array();
  nlohmann::json max_hp = nlohmann::json::array();
  nlohmann::json cooldowns = nlohmann::json::array();
  for (const auto& h : heroes) {
    hp.push_back(h.hp);
    max_hp.push_back(h.max_hp);
    cooldowns.push_back(h.cooldowns);
  }
  return {{"turn", turn},
          {"boss_hp", boss_hp},
          {"hp", hp},
          {"max_hp", max_hp},
          {"cooldowns", cooldowns},
          {"ledger",
           {{"damage", ledger_array(ledger, &LedgerEntry::damage_dealt)},
            {"healing", ledger_array(ledger, &LedgerEntry::healing_done)},
            {"taunt_blocked", ledger_array(ledger, &LedgerEntry::taunt_blocked)}}}};
}

RaidState RaidState::from_json(const nlohmann::json& j) {
  RaidState s;
  try {
    s.turn = j.at("turn").get<int>();
    s.boss_hp = j.at("boss_hp").get<double>();
    const auto hp = j.at("hp").get<std::vector<double>>();
    const auto max_hp = j.at("max_hp").get<std::vector<double>>();
    const auto cds = j.at("cooldowns").get<std::vector<std::array<int, kSkills>>>();
    if (hp.size() != max_hp.size() || hp.size() != cds.size()) throw ReplayError("raid state arrays differ in length");
    for (std::size_t h = 0; h < hp.size(); ++h) s.heroes.push_back(HeroState{hp[h], max_hp[h], cds[h]});
    s.ledger.assign(hp.size(), LedgerEntry{});
    if (j.contains("ledger")) {
      const auto& l = j["ledger"];
      const auto dmg = l.at("damage").get<std::vector<double>>();
      const auto heal = l.at("healing").get<std::vector<double>>();
      const auto taunt = l.at("taunt_blocked").get<std::vector<double>>();
      for (std::size_t h = 0; h < hp.size(); ++h) s.ledger[h] = LedgerEntry{dmg.at(h), heal.at(h), taunt.at(h)};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ReplayError(std::string("malformed raid state: ") + e.what());
  }
  return s;
}

DrawFn seeded_draws(const RaidConfig& cfg, std::uint64_t seed, int turn) {
  return [cfg, seed, turn](int hero, Skill skill) {
    const double mean = skill == Skill::kHeal ? cfg.heal_mean : cfg.fireball_mean;
    if (cfg.skill_std == 0.0) return std::max(0.0, mean);
    auto engine = make_engine(seed, {static_cast<std::uint64_t>(Stream::kEnv), static_cast<std::uint64_t>(turn),
                                     static_cast<std::uint64_t>(hero)});
    std::normal_distribution<double> dist(mean, cfg.skill_std);
    return std::max(0.0, dist(engine));
  };
}

bool episode_over(const RaidConfig& cfg, const RaidState& state) {
  return state.boss_defeated() || state.living_count() == 0 || state.turn >= cfg.max_turns;
}

StepResult step(const RaidConfig& cfg, const RaidState& state, const HeroActions& actions, const DrawFn& draws) {
  if (episode_over(cfg, state)) throw ProtocolError("raid episode is already over");
  const int n = static_cast<int>(state.heroes.size());
  if (static_cast<int>(actions.size()) != n) throw InvalidArgument("one action slot per hero is required");
  for (int h = 0; h < n; ++h) {
    if (!actions[h]) continue;
    if (!state.heroes[h].alive()) throw ProtocolError("hero " + std::to_string(h) + " is dead and cannot act");
    if (state.heroes[h].cooldowns[idx(*actions[h])] > 0) {
      throw IllegalActionError("hero " + std::to_string(h) + ": " + to_string(*actions[h]) + " is on cooldown");
    }
  }

  StepResult out;
  out.next = state;
  out.rewards.assign(n, 0.0);
  out.draws.assign(n, std::nullopt);
  out.delta.assign(n, LedgerEntry{});
  RaidState& next = out.next;

  // Phase 1: simultaneous hero actions. Heal targets use HP at the start of the turn.
  const std::optional<int> heal_target = most_injured(state.heroes);
  double damage = 0.0;
  std::vector<int> taunters;
  for (int h = 0; h < n; ++h) {
    if (!actions[h]) continue;
    const Skill s = *actions[h];
    switch (s) {
      case Skill::kFireball: {
        const double d = std::max(0.0, draws(h, s));
        out.draws[h] = d;
        out.delta[h].damage_dealt = d;
        damage += d;
        break;
      }
      case Skill::kHeal: {
        const double d = std::max(0.0, draws(h, s));
        out.draws[h] = d;
        if (heal_target) {
          HeroState& t = next.heroes[*heal_target];
          const double restored = std::min(d, t.max_hp - t.hp);
          t.hp += restored;
          out.delta[h].healing_done = restored;
        }
        break;
      }
      case Skill::kTaunt:
        taunters.push_back(h);
        break;
    }
    out.rewards[h] = cfg.local_reward(s);
  }
  next.boss_hp = std::max(0.0, state.boss_hp - damage);

  // Phase 2: the boss strikes twice unless it fell this turn.
  if (!next.boss_defeated()) {
    std::vector<int> targets;
    if (!taunters.empty()) {
      targets = {taunters[0], taunters.size() > 1 ? taunters[1] : taunters[0]};
    } else {
      const auto order = by_lowest_hp(next.heroes);
      if (!order.empty()) targets = {order[0], order.size() > 1 ? order[1] : order[0]};
    }
    for (int t : targets) {
      HeroState& hero = next.heroes[t];
      hero.hp = std::max(0.0, hero.hp - cfg.boss_attack);
      if (!taunters.empty()) out.delta[t].taunt_blocked += cfg.boss_attack;
    }
    out.boss_targets = targets;
  }

  // Phase 3: cooldowns tick, then fresh cooldowns are set.
  for (int h = 0; h < n; ++h) {
    for (int& cd : next.heroes[h].cooldowns) cd = std::max(0, cd - 1);
    if (actions[h] == Skill::kTaunt) next.heroes[h].cooldowns[idx(Skill::kTaunt)] = cfg.taunt_cooldown;
    next.ledger[h].damage_dealt += out.delta[h].damage_dealt;
    next.ledger[h].healing_done += out.delta[h].healing_done;
    next.ledger[h].taunt_blocked += out.delta[h].taunt_blocked;
  }
  next.turn = state.turn + 1;
  return out;
}

double global_reward(int dead, int total_heroes, int turns_used, int max_turns) {
  if (total_heroes < 1 || dead < 0 || dead > total_heroes) throw InvalidArgument("dead must lie in 0..total_heroes");
  if (max_turns < 1 || turns_used < 0 || turns_used > max_turns) throw InvalidArgument("turns_used must lie in 0..max_turns");
  return 100.0 * (1.0 - static_cast<double>(dead) / total_heroes) *
         (1.0 - static_cast<double>(turns_used) / max_turns);
}

double terminal_reward(const RaidConfig& cfg, const RaidState& state) {
  if (!state.boss_defeated()) return 0.0;
  return global_reward(state.dead_count(), static_cast<int>(state.heroes.size()), state.turn, cfg.max_turns);
}

std::vector<LedgerEntry> contribution_ledger(const TrajectoryRecord& traj) {
  if (traj.env_id != kEnvId) throw EnvMismatchError("not a raid-battle trajectory: " + traj.env_id);
  std::vector<LedgerEntry> out(static_cast<std::size_t>(traj.agents));
  for (const auto& s : traj.steps) {
    if (s.terminal || !s.info.contains("damage")) continue;
    const auto dmg = s.info.at("damage").get<std::vector<double>>();
    const auto heal = s.info.at("healing").get<std::vector<double>>();
    const auto taunt = s.info.at("taunt_blocked").get<std::vector<double>>();
    for (std::size_t h = 0; h < out.size(); ++h) {
      out[h].damage_dealt += dmg.at(h);
      out[h].healing_done += heal.at(h);
      out[h].taunt_blocked += taunt.at(h);
    }
  }
  return out;
}

double ablated_outcome(const TrajectoryRecord& traj, Coalition members) {
  if (traj.env_id != kEnvId) throw EnvMismatchError("not a raid-battle trajectory: " + traj.env_id);
  const RaidConfig cfg = RaidConfig::from_json(traj.config);
  if (traj.steps.empty()) return 0.0;
  RaidState state = RaidState::from_json(traj.steps.front().state);
  const int n = static_cast<int>(state.heroes.size());

  double total = 0.0;
  for (const auto& logged : traj.steps) {
    if (logged.terminal) break;
    if (episode_over(cfg, state)) break;
    if (static_cast<int>(logged.actions.size()) != n) throw ReplayError("logged step has the wrong number of actions");
    HeroActions acts(n);
    for (int h = 0; h < n; ++h) {
      if (!members.contains(h) || !logged.actions[h] || !state.heroes[h].alive()) continue;
      const auto skill = parse_skill(*logged.actions[h]);
      if (!skill) throw ReplayError("unknown raid action '" + *logged.actions[h] + "'");
      if (state.heroes[h].cooldowns[idx(*skill)] > 0) continue;
      acts[h] = skill;
    }
    auto replay_draw = [&](int hero, Skill) {
      if (hero >= static_cast<int>(logged.draws.size()) || !logged.draws[hero]) {
        throw ReplayError("no logged draw for hero " + std::to_string(hero));
      }
      return *logged.draws[hero];
    };
    StepResult r = step(cfg, state, acts, replay_draw);
    for (int h = 0; h < n; ++h)
      if (members.contains(h)) total += r.rewards[h];
    state = std::move(r.next);
  }
  if (!members.empty()) total += terminal_reward(cfg, state);
  return total;
}

RaidBattleEnv::RaidBattleEnv(RaidConfig cfg, std::optional<RaidState> start)
    : cfg_(cfg), start_(std::move(start)) {
  cfg_.validate();
  reset(cfg_.seed);
}

void RaidBattleEnv::reset(std::uint64_t seed) {
  seed_ = seed;
  cfg_.seed = seed;
  state_ = start_ ? *start_ : RaidState::initial(cfg_);
  steps_.clear();
}

bool RaidBattleEnv::done() const { return episode_over(cfg_, state_); }

nlohmann::json RaidBattleEnv::config_json() const { return cfg_.to_json(); }

std::vector<std::string> RaidBattleEnv::legal_actions(int agent) const {
  if (agent < 0 || agent >= kHeroes) throw OutOfRange("raid hero index " + std::to_string(agent));
  if (done() || !state_.heroes[agent].alive()) return {};
  std::vector<std::string> out;
  for (int s = 0; s < kSkills; ++s)
    if (state_.heroes[agent].cooldowns[s] == 0) out.push_back(std::string(kSkillNames[s]));
  return out;
}

void RaidBattleEnv::step(const JointAction& joint) {
  if (static_cast<int>(joint.size()) != kHeroes) throw InvalidArgument("raid needs one action slot per hero");
  HeroActions acts(kHeroes);
  for (int h = 0; h < kHeroes; ++h) {
    if (!joint[h]) continue;
    acts[h] = parse_skill(*joint[h]);
    if (!acts[h]) throw IllegalActionError("unknown raid action '" + *joint[h] + "'");
  }
  step_with(acts, seeded_draws(cfg_, seed_, state_.turn));
}

void RaidBattleEnv::step_with(const HeroActions& actions, const DrawFn& draws) {
  StepResult r = raid::step(cfg_, state_, actions, draws);
  TrajectoryStep s;
  s.state = state_.to_json();
  for (const auto& a : actions) s.actions.push_back(a ? std::optional<std::string>(to_string(*a)) : std::nullopt);
  s.draws = r.draws;
  s.rewards = r.rewards;
  nlohmann::json hp_after = nlohmann::json::array();
  for (const auto& h : r.next.heroes) hp_after.push_back(h.hp);
  s.info = {{"damage", ledger_array(r.delta, &LedgerEntry::damage_dealt)},
            {"healing", ledger_array(r.delta, &LedgerEntry::healing_done)},
            {"taunt_blocked", ledger_array(r.delta, &LedgerEntry::taunt_blocked)},
            {"boss_targets", r.boss_targets},
            {"hp", hp_after},
            {"boss_hp", r.next.boss_hp}};
  steps_.push_back(std::move(s));
  state_ = std::move(r.next);
}

TrajectoryStep RaidBattleEnv::terminal_step() const {
  TrajectoryStep s;
  s.state = state_.to_json();
  s.actions.assign(kHeroes, std::nullopt);
  s.draws.assign(kHeroes, std::nullopt);
  const double reward = terminal_reward(cfg_, state_);
  s.rewards.assign(kHeroes, reward / kHeroes);
  s.info = {{"outcome", state_.boss_defeated() ? "win" : "loss"},
            {"dead", state_.dead_count()},
            {"turns_used", state_.turn},
            {"global_reward", reward}};
  s.terminal = true;
  return s;
}

TrajectoryRecord RaidBattleEnv::trajectory() const {
  TrajectoryRecord traj;
  traj.env_id = std::string(kEnvId);
  traj.seed = seed_;
  traj.agents = kHeroes;
  traj.config = cfg_.to_json();
  traj.steps = steps_;
  if (done()) traj.steps.push_back(terminal_step());
  return traj;
}

std::vector<double> RaidBattleEnv::preview_payoffs(const JointAction& joint) const {
  std::vector<double> out(kHeroes, 0.0);
  for (int h = 0; h < kHeroes && h < static_cast<int>(joint.size()); ++h) {
    if (!joint[h]) continue;
    if (auto s = parse_skill(*joint[h])) out[h] = cfg_.local_reward(*s);
  }
  return out;
}

std::optional<std::string> RaidBattleEnv::action_from_intent(std::string_view phrase) const {
  for (int s = 0; s < kSkills; ++s) {
    const std::string name(kSkillNames[s]);
    if (phrase == name || phrase == "cast " + name) return name;
  }
  if (phrase == "taunt the boss") return "Taunt";
  if (phrase == "heal the team") return "Heal";
  return std::nullopt;
}

std::string RaidBattleEnv::intent_phrase(const std::string& label) const { return "cast " + label; }

}  // namespace shapkit::raid
