#include "shapkit/escape_room.hpp"

namespace shapkit::escape {

std::string to_string(EscapeAction a) { return a == EscapeAction::kDoor ? "Door" : "Lever"; }

std::optional<EscapeAction> parse_action(std::string_view label) {
  if (label == "Door") return EscapeAction::kDoor;
  if (label == "Lever") return EscapeAction::kLever;
  return std::nullopt;
}

PayoffMatrix PayoffMatrix::canonical() {
  PayoffMatrix m;
  m.cells[0][0] = {-1.0, -1.0};  // Door, Door
  m.cells[0][1] = {10.0, -1.0};  // Door, Lever
  m.cells[1][0] = {-1.0, 10.0};  // Lever, Door
  m.cells[1][1] = {-1.0, -1.0};  // Lever, Lever
  return m;
}

PayoffPair step(EscapeAction a1, EscapeAction a2) { return PayoffMatrix::canonical().at(a1, a2); }

PayoffPair partial_step(std::optional<EscapeAction> a1, std::optional<EscapeAction> a2) {
  if (!a1 || !a2) return {0.0, 0.0};
  return step(*a1, *a2);
}

PayoffMatrix compensated_matrix(const PayoffMatrix& m, const Allocation& phi) {
  if (phi.size() != 2) throw InvalidArgument("escape-room allocation must have 2 entries");
  PayoffMatrix out = m;
  for (auto a1 : {EscapeAction::kDoor, EscapeAction::kLever}) {
    for (auto a2 : {EscapeAction::kDoor, EscapeAction::kLever}) {
      if (escaped(a1, a2)) out.cells[static_cast<int>(a1)][static_cast<int>(a2)] = {phi[0], phi[1]};
    }
  }
  return out;
}

CharacteristicGame characteristic_game(const PayoffMatrix& m) {
  const auto& success = m.at(EscapeAction::kLever, EscapeAction::kDoor);
  const double joint = success.first + success.second;
  return CharacteristicGame::from_table(2, {0.0, 0.0, 0.0, joint});
}

TrajectoryRecord make_trajectory(EscapeAction a1, EscapeAction a2, std::optional<std::uint64_t> seed) {
  EscapeRoomEnv env;
  env.reset(seed.value_or(0));
  env.step({to_string(a1), to_string(a2)});
  TrajectoryRecord traj = env.trajectory();
  traj.seed = seed;
  return traj;
}

void EscapeRoomEnv::reset(std::uint64_t seed) {
  seed_ = seed;
  played_.reset();
}

nlohmann::json EscapeRoomEnv::snapshot() const {
  return {{"room", played_ ? "resolved" : "locked"}};
}

std::vector<std::string> EscapeRoomEnv::legal_actions(int agent) const {
  if (agent < 0 || agent > 1) throw OutOfRange("escape room has agents 0 and 1");
  if (played_) return {};
  return {"Door", "Lever"};
}

void EscapeRoomEnv::step(const JointAction& joint) {
  if (played_) throw ProtocolError("escape room episode is already over");
  if (joint.size() != 2) throw InvalidArgument("escape room needs exactly two actions");
  std::array<std::optional<EscapeAction>, 2> acts;
  for (int i = 0; i < 2; ++i) {
    if (!joint[i]) continue;
    acts[i] = parse_action(*joint[i]);
    if (!acts[i]) throw IllegalActionError("unknown escape-room action '" + *joint[i] + "'");
  }
  TrajectoryStep s;
  s.state = snapshot();
  s.actions = joint;
  s.draws = {std::nullopt, std::nullopt};
  const PayoffPair r = (acts[0] && acts[1]) ? matrix_.at(*acts[0], *acts[1]) : PayoffPair{0.0, 0.0};
  s.rewards = {r.first, r.second};
  s.info = {{"escaped", acts[0] && acts[1] && escaped(*acts[0], *acts[1])}};
  played_ = std::move(s);
}

TrajectoryRecord EscapeRoomEnv::trajectory() const {
  TrajectoryRecord traj;
  traj.env_id = std::string(kEnvId);
  traj.seed = seed_;
  traj.agents = 2;
  if (played_) traj.steps.push_back(*played_);
  return traj;
}

std::vector<double> EscapeRoomEnv::preview_payoffs(const JointAction& joint) const {
  std::array<std::optional<EscapeAction>, 2> acts;
  for (int i = 0; i < 2 && i < static_cast<int>(joint.size()); ++i) {
    if (joint[i]) acts[i] = parse_action(*joint[i]);
  }
  const PayoffPair r = (acts[0] && acts[1]) ? matrix_.at(*acts[0], *acts[1]) : PayoffPair{0.0, 0.0};
  return {r.first, r.second};
}

std::optional<std::string> EscapeRoomEnv::action_from_intent(std::string_view phrase) const {
  if (phrase == "open the door" || phrase == "Door") return "Door";
  if (phrase == "pull the lever" || phrase == "Lever") return "Lever";
  return std::nullopt;
}

std::string EscapeRoomEnv::intent_phrase(const std::string& label) const {
  return label == "Lever" ? "pull the lever" : "open the door";
}

double ablated_outcome(const TrajectoryRecord& traj, Coalition members) {
  if (traj.env_id != kEnvId) throw EnvMismatchError("not an escape-room trajectory: " + traj.env_id);
  double total = 0.0;
  for (const auto& s : traj.steps) {
    if (s.actions.size() != 2) throw ReplayError("escape-room step must log two actions");
    std::array<std::optional<EscapeAction>, 2> acts;
    for (int i = 0; i < 2; ++i) {
      if (members.contains(i) && s.actions[i]) {
        acts[i] = parse_action(*s.actions[i]);
        if (!acts[i]) throw ReplayError("unknown escape-room action '" + *s.actions[i] + "'");
      }
    }
    const PayoffPair r = partial_step(acts[0], acts[1]);
    if (members.contains(0)) total += r.first;
    if (members.contains(1)) total += r.second;
  }
  return total;
}

}  // namespace shapkit::escape
