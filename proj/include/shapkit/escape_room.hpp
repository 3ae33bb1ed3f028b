#pragma once

// Two-agent one-shot escape game. The room opens only when one agent pulls
// the lever and the other goes through the door; the lever-puller stays behind.

#include <array>
#include <optional>
#include <string>
#include <utility>

#include "shapkit/coalition.hpp"
#include "shapkit/environment.hpp"

namespace shapkit::escape {

inline constexpr std::string_view kEnvId = "escape_room";

enum class EscapeAction { kDoor, kLever };

std::string to_string(EscapeAction a);
std::optional<EscapeAction> parse_action(std::string_view label);

using PayoffPair = std::pair<double, double>;

struct PayoffMatrix {
  /// cells[a1][a2], indexed by EscapeAction.
  std::array<std::array<PayoffPair, 2>, 2> cells;

  static PayoffMatrix canonical();
  const PayoffPair& at(EscapeAction a1, EscapeAction a2) const {
    return cells[static_cast<int>(a1)][static_cast<int>(a2)];
  }
  friend bool operator==(const PayoffMatrix&, const PayoffMatrix&) = default;
};

/// Exactly one Door and one Lever.
constexpr bool escaped(EscapeAction a1, EscapeAction a2) { return a1 != a2; }

PayoffPair step(EscapeAction a1, EscapeAction a2);

/// Payoffs when either agent may be absent (ablated). An agent alone never
/// attempts the room, so any absence yields (0, 0); this is the normalization
/// under which v({1}) = v({2}) = 0 and v({1,2}) = 9.
PayoffPair partial_step(std::optional<EscapeAction> a1, std::optional<EscapeAction> a2);

/// Success cells replaced by (phi1, phi2); failure cells unchanged.
PayoffMatrix compensated_matrix(const PayoffMatrix& m, const Allocation& phi);

/// v(C) of the escape game: 9 for the pair, 0 otherwise.
CharacteristicGame characteristic_game(const PayoffMatrix& m = PayoffMatrix::canonical());

/// Single-step trajectory for a played joint action.
TrajectoryRecord make_trajectory(EscapeAction a1, EscapeAction a2, std::optional<std::uint64_t> seed = 0);

class EscapeRoomEnv final : public Environment {
 public:
  explicit EscapeRoomEnv(PayoffMatrix matrix = PayoffMatrix::canonical()) : matrix_(matrix) {}

  std::string_view id() const override { return kEnvId; }
  int num_agents() const override { return 2; }
  void reset(std::uint64_t seed) override;
  bool done() const override { return played_.has_value(); }
  int turn() const override { return played_ ? 1 : 0; }
  nlohmann::json snapshot() const override;
  nlohmann::json config_json() const override { return nlohmann::json::object(); }
  std::vector<std::string> legal_actions(int agent) const override;
  void step(const JointAction& joint) override;
  TrajectoryRecord trajectory() const override;
  std::vector<double> preview_payoffs(const JointAction& joint) const override;
  std::optional<std::string> action_from_intent(std::string_view phrase) const override;
  std::string intent_phrase(const std::string& label) const override;

  const PayoffMatrix& matrix() const { return matrix_; }

 private:
  PayoffMatrix matrix_;
  std::uint64_t seed_ = 0;
  std::optional<TrajectoryStep> played_;
};

/// Coalition outcome of a logged escape trajectory with non-members replaced by no-ops.
double ablated_outcome(const TrajectoryRecord& traj, Coalition members);

}  // namespace shapkit::escape
