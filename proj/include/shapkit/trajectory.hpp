#pragma once

// Logged episodes. On disk: JSONL, a header line followed by one line per step.
//   {"env_id": "...", "seed": 7, "agents": 4, "config": {...}, "policies": [...], "pipeline": "SC"}
//   {"t": 0, "state": {...}, "actions": ["Taunt", null, ...], "rewards": [...], "draws": [...], "info": {...}}

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace shapkit {

struct TrajectoryStep {
  nlohmann::json state = nlohmann::json::object();  // snapshot before the step
  std::vector<std::optional<std::string>> actions;  // nullopt = no-op
  std::vector<std::optional<double>> draws;         // stochastic amounts used by each agent
  std::vector<double> rewards;                      // per agent
  nlohmann::json info = nlohmann::json::object();   // env-specific accounting
  bool terminal = false;                            // synthetic step carrying the global reward

  friend bool operator==(const TrajectoryStep&, const TrajectoryStep&) = default;
};

struct TrajectoryRecord {
  std::string env_id;
  std::optional<std::uint64_t> seed;
  int agents = 0;
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::string> policies;
  std::string pipeline;
  std::vector<TrajectoryStep> steps;

  std::size_t length() const { return steps.size(); }

  /// Sum over steps of each agent's rewards.
  std::vector<double> realized_payoffs() const;

  friend bool operator==(const TrajectoryRecord&, const TrajectoryRecord&) = default;
};

void write_jsonl(const TrajectoryRecord& traj, std::ostream& out);
std::string to_jsonl(const TrajectoryRecord& traj);

/// Throws ParseError with the offending line number.
TrajectoryRecord read_trajectory_jsonl(std::istream& in);
TrajectoryRecord read_trajectory_jsonl(const std::string& text);
TrajectoryRecord load_trajectory(const std::string& path);
void save_trajectory(const TrajectoryRecord& traj, const std::string& path);

}  // namespace shapkit
