#include "shapkit/trajectory.hpp"

#include <fstream>
#include <sstream>

#include "shapkit/error.hpp"

namespace shapkit {

namespace {

nlohmann::json step_to_json(std::size_t t, const TrajectoryStep& s) {
  nlohmann::json actions = nlohmann::json::array();
  for (const auto& a : s.actions) actions.push_back(a ? nlohmann::json(*a) : nlohmann::json(nullptr));
  nlohmann::json draws = nlohmann::json::array();
  for (const auto& d : s.draws) draws.push_back(d ? nlohmann::json(*d) : nlohmann::json(nullptr));
  nlohmann::json j{{"t", t}, {"state", s.state}, {"actions", actions}, {"draws", draws}, {"rewards", s.rewards},
                   {"info", s.info}};
  if (s.terminal) j["terminal"] = true;
  return j;
}

TrajectoryStep step_from_json(const nlohmann::json& j) {
  TrajectoryStep s;
  s.state = j.value("state", nlohmann::json::object());
  for (const auto& a : j.at("actions")) {
    s.actions.push_back(a.is_null() ? std::nullopt : std::optional<std::string>(a.get<std::string>()));
  }
  if (j.contains("draws")) {
    for (const auto& d : j.at("draws")) {
      s.draws.push_back(d.is_null() ? std::nullopt : std::optional<double>(d.get<double>()));
    }
  }
  s.rewards = j.at("rewards").get<std::vector<double>>();
  s.info = j.value("info", nlohmann::json::object());
  s.terminal = j.value("terminal", false);
  return s;
}

}  // namespace

std::vector<double> TrajectoryRecord::realized_payoffs() const {
  std::vector<double> out(static_cast<std::size_t>(agents), 0.0);
  for (const auto& s : steps)
    for (std::size_t i = 0; i < s.rewards.size() && i < out.size(); ++i) out[i] += s.rewards[i];
  return out;
}

void write_jsonl(const TrajectoryRecord& traj, std::ostream& out) {
  nlohmann::json header{{"env_id", traj.env_id}, {"agents", traj.agents}};
  if (traj.seed) header["seed"] = *traj.seed;
  if (!traj.config.empty()) header["config"] = traj.config;
  if (!traj.policies.empty()) header["policies"] = traj.policies;
  if (!traj.pipeline.empty()) header["pipeline"] = traj.pipeline;
  out << header.dump() << '\n';
  for (std::size_t t = 0; t < traj.steps.size(); ++t) out << step_to_json(t, traj.steps[t]).dump() << '\n';
}

std::string to_jsonl(const TrajectoryRecord& traj) {
  std::ostringstream ss;
  write_jsonl(traj, ss);
  return ss.str();
}

TrajectoryRecord read_trajectory_jsonl(std::istream& in) {
  TrajectoryRecord traj;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!have_header) {
        traj.env_id = j.at("env_id").get<std::string>();
        traj.agents = j.at("agents").get<int>();
        if (j.contains("seed") && !j["seed"].is_null()) traj.seed = j["seed"].get<std::uint64_t>();
        traj.config = j.value("config", nlohmann::json::object());
        traj.policies = j.value("policies", std::vector<std::string>{});
        traj.pipeline = j.value("pipeline", std::string{});
        have_header = true;
      } else {
        traj.steps.push_back(step_from_json(j));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("trajectory line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_header) throw ParseError("trajectory has no header line");
  return traj;
}

TrajectoryRecord read_trajectory_jsonl(const std::string& text) {
  std::istringstream ss(text);
  return read_trajectory_jsonl(ss);
}

TrajectoryRecord load_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open trajectory file " + path);
  return read_trajectory_jsonl(in);
}

void save_trajectory(const TrajectoryRecord& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw NotFoundError("cannot write trajectory file " + path);
  write_jsonl(traj, out);
}

}  // namespace shapkit
