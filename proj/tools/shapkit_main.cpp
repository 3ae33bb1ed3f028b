// shapkit: Shapley credit tools.
//   shapkit shapley --game g.json [--samples N --seed S] [--csv out.csv]
//   shapkit run --manifest m.json [--force]
//   shapkit wev --input roles.csv [--weights w.json] [--csv out.csv]
//   shapkit replay --trajectory t.jsonl --ablate <agent|none> [--mode ablate_log|resimulate]
// Exit codes: 0 ok, 1 usage, 2 data, 3 backend.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "shapkit/coalition.hpp"
#include "shapkit/error.hpp"
#include "shapkit/format.hpp"
#include "shapkit/harness.hpp"
#include "shapkit/shapley_cot.hpp"
#include "shapkit/trajectory.hpp"
#include "shapkit/wev.hpp"

namespace {

constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kBackend = 3;

void write_or_throw(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw shapkit::InvalidArgument("cannot write " + path);
  out << text;
}

int cmd_shapley(const std::string& game_path, std::optional<std::int64_t> samples, std::uint64_t seed,
                const std::string& csv_path) {
  const auto game = shapkit::load_game_file(game_path);
  shapkit::Allocation phi;
  std::string method;
  if (samples || game.n() > shapkit::kDefaultEnumerationCap) {
    const std::int64_t k = samples.value_or(100000);
    phi = shapkit::shapley_sampled(game, k, seed);
    method = "sampled (" + std::to_string(k) + " orderings, seed " + std::to_string(seed) + ")";
  } else {
    phi = shapkit::shapley_exact(game);
    method = "exact";
  }
  std::string line;
  for (std::size_t i = 0; i < phi.size(); ++i) line += (i ? ", " : "") + shapkit::shortest(phi[i]);
  std::cout << line << "\n";
  std::cout << "# " << method << ", n = " << game.n() << "\n";
  const std::string csv = shapkit::allocation_csv(phi);
  std::cout << csv;
  if (!csv_path.empty()) write_or_throw(csv_path, csv);
  return 0;
}

int cmd_run(const std::string& manifest_path, bool force) {
  const auto manifest = shapkit::load_manifest(manifest_path);
  const auto statuses = shapkit::run_manifest(manifest, force);
  if (statuses.empty()) std::cout << "manifest has no jobs\n";
  int backend = 0;
  for (const auto& s : statuses) {
    std::cout << s.id << ": " << s.episodes << " episodes, " << s.failed << " failed -> " << s.output.string() << "\n";
    backend += s.backend_failures;
  }
  // bundles are written either way; the exit code flags model outages
  if (backend > 0) {
    std::cerr << "error: " << backend << " episode(s) aborted on backend errors\n";
    return kBackend;
  }
  return 0;
}

int cmd_wev(const std::string& input, const std::string& weights_path, const std::string& csv_path) {
  const auto in = shapkit::wev::load_wev_file(input);
  const auto w = weights_path.empty() ? shapkit::wev::WeightRanges{} : shapkit::wev::load_weights_file(weights_path);
  const auto rep = shapkit::wev::report(in.matrix, w, in.rewards);
  std::cout << rep.text();
  if (!csv_path.empty()) write_or_throw(csv_path, rep.csv());
  return 0;
}

int cmd_replay(const std::string& path, const std::string& ablate, const std::string& mode_name) {
  const auto traj = shapkit::load_trajectory(path);
  const auto mode = shapkit::parse_counterfactual_mode(mode_name);
  if (!traj.seed) throw shapkit::ProvenanceError(path + " has no seed; counterfactual replay needs one");

  std::optional<int> agent;
  if (ablate != "none") {
    std::size_t used = 0;
    int a = -1;
    try {
      a = std::stoi(ablate, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != ablate.size()) throw shapkit::InvalidArgument("--ablate takes an agent index or 'none'");
    if (a < 0 || a >= traj.agents) throw shapkit::OutOfRange("agent " + ablate + " is not in the trajectory");
    agent = a;
  }

  const auto all = shapkit::Coalition::grand(traj.agents);
  const double r_all = shapkit::coalition_outcome(traj, all, mode);
  std::cout << "R(N) = " << shapkit::shortest(r_all) << "\n";
  std::optional<double> delta;
  if (agent) {
    const double r_without = shapkit::coalition_outcome(traj, all.without(*agent), mode);
    delta = r_all - r_without;
    std::cout << "R(N \\ {" << *agent << "}) = " << shapkit::shortest(r_without) << "\n";
    std::cout << "delta_" << *agent << " = " << shapkit::shortest(*delta) << "\n";
  }
  const auto phi = shapkit::shapley_from_trajectory(traj, shapkit::TrajectoryShapleyMode::kFullCoalition, mode);
  std::cout << "agent,delta,phi\n";
  for (int i = 0; i < traj.agents; ++i) {
    std::cout << i << "," << (agent && *agent == i ? shapkit::shortest(*delta) : "") << ","
              << shapkit::shortest(phi[i]) << "\n";
  }
  return 0;
}

int exit_code(shapkit::ErrorClass c) {
  switch (c) {
    case shapkit::ErrorClass::kUsage: return kUsage;
    case shapkit::ErrorClass::kData: return kData;
    case shapkit::ErrorClass::kBackend: return kBackend;
  }
  return kData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shapley credit assignment, bargaining episodes and contribution reports"};
  app.require_subcommand(1);

  std::string game_path, csv_path;
  std::optional<std::int64_t> samples;
  std::uint64_t seed = 0;
  auto* shapley = app.add_subcommand("shapley", "Shapley values of a characteristic-function game file");
  shapley->add_option("--game", game_path, "game JSON")->required();
  shapley->add_option("--samples", samples, "sample this many orderings instead of enumerating")
      ->check(CLI::PositiveNumber);
  shapley->add_option("--seed", seed, "sampling seed");
  shapley->add_option("--csv", csv_path, "also write agent,phi,share_percent here");

  std::string manifest_path;
  bool force = false;
  auto* run = app.add_subcommand("run", "run every job in a manifest and write report bundles");
  run->add_option("--manifest", manifest_path, "manifest JSON")->required();
  run->add_flag("--force", force, "overwrite existing output directories");

  std::string wev_input, weights_path, wev_csv;
  auto* wev = app.add_subcommand("wev", "weighted earned value ranges and reward adjustments");
  wev->add_option("--input", wev_input, "role,code,dec,doc,fix,reward_pct CSV (or JSON)")->required();
  wev->add_option("--weights", weights_path, "weight ranges JSON");
  wev->add_option("--csv", wev_csv, "also write the report as CSV");

  std::string traj_path, ablate, mode = "ablate_log";
  auto* replay = app.add_subcommand("replay", "counterfactual outcomes for a logged trajectory");
  replay->add_option("--trajectory", traj_path, "trajectory JSONL")->required();
  replay->add_option("--ablate", ablate, "agent index to remove, or 'none'")->required();
  replay->add_option("--mode", mode, "ablate_log or resimulate")
      ->check(CLI::IsMember({"ablate_log", "resimulate"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    if (*shapley) return cmd_shapley(game_path, samples, seed, csv_path);
    if (*run) return cmd_run(manifest_path, force);
    if (*wev) return cmd_wev(wev_input, weights_path, wev_csv);
    if (*replay) return cmd_replay(traj_path, ablate, mode);
  } catch (const shapkit::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.error_class());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
