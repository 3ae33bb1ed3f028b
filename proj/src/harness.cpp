#include "shapkit/harness.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "shapkit/error.hpp"
#include "shapkit/format.hpp"

namespace shapkit {

namespace fs = std::filesystem;

namespace {

std::string pct(double part, double total) { return total == 0.0 ? "" : shortest(100.0 * part / total); }

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + p.string());
  out << text;
}

std::optional<Allocation> try_values(const TrajectoryRecord& traj, bool shapley) {
  try {
    if (shapley) return shapley_from_trajectory(traj, TrajectoryShapleyMode::kFullCoalition);
    Allocation a{std::vector<double>(traj.agents)};
    for (int i = 0; i < traj.agents; ++i) a.payoffs[i] = marginal_contribution_traj(traj, i);
    return a;
  } catch (const Error&) {
    return std::nullopt;
  }
}

void write_bundle(const ManifestJob& job, const std::vector<const EpisodeResult*>& results) {
  fs::create_directories(job.output / "trajectories");
  std::string contributions = "job,seed,agent,policy,realized,marginal,shapley\n";
  std::string allocation = "job,seed,agent,actual,expected,actual_pct,expected_pct\n";
  std::string transcripts;
  nlohmann::json episodes = nlohmann::json::array();
  double total_sum = 0.0;
  int completed = 0;

  for (std::size_t k = 0; k < results.size(); ++k) {
    const EpisodeResult& r = *results[k];
    const std::uint64_t seed = job.seeds[k];
    const std::string traj_name = "trajectories/seed_" + std::to_string(seed) + ".jsonl";
    nlohmann::json ep{{"seed", seed}};
    if (r.trajectory.env_id.empty()) {
      ep["status"] = "skipped";
      ep["error"] = r.error;
      episodes.push_back(ep);
      continue;
    }
    save_trajectory(r.trajectory, (job.output / traj_name).string());
    ep["trajectory"] = traj_name;
    ep["status"] = r.aborted ? "aborted" : "ok";
    if (r.aborted) ep["error"] = r.error;
    const auto& st = r.settlement;
    const double total = st.realized.total();
    ep["realized_total"] = total;
    ep["settlement"] = st.to_json();
    if (!r.trajectory.steps.empty() && r.trajectory.steps.back().terminal) {
      ep["outcome"] = r.trajectory.steps.back().info;
    }
    episodes.push_back(ep);
    if (!r.aborted) {
      total_sum += total;
      ++completed;
    }

    const auto marginal = st.marginal ? st.marginal : try_values(r.trajectory, false);
    const auto shapley = st.shapley ? st.shapley : try_values(r.trajectory, true);
    const double alloc_total = st.allocation.total();
    const double phi_total = shapley ? shapley->total() : 0.0;
    for (int i = 0; i < r.trajectory.agents; ++i) {
      const std::string prefix = job.id + "," + std::to_string(seed) + "," + std::to_string(i);
      const std::string policy = i < static_cast<int>(r.trajectory.policies.size()) ? r.trajectory.policies[i] : "";
      contributions += prefix + "," + policy + "," + shortest(st.realized[i]) + "," +
                       (marginal ? shortest((*marginal)[i]) : "") + "," + (shapley ? shortest((*shapley)[i]) : "") +
                       "\n";
      allocation += prefix + "," + shortest(st.allocation[i]) + "," + (shapley ? shortest((*shapley)[i]) : "") + "," +
                    pct(st.allocation[i], alloc_total) + "," + (shapley ? pct((*shapley)[i], phi_total) : "") + "\n";
    }
    for (const auto& line : r.transcript) {
      nlohmann::json tagged = line;
      tagged["job"] = job.id;
      tagged["seed"] = seed;
      transcripts += tagged.dump() + "\n";
    }
  }

  nlohmann::json summary{{"job", job.id},
                         {"env", job.env_id},
                         {"env_config", job.env_config},
                         {"policies", job.policies},
                         {"pipeline", job.pipeline.to_json()},
                         {"seeds", job.seeds},
                         {"completed", completed},
                         {"mean_realized_total", completed ? total_sum / completed : 0.0},
                         {"episodes", episodes}};
  write_text(job.output / "contributions.csv", contributions);
  write_text(job.output / "allocation.csv", allocation);
  write_text(job.output / "transcripts.jsonl", transcripts);
  write_text(job.output / "summary.json", summary.dump(2) + "\n");
}

}  // namespace

RunManifest parse_manifest(const nlohmann::json& j, const fs::path& base_dir) {
  RunManifest m;
  try {
    if (!j.is_object()) throw ParseError("manifest must be a JSON object");
    m.parallelism = j.value("parallelism", 1);
    if (m.parallelism < 1) throw ParseError("parallelism must be >= 1");
    if (j.contains("backend") && !j["backend"].is_null()) m.backend = LlmBackendConfig::from_json(j["backend"]);
    std::set<std::string> ids;
    std::set<fs::path> outputs;
    for (const auto& jj : j.value("jobs", nlohmann::json::array())) {
      ManifestJob job;
      job.id = jj.at("id").get<std::string>();
      job.env_id = jj.at("env").get<std::string>();
      job.env_config = jj.value("config", nlohmann::json::object());
      job.policies = jj.at("policies").get<std::vector<std::string>>();
      for (const auto& p : job.policies) {
        if (p != "llm" && p != "greedy_selfish" && p != "role_balanced" && p != "shapley_negotiator") {
          throw ParseError("job '" + job.id + "': unknown policy '" + p + "'");
        }
      }
      job.pipeline = PipelineConfig::from_json(jj.value("pipeline", nlohmann::json("SC")));
      if (!jj.contains("seeds") || !jj["seeds"].is_array() || jj["seeds"].empty()) {
        throw ParseError("job '" + job.id + "' must list its seeds explicitly");
      }
      job.seeds = jj.at("seeds").get<std::vector<std::uint64_t>>();
      fs::path out = jj.at("output").get<std::string>();
      job.output = (out.is_absolute() ? out : base_dir / out).lexically_normal();
      if (!ids.insert(job.id).second) throw InvalidArgument("duplicate job id '" + job.id + "'");
      if (!outputs.insert(job.output).second) {
        throw InvalidArgument("jobs share the output directory " + job.output.string());
      }
      m.jobs.push_back(std::move(job));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  return m;
}

RunManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open manifest " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return parse_manifest(j, fs::path(path).parent_path());
}

std::vector<JobStatus> run_manifest(const RunManifest& manifest, bool force) {
  for (const auto& job : manifest.jobs) {
    if (fs::exists(job.output) && !force) {
      throw InvalidArgument("output directory " + job.output.string() + " already exists (use --force to overwrite)");
    }
  }
  std::vector<BatchJob> batch;
  for (const auto& job : manifest.jobs) {
    for (auto seed : job.seeds) batch.push_back(BatchJob{job.env_id, job.env_config, job.policies, job.pipeline, seed});
  }
  const auto results = run_batch(batch, manifest.parallelism, manifest.backend);

  std::vector<JobStatus> out;
  std::size_t k = 0;
  for (const auto& job : manifest.jobs) {
    if (fs::exists(job.output)) fs::remove_all(job.output);
    std::vector<const EpisodeResult*> mine;
    JobStatus st{job.id, job.output, 0, 0};
    for (std::size_t s = 0; s < job.seeds.size(); ++s, ++k) {
      mine.push_back(&results[k]);
      ++st.episodes;
      if (results[k].aborted) {
        ++st.failed;
        if (results[k].error_class == ErrorClass::kBackend) ++st.backend_failures;
      }
    }
    write_bundle(job, mine);
    out.push_back(st);
  }
  return out;
}

std::string allocation_csv(const Allocation& phi) {
  const double total = phi.total();
  std::string out = "agent,phi,share_percent\n";
  for (std::size_t i = 0; i < phi.size(); ++i) {
    out += std::to_string(i) + "," + shortest(phi[i]) + "," + pct(phi[i], total) + "\n";
  }
  return out;
}

}  // namespace shapkit
