#pragma once

// Batch manifests and report bundles for the command-line tool.
//
// Manifest (JSON):
//   {"parallelism": 2,
//    "backend": {"base_url": ..., "model": ..., "api_key_env": ...},   optional
//    "jobs": [{"id": "escape_sc", "env": "escape_room", "config": {},
//              "policies": ["shapley_negotiator", "shapley_negotiator"],
//              "pipeline": "SC", "seeds": [0, 1, 2], "output": "out/escape_sc"}]}
// Relative outputs resolve against the manifest's directory.
//
// Bundle per job directory:
//   trajectories/seed_<s>.jsonl, contributions.csv, allocation.csv,
//   transcripts.jsonl, summary.json

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shapkit/coalition.hpp"
#include "shapkit/llm.hpp"
#include "shapkit/runtime.hpp"

namespace shapkit {

struct ManifestJob {
  std::string id;
  std::string env_id;
  nlohmann::json env_config = nlohmann::json::object();
  std::vector<std::string> policies;
  PipelineConfig pipeline;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output;
};

struct RunManifest {
  std::vector<ManifestJob> jobs;
  int parallelism = 1;
  std::optional<LlmBackendConfig> backend;
};

/// Throws ParseError on schema problems, InvalidArgument on duplicate ids or outputs.
RunManifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
RunManifest load_manifest(const std::string& path);

struct JobStatus {
  std::string id;
  std::filesystem::path output;
  int episodes = 0;
  int failed = 0;
  int backend_failures = 0;  // subset of failed
};

/// Refuses (InvalidArgument) when any job output exists and `force` is off;
/// nothing is written in that case.
std::vector<JobStatus> run_manifest(const RunManifest& manifest, bool force);

/// agent,phi,share_percent (share empty when the values sum to zero).
std::string allocation_csv(const Allocation& phi);

}  // namespace shapkit
