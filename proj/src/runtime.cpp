#include "shapkit/runtime.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include "shapkit/escape_room.hpp"
#include "shapkit/raid_battle.hpp"

namespace shapkit {

namespace {

nlohmann::json entry_json(std::string_view phase, int turn, const TranscriptEntry& e) {
  nlohmann::json j{{"phase", phase},
                   {"round", e.round},
                   {"sender", e.sender},
                   {"raw", render_message(e.message)},
                   {"parsed", message_to_json(e.message)}};
  if (turn >= 0) j["turn"] = turn;
  return j;
}

nlohmann::json skip_json(std::string_view phase, int turn, int round, int sender, const std::string& why) {
  nlohmann::json j{{"phase", phase}, {"round", round}, {"sender", sender}, {"skipped", true}, {"error", why}};
  if (turn >= 0) j["turn"] = turn;
  return j;
}

void check_legal(const Environment& env, int agent, const std::optional<std::string>& a) {
  if (!a) return;
  const auto acts = env.legal_actions(agent);
  if (std::find(acts.begin(), acts.end(), *a) == acts.end()) {
    throw IllegalActionError("policy for agent " + std::to_string(agent) + " chose illegal action '" + *a + "'");
  }
}

struct LoopOutput {
  TransferPlan pre_act;
  bool aborted = false;
  std::string error;
};

// `active` masks agents forced to idle (and silent) during resimulation.
LoopOutput play(Environment& env, const std::vector<PolicyPtr>& policies, const PipelineConfig& cfg,
                const std::vector<bool>& active, std::vector<nlohmann::json>* transcript) {
  const int n = env.num_agents();
  LoopOutput out;
  out.pre_act.transfers.assign(n, std::vector<double>(n, 0.0));
  const JointAction silent(n);
  try {
    while (!env.done()) {
      const int t = env.turn();
      JointAction joint(n);
      std::vector<int> live;
      for (int i = 0; i < n; ++i)
        if (active[i] && !env.legal_actions(i).empty()) live.push_back(i);

      if (cfg.negotiation() && live.size() >= 2) {
        Session s(live, cfg.max_negotiation_rounds);
        for (int i : live) {
          const auto a = policies[i]->act(ActContext{env, i, joint});
          check_legal(env, i, a);
          joint[i] = a;
          if (a) {
            s.advance(i, Intent{env.intent_phrase(*a)});
            if (transcript) transcript->push_back(entry_json("pre_act", t, s.transcript().back()));
          } else {
            s.pass(i);
          }
        }
        if (cfg.short_term()) {
          bool spoke = false;
          int round = s.round();
          while (s.open()) {
            const int speaker = s.next_speaker();
            std::optional<NegotiationMessage> msg;
            try {
              msg = policies[speaker]->negotiate(PricingContext{env, speaker, joint, s, s.round() - 1});
            } catch (const GrammarError& e) {
              if (transcript) transcript->push_back(skip_json("pre_act", t, s.round(), speaker, e.what()));
            } catch (const FrameError& e) {
              if (transcript) transcript->push_back(skip_json("pre_act", t, s.round(), speaker, e.what()));
            } catch (const NoCounterpartyError&) {
            }
            if (msg) {
              s.advance(speaker, *msg);
              spoke = true;
              if (transcript) transcript->push_back(entry_json("pre_act", t, s.transcript().back()));
            } else {
              s.pass(speaker);
            }
            if (s.open() && s.round() != round) {
              // a silent round with nothing on the table ends the bargaining
              if (!spoke && !s.standing()) break;
              spoke = false;
              round = s.round();
            }
          }
          if (const auto& ag = s.agreement()) {
            const double a = ag->proposal.amount;
            const int p = ag->proposer;
            const double share = std::abs(a) / static_cast<double>(live.size() - 1);
            for (int j : live) {
              if (j == p) continue;
              if (a > 0.0) out.pre_act.transfers[p][j] += share;
              if (a < 0.0) out.pre_act.transfers[j][p] += share;
            }
          }
        }
      } else {
        for (int i = 0; i < n; ++i) {
          if (!active[i]) continue;
          const auto a = policies[i]->act(ActContext{env, i, silent});
          check_legal(env, i, a);
          joint[i] = a;
        }
      }
      env.step(joint);
    }
  } catch (const BackendError& e) {
    out.aborted = true;
    out.error = e.what();
  }
  return out;
}

Allocation apply_plan(const Allocation& base, const TransferPlan& plan) {
  Allocation out = base;
  const auto net = plan.net();
  for (std::size_t i = 0; i < out.payoffs.size() && i < net.size(); ++i) out.payoffs[i] += net[i];
  return out;
}

nlohmann::json opt_vec(const std::vector<std::optional<double>>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& x : v) a.push_back(x ? nlohmann::json(*x) : nlohmann::json(nullptr));
  return a;
}

}  // namespace

std::string_view to_string(PipelineVariant v) {
  switch (v) {
    case PipelineVariant::kLlmOnly: return "LLM_ONLY";
    case PipelineVariant::kNeg: return "NEG";
    case PipelineVariant::kSts: return "STS";
    case PipelineVariant::kSc: return "SC";
  }
  return "?";
}

PipelineVariant parse_pipeline(std::string_view s) {
  if (s == "LLM_ONLY") return PipelineVariant::kLlmOnly;
  if (s == "NEG") return PipelineVariant::kNeg;
  if (s == "STS") return PipelineVariant::kSts;
  if (s == "SC") return PipelineVariant::kSc;
  throw InvalidArgument("unknown pipeline variant '" + std::string(s) + "'");
}

void PipelineConfig::validate() const {
  if (max_negotiation_rounds < 1) throw InvalidArgument("max_negotiation_rounds must be >= 1");
  if (reasoner != "rule_based" && reasoner != "llm") throw InvalidArgument("unknown reasoner '" + reasoner + "'");
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"variant", to_string(variant)},
          {"max_negotiation_rounds", max_negotiation_rounds},
          {"reasoner", reasoner},
          {"counterfactual", to_string(counterfactual)}};
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  PipelineConfig c;
  if (j.is_string()) {
    c.variant = parse_pipeline(j.get<std::string>());
    return c;
  }
  if (!j.is_object()) throw ParseError("pipeline must be a name or an object");
  try {
    if (j.contains("variant")) c.variant = parse_pipeline(j.at("variant").get<std::string>());
    c.max_negotiation_rounds = j.value("max_negotiation_rounds", c.max_negotiation_rounds);
    c.reasoner = j.value("reasoner", c.reasoner);
    if (j.contains("counterfactual")) c.counterfactual = parse_counterfactual_mode(j.at("counterfactual").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("pipeline: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json Settlement::to_json() const {
  nlohmann::json j{{"realized", realized.payoffs},
                   {"allocation", allocation.payoffs},
                   {"transfers", transfers.transfers},
                   {"fallback", fallback},
                   {"note", note}};
  if (marginal) j["marginal"] = marginal->payoffs;
  if (shapley) j["shapley"] = shapley->payoffs;
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : claim_rounds) rounds.push_back(opt_vec(r));
  j["claim_rounds"] = rounds;
  return j;
}

Settlement settle_episode(const TrajectoryRecord& traj, const std::vector<PolicyPtr>& policies,
                          const PipelineConfig& cfg, std::vector<nlohmann::json>* transcript) {
  const int n = traj.agents;
  if (static_cast<int>(policies.size()) != n) throw InvalidArgument("one policy per agent is required");
  Settlement out;
  out.realized = Allocation{traj.realized_payoffs()};
  out.realized.payoffs.resize(n, 0.0);
  out.allocation = out.realized;
  out.transfers.transfers.assign(n, std::vector<double>(n, 0.0));
  if (!cfg.long_term()) return out;

  const double pool = out.realized.total();
  Allocation marginal{std::vector<double>(n)};
  for (int i = 0; i < n; ++i) marginal.payoffs[i] = marginal_contribution_traj(traj, i, cfg.counterfactual);
  const Allocation phi = shapley_from_trajectory(traj, TrajectoryShapleyMode::kFullCoalition, cfg.counterfactual);
  out.marginal = marginal;
  out.shapley = phi;

  std::vector<int> everyone(n);
  std::iota(everyone.begin(), everyone.end(), 0);
  Session s(everyone, cfg.max_negotiation_rounds);
  int round = s.round();
  while (s.open()) {
    const int speaker = s.next_speaker();
    std::optional<NegotiationMessage> msg;
    try {
      msg = policies[speaker]->settle(
          SettlementContext{speaker, s, s.round(), pool, out.realized.payoffs, marginal.payoffs, phi});
    } catch (const GrammarError& e) {
      if (transcript) transcript->push_back(skip_json("settlement", -1, s.round(), speaker, e.what()));
    } catch (const FrameError& e) {
      if (transcript) transcript->push_back(skip_json("settlement", -1, s.round(), speaker, e.what()));
    }
    if (msg) {
      s.advance(speaker, *msg);
      if (transcript) transcript->push_back(entry_json("settlement", -1, s.transcript().back()));
    } else {
      s.pass(speaker);
    }
    if (!s.open() || s.round() != round) {
      out.claim_rounds.push_back(s.claims());
      round = s.round();
    }
  }

  if (s.status() == SessionStatus::kAgreed) {
    const auto& claims = s.agreement()->claims;
    Allocation agreed{std::vector<double>(n)};
    bool complete = true;
    for (int i = 0; i < n; ++i) {
      if (!claims[i]) {
        complete = false;
        break;
      }
      agreed.payoffs[i] = *claims[i];
    }
    if (complete && std::abs(agreed.total() - pool) <= 1e-9 * std::max(1.0, std::abs(pool))) {
      // absorb rounding so the plan balances exactly against the realized total
      agreed.payoffs[n - 1] += pool - agreed.total();
      out.allocation = agreed;
      out.transfers = side_payments(out.realized, agreed);
      out.note = "agreed";
      return out;
    }
    out.note = "agreed claims do not split the realized total; keeping realized payoffs";
  } else {
    out.note = "settlement timed out; keeping realized payoffs";
  }
  out.fallback = true;
  return out;
}

EpisodeResult run_episode(Environment& env, const std::vector<PolicyPtr>& policies, const PipelineConfig& cfg,
                          std::uint64_t seed) {
  cfg.validate();
  const int n = env.num_agents();
  if (static_cast<int>(policies.size()) != n) {
    throw InvalidArgument("environment has " + std::to_string(n) + " agents but " + std::to_string(policies.size()) +
                          " policies were given");
  }
  EpisodeResult res;
  env.reset(seed);
  const LoopOutput loop = play(env, policies, cfg, std::vector<bool>(n, true), &res.transcript);
  res.trajectory = env.trajectory();
  res.trajectory.seed = seed;
  res.trajectory.config = env.config_json();
  res.trajectory.pipeline = std::string(to_string(cfg.variant));
  for (const auto& p : policies) res.trajectory.policies.push_back(p->name());
  res.aborted = loop.aborted;
  res.error = loop.error;

  Settlement st;
  st.realized = Allocation{res.trajectory.realized_payoffs()};
  st.realized.payoffs.resize(n, 0.0);
  st.allocation = st.realized;
  st.transfers.transfers.assign(n, std::vector<double>(n, 0.0));
  if (res.aborted) {
    st.fallback = true;
    st.note = "episode aborted: " + res.error;
  } else if (cfg.long_term()) {
    try {
      st = settle_episode(res.trajectory, policies, cfg, &res.transcript);
    } catch (const BackendError& e) {
      st.fallback = true;
      st.note = std::string("settlement aborted: ") + e.what();
    }
  } else if (cfg.short_term()) {
    st.transfers = loop.pre_act;
    st.allocation = apply_plan(st.realized, loop.pre_act);
    st.note = st.transfers.empty() ? "no priced adjustments" : "task-time transfers applied";
  }
  res.settlement = std::move(st);
  return res;
}

double resimulate_outcome(const TrajectoryRecord& traj, Coalition members) {
  if (!traj.seed) throw ProvenanceError("trajectory has no seed and cannot be re-simulated");
  if (static_cast<int>(traj.policies.size()) != traj.agents) {
    throw ProvenanceError("trajectory does not record the policies needed to re-simulate");
  }
  std::vector<PolicyPtr> policies;
  for (const auto& name : traj.policies) {
    try {
      policies.push_back(make_policy(name));
    } catch (const InvalidArgument&) {
      throw ProvenanceError("policy '" + name + "' cannot be rebuilt offline");
    }
  }
  std::unique_ptr<Environment> env;
  if (traj.env_id == raid::kEnvId) {
    std::optional<raid::RaidState> start;
    if (!traj.steps.empty()) start = raid::RaidState::from_json(traj.steps.front().state);
    env = std::make_unique<raid::RaidBattleEnv>(raid::RaidConfig::from_json(traj.config), start);
  } else if (traj.env_id == escape::kEnvId) {
    env = make_environment(traj.env_id, traj.config);
  } else {
    throw ReplayError("no re-simulation available for environment '" + traj.env_id + "'");
  }
  if (env->num_agents() != traj.agents) throw EnvMismatchError("agent count differs from the trajectory");

  PipelineConfig cfg;
  cfg.variant = traj.pipeline.empty() ? PipelineVariant::kLlmOnly : parse_pipeline(traj.pipeline);
  std::vector<bool> active(traj.agents);
  for (int i = 0; i < traj.agents; ++i) active[i] = members.contains(i);
  env->reset(*traj.seed);
  play(*env, policies, cfg, active, nullptr);

  const TrajectoryRecord re = env->trajectory();
  double total = 0.0;
  for (const auto& s : re.steps) {
    for (int i = 0; i < traj.agents && i < static_cast<int>(s.rewards.size()); ++i) {
      if (s.terminal ? members.mask() != 0 : members.contains(i)) total += s.rewards[i];
    }
  }
  return total;
}

std::vector<EpisodeResult> run_batch(const std::vector<BatchJob>& jobs, int parallelism,
                                     const std::optional<LlmBackendConfig>& backend) {
  std::vector<EpisodeResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      const BatchJob& job = jobs[k];
      EpisodeResult& res = results[k];
      try {
        auto env = make_environment(job.env_id, job.env_config);
        std::vector<PolicyPtr> policies;
        std::shared_ptr<Reasoner> reasoner;
        if (job.pipeline.reasoner == "llm") {
          if (!backend) throw BackendError("the llm reasoner needs a backend config", 0);
          reasoner = std::make_shared<LlmReasoner>(*backend);
        }
        for (const auto& name : job.policies) {
          if (name == "llm") {
            if (!backend) throw BackendError("llm policy requested without a backend config", 0);
            policies.push_back(llm_policy(*backend));
          } else if (name == "shapley_negotiator") {
            policies.push_back(shapley_negotiator(reasoner));
          } else {
            policies.push_back(make_policy(name));
          }
        }
        res = run_episode(*env, policies, job.pipeline, job.seed);
      } catch (const Error& e) {
        res.aborted = true;
        res.error = e.what();
        res.error_class = e.error_class();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(parallelism, static_cast<int>(jobs.size())));
  {
    std::vector<std::jthread> pool;
    for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
  }
  return results;
}

}  // namespace shapkit
