// Python surface. Structured results cross the boundary as JSON text and are
// decoded on the Python side (shapkit/__init__.py), so no json<->dict glue here.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "shapkit/coalition.hpp"
#include "shapkit/environment.hpp"
#include "shapkit/error.hpp"
#include "shapkit/negotiation.hpp"
#include "shapkit/policies.hpp"
#include "shapkit/runtime.hpp"
#include "shapkit/shapley_cot.hpp"
#include "shapkit/trajectory.hpp"
#include "shapkit/wev.hpp"

namespace py = pybind11;
using namespace shapkit;

namespace {

NegotiationMessage message_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type");
  if (type == "intent") return Intent{j.at("action")};
  if (type == "transfer") return TransferProposal{j.at("amount"), j.at("reasoning")};
  if (type == "response") {
    const std::string stance = j.at("stance");
    const std::string why = j.at("reasoning");
    if (stance == "agree") return agree(why);
    if (stance == "disagree") return disagree(why);
    if (stance == "counter-propose") return counter_propose(j.at("counter").at("amount"), why);
    throw InvalidArgument("unknown stance: " + stance);
  }
  throw InvalidArgument("unknown message type: " + type);
}

std::vector<double> exact(int n, std::vector<double> table) {
  return shapley_exact(CharacteristicGame::from_table(n, std::move(table))).payoffs;
}

std::vector<double> sampled(int n, std::vector<double> table, std::int64_t samples, std::uint64_t seed) {
  return shapley_sampled(CharacteristicGame::from_table(n, std::move(table)), samples, seed).payoffs;
}

std::string episode(const std::string& env_id, const std::vector<std::string>& policies, const std::string& pipeline,
                    std::uint64_t seed, const std::string& config) {
  auto env = make_environment(env_id, config.empty() ? nlohmann::json::object() : nlohmann::json::parse(config));
  std::vector<PolicyPtr> ps;
  for (const auto& p : policies) ps.push_back(make_policy(p));
  PipelineConfig cfg;
  cfg.variant = parse_pipeline(pipeline);
  EpisodeResult r;
  {
    py::gil_scoped_release nogil;
    r = run_episode(*env, ps, cfg, seed);
  }
  nlohmann::json out{{"trajectory", to_jsonl(r.trajectory)},
                     {"settlement", r.settlement.to_json()},
                     {"transcript", r.transcript},
                     {"aborted", r.aborted}};
  if (r.aborted) out["error"] = r.error;
  if (!r.trajectory.steps.empty() && r.trajectory.steps.back().terminal) out["outcome"] = r.trajectory.steps.back().info;
  return out.dump();
}

std::vector<double> traj_shapley(const std::string& jsonl, const std::string& mode, const std::string& counterfactual) {
  TrajectoryShapleyMode m;
  if (mode == "full")
    m = TrajectoryShapleyMode::kFullCoalition;
  else if (mode == "literal")
    m = TrajectoryShapleyMode::kLiteral;
  else
    throw InvalidArgument("mode must be full or literal");
  return shapley_from_trajectory(read_trajectory_jsonl(jsonl), m, parse_counterfactual_mode(counterfactual)).payoffs;
}

std::string wev_report_json(const std::string& path, const std::string& weights) {
  const auto in = wev::load_wev_file(path);
  const auto w = weights.empty() ? wev::WeightRanges{} : wev::load_weights_file(weights);
  const auto rep = wev::report(in.matrix, w, in.rewards);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : rep.rows) {
    rows.push_back({{"role", r.role},
                    {"counts", r.counts},
                    {"lo", r.range.lo},
                    {"hi", r.range.hi},
                    {"reward", r.reward},
                    {"adjustment", r.adjustment}});
  }
  return nlohmann::json{{"rows", rows}, {"text", rep.text()}, {"csv", rep.csv()}}.dump();
}

}  // namespace

PYBIND11_MODULE(_shapkit, m) {
  m.doc() = "coalition values, negotiation protocol and episode runtime";

  // released handles: the module keeps them alive, nothing to destroy at exit
  static const py::handle base = py::exception<Error>(m, "ShapkitError").release();
  static const py::handle usage = py::exception<Error>(m, "UsageError", base).release();
  static const py::handle data = py::exception<Error>(m, "DataError", base).release();
  static const py::handle backend = py::exception<Error>(m, "BackendError", base).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      switch (e.error_class()) {
        case ErrorClass::kUsage:
          py::set_error(usage, e.what());
          break;
        case ErrorClass::kData:
          py::set_error(data, e.what());
          break;
        case ErrorClass::kBackend:
          py::set_error(backend, e.what());
          break;
      }
    } catch (const nlohmann::json::exception& e) {
      py::set_error(data, e.what());
    }
  });

  m.def("shapley_exact", &exact, py::arg("n"), py::arg("table"));
  m.def("shapley_sampled", &sampled, py::arg("n"), py::arg("table"), py::arg("samples"), py::arg("seed"));
  m.def("shapley_two_agent", &shapley_two_agent, py::arg("v1"), py::arg("v2"), py::arg("v12"));
  m.def("shapley_game_file", [](const std::string& path) { return shapley_exact(load_game_file(path)).payoffs; });
  m.def(
      "side_payments",
      [](std::vector<double> realized, std::vector<double> target) {
        return side_payments(Allocation{std::move(realized)}, Allocation{std::move(target)}).transfers;
      },
      py::arg("realized"), py::arg("target"));
  m.def("parse_message", [](const std::string& text) { return message_to_json(parse_message(text)).dump(); });
  m.def("render_message", [](const std::string& j) { return render_message(message_from_json(nlohmann::json::parse(j))); });
  m.def("wev_report", &wev_report_json, py::arg("path"), py::arg("weights") = "");
  m.def("run_episode", &episode, py::arg("env"), py::arg("policies"), py::arg("pipeline"), py::arg("seed"),
        py::arg("config") = "");
  m.def("trajectory_shapley", &traj_shapley, py::arg("trajectory"), py::arg("mode") = "full",
        py::arg("counterfactual") = "ablate_log");
  m.def("coalition_weight_sum", &coalition_weight_sum);
}
