#include "blast/evaluation.hpp"

#include <cstdio>
#include <functional>
#include <mutex>

#include "blast/error.hpp"
#include "blast/serialize.hpp"

namespace blast {

using nlohmann::json;
namespace fs = std::filesystem;

Predictions FitProblem::predict(const ParameterVector& params) const {
  Predictions out;
  std::map<std::string, RelaxResult> relax_cache;
  std::map<std::string, Prediction> external_cache;
  PropertyContext ctx;
  ctx.structures = &data.structures;
  ctx.relax_cache = &relax_cache;
  ctx.external = [&](const std::string& id) {
    auto it = external_cache.find(id);
    if (it == external_cache.end()) {
      Prediction p;
      try {
        p = Prediction::success(run_evaluator(id, params));
      } catch (const std::exception& e) {
        p = Prediction::failure(e.what());
      }
      it = external_cache.emplace(id, p).first;
    }
    if (!it->second.ok) throw ComputeError(it->second.error);
    return it->second.value;
  };
  for (const auto& t : data.targets) {
    try {
      const double v = compute_property(t.kind, space, params, ctx);
      out[t.id] = std::isfinite(v) ? Prediction::success(v) : Prediction::failure("non-finite value");
    } catch (const std::exception& e) {
      out[t.id] = Prediction::failure(e.what());
    }
  }
  return out;
}

Candidate FitProblem::evaluate(const ParameterVector& params) const {
  if (!validate_params(space, params).empty()) {
    Predictions failed;
    for (const auto& t : data.targets) failed[t.id] = Prediction::failure("parameters outside bounds");
    return score(params, std::move(failed), data.targets);
  }
  return score(params, predict(params), data.targets);
}

double FitProblem::run_evaluator(const std::string& evaluator_id, const ParameterVector& params) const {
  const auto it = evaluators.find(evaluator_id);
  if (it == evaluators.end()) throw ComputeError("no external evaluator '" + evaluator_id + "'");
  std::map<std::string, double> named;
  for (std::size_t i = 0; i < space.size(); ++i) named[space.specs[i].name] = params[i];
  const fs::path scratch_dir = scratch.empty() ? fs::temp_directory_path() / "blast_scratch" : scratch;
  const auto run = run_external(it->second, named, scratch_dir, template_dir_for(home, evaluator_id));
  if (!run.prediction.ok) throw ComputeError(run.prediction.error);
  return run.prediction.value;
}

json FitProblem::to_json() const {
  json structures = json::array();
  for (const auto& [label, s] : data.structures) structures.push_back(s);
  json targets = json::array();
  for (const auto& t : data.targets) targets.push_back(blast::to_json(t));
  json evs = json::array();
  for (const auto& [id, e] : evaluators) evs.push_back(blast::to_json(e));
  return json{{"space", space},          {"structures", structures},
              {"targets", targets},      {"provenance", data.provenance},
              {"evaluators", evs},       {"home", home.string()},
              {"scratch", scratch.string()}};
}

FitProblem FitProblem::from_json(const json& j) {
  FitProblem p;
  p.space = j.at("space").get<ParameterSpace>();
  for (const auto& s : j.at("structures")) {
    Structure st = s.get<Structure>();
    p.data.structures[st.label] = std::move(st);
  }
  p.data.targets = parse_targets(j.at("targets"));
  p.data.provenance = j.value("provenance", "");
  for (const auto& e : j.value("evaluators", json::array())) {
    auto spec = evaluator_from_json(e);
    p.evaluators[spec.id] = std::move(spec);
  }
  p.home = j.value("home", "");
  p.scratch = j.value("scratch", "");
  return p;
}

std::string FitProblem::context_id() const {
  const std::string text = to_json().dump();
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

TaskFn make_candidate_task_fn() {
  struct Cache {
    std::mutex mutex;
    std::map<std::string, std::shared_ptr<const FitProblem>> problems;
  };
  auto cache = std::make_shared<Cache>();
  return [cache](const json& payload) -> json {
    const auto id = payload.at("context_id").get<std::string>();
    std::shared_ptr<const FitProblem> problem;
    {
      std::lock_guard lock(cache->mutex);
      auto it = cache->problems.find(id);
      if (it != cache->problems.end()) problem = it->second;
    }
    if (!problem) {
      if (!payload.contains("context")) throw Error("unknown evaluation context " + id);
      problem = std::make_shared<const FitProblem>(FitProblem::from_json(payload["context"]));
      std::lock_guard lock(cache->mutex);
      cache->problems.emplace(id, problem);
    }
    return problem->evaluate(payload.at("params").get<ParameterVector>());
  };
}

BatchEvaluator make_batch_evaluator(std::shared_ptr<const FitProblem> problem, Executor& executor,
                                    std::stop_token stop) {
  const bool remote = executor.remote();
  const std::string context_id = problem->context_id();
  const json context = remote ? problem->to_json() : json();
  TaskFn local = [problem](const json& payload) -> json {
    return problem->evaluate(payload.at("params").get<ParameterVector>());
  };
  return [problem, &executor, stop, remote, context_id, context, local](std::span<const ParameterVector> batch) {
    std::vector<json> payloads;
    payloads.reserve(batch.size());
    for (const auto& v : batch) {
      json p{{"context_id", context_id}, {"params", v}};
      if (remote) p["context"] = context;
      payloads.push_back(std::move(p));
    }
    const auto results = executor.run(payloads, local, stop);
    std::vector<Candidate> out;
    out.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (results[i].ok) {
        out.push_back(results[i].value.get<Candidate>());
      } else {
        Predictions failed;
        for (const auto& t : problem->data.targets) failed[t.id] = Prediction::failure(results[i].error);
        out.push_back(score(batch[i], std::move(failed), problem->data.targets));
      }
    }
    return out;
  };
}

}  // namespace blast
