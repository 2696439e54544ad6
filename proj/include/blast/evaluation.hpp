#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "blast/learn.hpp"
#include "blast/objective.hpp"
#include "blast/parallel.hpp"
#include "blast/trainset.hpp"
#include "blast/wrapper.hpp"

namespace blast {

// Everything needed to score a parameter vector: model, training data and
// the external evaluators that serve external(...) targets.
struct FitProblem {
  ParameterSpace space;
  Dataset data;
  std::map<std::string, ExternalEvaluatorSpec> evaluators;
  std::filesystem::path home;     // templates live under home/templates/<id>
  std::filesystem::path scratch;  // run directories for external programs

  // One prediction per target; calculation errors become failed predictions.
  Predictions predict(const ParameterVector& params) const;
  Candidate evaluate(const ParameterVector& params) const;

  // Value of external(evaluator_id) for these parameters. Throws on failure.
  double run_evaluator(const std::string& evaluator_id, const ParameterVector& params) const;

  // Self-contained document, shipped to remote workers.
  nlohmann::json to_json() const;
  static FitProblem from_json(const nlohmann::json& j);
  // Stable digest of to_json(), used as the worker cache key.
  std::string context_id() const;
};

// Worker-side task function: payload {"context_id", "context"?, "params"} →
// candidate document. Contexts are cached by id.
TaskFn make_candidate_task_fn();

// Learner-side evaluator over an executor. In-process executors evaluate the
// problem directly; remote ones ship the problem with every task.
BatchEvaluator make_batch_evaluator(std::shared_ptr<const FitProblem> problem, Executor& executor,
                                    std::stop_token stop = {});

}  // namespace blast
