#pragma once

#include <compare>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "blast/potentials.hpp"
#include "blast/trainset.hpp"

namespace blast {

// A predicted property value, or the reason it could not be computed.
struct Prediction {
  double value = 0.0;
  bool ok = true;
  std::string error;

  static Prediction success(double v) { return {v, true, {}}; }
  static Prediction failure(std::string why) { return {0.0, false, std::move(why)}; }
};

using Predictions = std::map<std::string, Prediction>;  // keyed by target id
using LevelObjectives = std::map<int, double>;          // keyed by rank

struct Candidate {
  ParameterVector params;
  Predictions predictions;
  double objective = 0.0;  // +inf when infeasible
  LevelObjectives level_objectives;
  bool feasible = true;
};

// (predicted - target) / scale
double residual(double predicted, const TargetProperty& target);

// Σ weight·residual². +inf if any prediction failed or is missing.
double single_objective(const Predictions& predictions, std::span<const TargetProperty> targets);

// Per-rank Σ weight·residual²; a rank with a failed prediction maps to +inf.
LevelObjectives level_objectives(const Predictions& predictions, std::span<const TargetProperty> targets);

// Fills objective, level_objectives and feasible from the predictions.
Candidate score(ParameterVector params, Predictions predictions, std::span<const TargetProperty> targets);

// Lexicographic comparison over ascending ranks of floor(level / tolerance).
// Infeasible candidates order after every feasible one. Throws
// ValidationError for a non-positive tolerance or a rank without tolerance.
std::weak_ordering compare_hierarchical(const Candidate& a, const Candidate& b,
                                        const std::map<int, double>& level_tolerances);

// a ≤ b component-wise with at least one strict <. Throws on key mismatch.
bool dominates(const LevelObjectives& a, const LevelObjectives& b);
bool dominates(std::span<const double> a, std::span<const double> b);

using CandidateComparator = std::function<std::weak_ordering(const Candidate&, const Candidate&)>;

// Plain single-objective ordering (infeasible last).
CandidateComparator single_comparator();
CandidateComparator hierarchical_comparator(std::map<int, double> level_tolerances);

}  // namespace blast
