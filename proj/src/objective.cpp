#include "blast/objective.hpp"

#include <cmath>
#include <limits>

#include "blast/error.hpp"

namespace blast {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool usable(const Candidate& c) { return c.feasible && !std::isnan(c.objective); }

}  // namespace

double residual(double predicted, const TargetProperty& target) { return (predicted - target.target) / target.scale; }

double single_objective(const Predictions& predictions, std::span<const TargetProperty> targets) {
  double sum = 0.0;
  for (const auto& t : targets) {
    auto it = predictions.find(t.id);
    if (it == predictions.end() || !it->second.ok || !std::isfinite(it->second.value)) return kInf;
    const double r = residual(it->second.value, t);
    sum += t.weight * r * r;
  }
  return sum;
}

LevelObjectives level_objectives(const Predictions& predictions, std::span<const TargetProperty> targets) {
  LevelObjectives levels;
  for (const auto& t : targets) {
    double& level = levels[t.rank];
    auto it = predictions.find(t.id);
    if (it == predictions.end() || !it->second.ok || !std::isfinite(it->second.value)) {
      level = kInf;
      continue;
    }
    const double r = residual(it->second.value, t);
    level += t.weight * r * r;
  }
  return levels;
}

Candidate score(ParameterVector params, Predictions predictions, std::span<const TargetProperty> targets) {
  Candidate c;
  c.params = std::move(params);
  c.objective = single_objective(predictions, targets);
  c.level_objectives = level_objectives(predictions, targets);
  c.feasible = std::isfinite(c.objective);
  c.predictions = std::move(predictions);
  return c;
}

std::weak_ordering compare_hierarchical(const Candidate& a, const Candidate& b,
                                        const std::map<int, double>& level_tolerances) {
  const bool fa = usable(a);
  const bool fb = usable(b);
  if (fa != fb) return fa ? std::weak_ordering::less : std::weak_ordering::greater;
  if (!fa) return std::weak_ordering::equivalent;

  for (const auto& [rank, value_a] : a.level_objectives) {
    auto tol = level_tolerances.find(rank);
    if (tol == level_tolerances.end()) throw ValidationError("no tolerance for rank " + std::to_string(rank));
    if (!(tol->second > 0.0)) throw ValidationError("tolerance for rank " + std::to_string(rank) + " must be > 0");
    auto other = b.level_objectives.find(rank);
    if (other == b.level_objectives.end()) throw ValidationError("candidates have different rank sets");
    const double qa = std::floor(value_a / tol->second);
    const double qb = std::floor(other->second / tol->second);
    if (qa < qb) return std::weak_ordering::less;
    if (qa > qb) return std::weak_ordering::greater;
  }
  if (a.level_objectives.size() != b.level_objectives.size()) {
    throw ValidationError("candidates have different rank sets");
  }
  return std::weak_ordering::equivalent;
}

bool dominates(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("objective vectors differ in length");
  bool strict = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) return false;
    if (a[i] < b[i]) strict = true;
  }
  return strict;
}

bool dominates(const LevelObjectives& a, const LevelObjectives& b) {
  if (a.size() != b.size()) throw ValidationError("objective key sets differ");
  std::vector<double> va;
  std::vector<double> vb;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first) throw ValidationError("objective key sets differ");
    va.push_back(ia->second);
    vb.push_back(ib->second);
  }
  return dominates(std::span<const double>(va), std::span<const double>(vb));
}

CandidateComparator single_comparator() {
  return [](const Candidate& a, const Candidate& b) -> std::weak_ordering {
    const bool fa = usable(a);
    const bool fb = usable(b);
    if (fa != fb) return fa ? std::weak_ordering::less : std::weak_ordering::greater;
    if (!fa) return std::weak_ordering::equivalent;
    if (a.objective < b.objective) return std::weak_ordering::less;
    if (a.objective > b.objective) return std::weak_ordering::greater;
    return std::weak_ordering::equivalent;
  };
}

CandidateComparator hierarchical_comparator(std::map<int, double> level_tolerances) {
  for (const auto& [rank, tol] : level_tolerances) {
    if (!(tol > 0.0)) throw ValidationError("tolerance for rank " + std::to_string(rank) + " must be > 0");
  }
  return [tols = std::move(level_tolerances)](const Candidate& a, const Candidate& b) {
    return compare_hierarchical(a, b, tols);
  };
}

}  // namespace blast
