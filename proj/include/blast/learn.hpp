#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "blast/objective.hpp"
#include "blast/potentials.hpp"

namespace blast {

struct GaConfig {
  int population = 32;  // even, >= 4
  int generations = 50;
  int tournament_size = 3;
  double crossover_alpha = 0.5;
  double mutation_rate = -1.0;  // negative: 1 / (number of free parameters)
  double mutation_sigma_fraction = 0.1;
  int elitism = 2;
  std::uint64_t seed = 1;

  // Throws ValidationError naming the offending field.
  void validate() const;
};

struct NelderMeadConfig {
  int max_iter = 500;
  double f_tol = 1e-12;
  double x_tol = 1e-8;

  void validate() const;
};

struct HistoryEntry {
  int iteration = 0;
  double best_objective = 0.0;
  double mean_objective = 0.0;
  std::size_t evaluations = 0;  // cumulative
  LevelObjectives best_levels;
  std::string stage;  // strategy that produced the entry
};

struct LearnResult {
  Candidate best;
  std::vector<HistoryEntry> history;
  std::size_t total_evaluations = 0;
  std::vector<Candidate> front;  // nsga2 only: final non-dominated set
};

// Maps a batch of parameter vectors to scored candidates, same order.
using BatchEvaluator = std::function<std::vector<Candidate>(std::span<const ParameterVector>)>;

// A resumable optimizer. step() runs one generation (or simplex iteration)
// and appends one history entry; the complete state round-trips through
// save_state()/restore_state() on a learner built with the same arguments.
class Learner {
 public:
  virtual ~Learner() = default;

  virtual bool done() const = 0;
  virtual void step() = 0;
  virtual const LearnResult& result() const = 0;
  virtual nlohmann::json save_state() const = 0;
  virtual void restore_state(const nlohmann::json& state) = 0;
  virtual std::string_view strategy() const = 0;
};

std::unique_ptr<Learner> make_random_search(const ParameterSpace& space, BatchEvaluator evaluator, int samples,
                                            std::uint64_t seed, int batch_size = 64);
std::unique_ptr<Learner> make_ga(const ParameterSpace& space, BatchEvaluator evaluator, const GaConfig& config,
                                 CandidateComparator comparator);
std::unique_ptr<Learner> make_nsga2(const ParameterSpace& space, BatchEvaluator evaluator, const GaConfig& config);
std::unique_ptr<Learner> make_nelder_mead(const ParameterSpace& space, BatchEvaluator evaluator, ParameterVector x0,
                                          const NelderMeadConfig& config);
std::unique_ptr<Learner> make_two_stage(const ParameterSpace& space, BatchEvaluator evaluator,
                                        const GaConfig& global, CandidateComparator comparator,
                                        const NelderMeadConfig& local, int top_k);

LearnResult run_to_completion(Learner& learner);

LearnResult random_search(const ParameterSpace& space, BatchEvaluator evaluator, int samples, std::uint64_t seed);
LearnResult run_ga(const ParameterSpace& space, BatchEvaluator evaluator, const GaConfig& config,
                   CandidateComparator comparator);
std::vector<Candidate> nsga2(const ParameterSpace& space, BatchEvaluator evaluator, const GaConfig& config);
LearnResult nelder_mead(const ParameterSpace& space, BatchEvaluator evaluator, ParameterVector x0,
                        const NelderMeadConfig& config);
LearnResult two_stage(const ParameterSpace& space, BatchEvaluator evaluator, const GaConfig& global,
                      CandidateComparator comparator, const NelderMeadConfig& local, int top_k);

// --- building blocks, exposed for testing ----------------------------------

// Uniform samples inside each parameter's default range.
std::vector<ParameterVector> sample_default_range(const ParameterSpace& space, std::size_t n, std::mt19937_64& rng);

struct Offspring {
  std::vector<Candidate> elites;          // carried over unchanged
  std::vector<ParameterVector> children;  // still to be evaluated
};

// One GA generation: elitism, tournament selection under `comparator`, blend
// crossover, Gaussian mutation, clipping. elites + children = population size.
Offspring ga_step(const ParameterSpace& space, std::span<const Candidate> population,
                  const CandidateComparator& comparator, const GaConfig& config, std::mt19937_64& rng);

// Fronts of indices, best first (fast non-dominated sort).
std::vector<std::vector<std::size_t>> non_dominated_sort(const std::vector<std::vector<double>>& points);

// Crowding distance for the members of one front (boundary points: +inf).
std::vector<double> crowding_distance(const std::vector<std::vector<double>>& points,
                                      const std::vector<std::size_t>& front);

// Objective vector used for Pareto ranking (rank order; +inf when infeasible).
std::vector<double> objective_vector(const Candidate& c);

}  // namespace blast
