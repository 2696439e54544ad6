#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "blast/error.hpp"
#include "blast/evaluation.hpp"
#include "blast/learn.hpp"
#include "blast/parallel.hpp"
#include "blast/wrapper.hpp"

namespace blast {

// --- configuration ---------------------------------------------------------

struct ModelSection {
  std::string id;
  std::vector<std::string> species;
  // name → {lower, upper, default_low, default_high} or {"fixed": v}
  nlohmann::json parameters = nlohmann::json::object();
};

struct DataSection {
  std::string dataset;                  // dataset document (alternative to the two below)
  std::vector<std::string> structures;  // extended XYZ files
  nlohmann::json targets;               // file path or inline array
  double holdout_fraction = 0.0;        // 0: no cross-validation split
  std::uint64_t split_seed = 0;
};

enum class ObjectiveMode { single, hierarchical, pareto };

struct ObjectiveSection {
  ObjectiveMode mode = ObjectiveMode::single;
  std::map<int, double> tolerances;  // per rank; missing ranks get a default
};

enum class Strategy { random, ga, hoga, nsga2, nelder_mead, two_stage };

struct LearnerSection {
  Strategy strategy = Strategy::ga;
  GaConfig ga;
  NelderMeadConfig nelder_mead;
  int top_k = 3;
  int samples = 256;
  std::optional<nlohmann::json> x0;  // nelder_mead start: {name: value}
};

struct JobConfig {
  std::string name;
  ModelSection model;
  DataSection data;
  ObjectiveSection objective;
  LearnerSection learner;
  std::string executor = "serial";
  std::vector<ExternalEvaluatorSpec> evaluators;
  std::uint64_t seed = 1;
  std::string output_dir;  // empty: the service home
};

std::string_view to_string(ObjectiveMode m);
std::string_view to_string(Strategy s);

// Validates the document; errors carry the field path ("learner.population").
// Relative file paths are resolved against base_dir and must exist.
JobConfig parse_job_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
// Normalized document; parse_job_config(to_json(c), any) == c.
nlohmann::json to_json(const JobConfig& c);

ParameterSpace build_parameter_space(const JobConfig& c);

struct PreparedJob {
  std::shared_ptr<FitProblem> problem;  // training targets only
  Dataset holdout;                      // empty when holdout_fraction is 0
  CandidateComparator comparator;
};

PreparedJob prepare_job(const JobConfig& c, const std::filesystem::path& home);

// Per-rank default tolerance: Σ weight·(tolerance/scale)² over the rank's
// targets, the level objective with every residual at its tolerance.
std::map<int, double> default_level_tolerances(std::span<const TargetProperty> targets);

std::unique_ptr<Learner> make_learner(const JobConfig& c, const ParameterSpace& space, BatchEvaluator evaluator,
                                      CandidateComparator comparator);

// --- records ---------------------------------------------------------------

enum class JobStatus { created, running, completed, cancelled, failed };

std::string_view to_string(JobStatus s);
JobStatus parse_job_status(std::string_view s);
bool is_terminal(JobStatus s);
// created→running; running→{completed, cancelled, failed}; cancelled/failed→running.
bool legal_transition(JobStatus from, JobStatus to);

struct StatusChange {
  JobStatus status = JobStatus::created;
  std::string at;
  std::string note;
};

struct JobRecord {
  std::string job_id;
  std::string name;
  JobStatus status = JobStatus::created;
  std::string created_at;
  std::string started_at;
  std::string ended_at;
  std::optional<nlohmann::json> progress;  // latest progress event
  std::string checkpoint_path;
  std::string error;
  std::string executor;  // the requested resources
  std::vector<StatusChange> transitions;
  std::filesystem::path dir;
};

nlohmann::json to_json(const JobRecord& r);
JobRecord job_record_from_json(const nlohmann::json& j);

class NotFound : public Error {
 public:
  using Error::Error;
};

class IllegalTransition : public Error {
 public:
  using Error::Error;
};

// Writes via a temporary file and rename, so readers see the old or the new
// content and never a torn file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// --- service ---------------------------------------------------------------

struct JobServiceOptions {
  BrokerOptions broker;
  // Called after each generation's checkpoint; returning true stops the run
  // there as if cancelled.
  std::function<bool(const std::string& job_id, int iteration)> generation_hook;
};

// Ordered feed of one job's events: replay, then live, closed once the job
// is in a terminal status and everything has been delivered.
class Subscription {
 public:
  virtual ~Subscription() = default;
  // Next event, or nullopt on timeout or when closed.
  virtual std::optional<nlohmann::json> next(std::chrono::milliseconds timeout) = 0;
  virtual bool closed() const = 0;
};

class JobService {
 public:
  explicit JobService(std::filesystem::path home, JobServiceOptions options = {});
  ~JobService();
  JobService(const JobService&) = delete;
  JobService& operator=(const JobService&) = delete;

  const std::filesystem::path& home() const noexcept { return home_; }

  // Relative paths in the document resolve against base_dir (default: home).
  std::string submit(const nlohmann::json& config_document, const std::filesystem::path& base_dir = {});
  JobRecord get(const std::string& job_id) const;
  std::vector<JobRecord> list() const;
  JobConfig config(const std::string& job_id) const;

  JobRecord start(const std::string& job_id);
  // Requests a stop at the next generation boundary and waits for it.
  JobRecord cancel(const std::string& job_id);
  // Resumes from the latest checkpoint, or from scratch (with a warning
  // event) when there is none or it cannot be read.
  JobRecord restart(const std::string& job_id);
  // Blocks until the job is not running.
  JobRecord wait(const std::string& job_id) const;

  // Final result document; NotFound until the job has completed.
  nlohmann::json result(const std::string& job_id) const;
  std::unique_ptr<Subscription> subscribe(const std::string& job_id) const;

  struct State;

 private:
  std::shared_ptr<State> find(const std::string& job_id) const;
  JobRecord launch(const std::shared_ptr<State>& job, JobStatus expected_from, bool resume);

  std::filesystem::path home_;
  JobServiceOptions options_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<State>> jobs_;
};

}  // namespace blast
