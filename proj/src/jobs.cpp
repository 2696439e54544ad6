#include "blast/jobs.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <condition_variable>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "blast/serialize.hpp"

namespace blast {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string now_iso() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  ::gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

std::string new_job_id() {
  static std::atomic<unsigned> counter{0};
  thread_local std::mt19937_64 rng{std::random_device{}()};
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  ::gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d%02d%02d-%02d%02d%02d-%04x%06llx", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, counter++ & 0xffffu,
                static_cast<unsigned long long>(rng() & 0xffffffu));
  return buf;
}

json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot open " + p.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error("malformed JSON in " + p.string());
  return j;
}

}  // namespace

void write_file_atomic(const fs::path& path, std::string_view content) {
  static std::atomic<unsigned> counter{0};
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw Error("cannot write " + tmp.string());
  std::size_t done = 0;
  while (done < content.size()) {
    const ssize_t n = ::write(fd, content.data() + done, content.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      fs::remove(tmp);
      throw Error("cannot write " + tmp.string());
    }
    done += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
  fs::rename(tmp, path);
}

// --- records -----------------------------------------------------------------

std::string_view to_string(JobStatus s) {
  switch (s) {
    case JobStatus::created: return "created";
    case JobStatus::running: return "running";
    case JobStatus::completed: return "completed";
    case JobStatus::cancelled: return "cancelled";
    case JobStatus::failed: return "failed";
  }
  return "?";
}

JobStatus parse_job_status(std::string_view s) {
  if (s == "created") return JobStatus::created;
  if (s == "running") return JobStatus::running;
  if (s == "completed") return JobStatus::completed;
  if (s == "cancelled") return JobStatus::cancelled;
  if (s == "failed") return JobStatus::failed;
  throw ValidationError("unknown job status '" + std::string(s) + "'");
}

bool is_terminal(JobStatus s) {
  return s == JobStatus::completed || s == JobStatus::cancelled || s == JobStatus::failed;
}

bool legal_transition(JobStatus from, JobStatus to) {
  switch (from) {
    case JobStatus::created: return to == JobStatus::running;
    case JobStatus::running:
      return to == JobStatus::completed || to == JobStatus::cancelled || to == JobStatus::failed;
    case JobStatus::cancelled:
    case JobStatus::failed: return to == JobStatus::running;
    case JobStatus::completed: return false;
  }
  return false;
}

json to_json(const JobRecord& r) {
  json transitions = json::array();
  for (const auto& t : r.transitions) {
    json e{{"status", to_string(t.status)}, {"at", t.at}};
    if (!t.note.empty()) e["note"] = t.note;
    transitions.push_back(e);
  }
  return json{{"job_id", r.job_id},
              {"name", r.name},
              {"status", to_string(r.status)},
              {"created_at", r.created_at},
              {"started_at", r.started_at},
              {"ended_at", r.ended_at},
              {"progress", r.progress ? *r.progress : json(nullptr)},
              {"checkpoint_path", r.checkpoint_path},
              {"error", r.error},
              {"executor", r.executor},
              {"transitions", transitions},
              {"dir", r.dir.string()}};
}

JobRecord job_record_from_json(const json& j) {
  JobRecord r;
  r.job_id = j.at("job_id").get<std::string>();
  r.name = j.value("name", "");
  r.status = parse_job_status(j.at("status").get<std::string>());
  r.created_at = j.value("created_at", "");
  r.started_at = j.value("started_at", "");
  r.ended_at = j.value("ended_at", "");
  if (j.contains("progress") && !j["progress"].is_null()) r.progress = j["progress"];
  r.checkpoint_path = j.value("checkpoint_path", "");
  r.error = j.value("error", "");
  r.executor = j.value("executor", "");
  for (const auto& t : j.value("transitions", json::array())) {
    r.transitions.push_back({parse_job_status(t.at("status").get<std::string>()), t.value("at", ""), t.value("note", "")});
  }
  r.dir = j.value("dir", "");
  return r;
}

// --- service -----------------------------------------------------------------

struct JobService::State {
  mutable std::mutex mutex;
  mutable std::condition_variable cv;
  std::mutex control;  // serializes start/cancel/restart
  JobRecord record;
  JobConfig config;
  std::vector<json> events;
  std::jthread runner;

  fs::path file(const char* name) const { return record.dir / name; }

  // Callers hold `mutex`.
  void persist() const { write_file_atomic(file("record.json"), to_json(record).dump(2)); }

  void transition(JobStatus to, const std::string& note = {}) {
    if (!legal_transition(record.status, to)) {
      throw IllegalTransition("cannot move job " + record.job_id + " from " + std::string(to_string(record.status)) +
                              " to " + std::string(to_string(to)));
    }
    const std::string at = now_iso();
    record.status = to;
    record.transitions.push_back({to, at, note});
    if (to == JobStatus::running) {
      record.started_at = at;
      record.ended_at.clear();
      record.error.clear();
    } else if (is_terminal(to)) {
      record.ended_at = at;
    }
    persist();
    cv.notify_all();
  }

  void append_event(json ev) {
    {
      std::ofstream out(file("events.jsonl"), std::ios::app);
      out << ev.dump() << '\n';
    }
    if (ev.value("type", "") == "progress") {
      record.progress = ev;
      persist();
    }
    events.push_back(std::move(ev));
    cv.notify_all();
  }

  void reset_events() {
    events.clear();
    record.progress.reset();
    write_file_atomic(file("events.jsonl"), "");
  }
};

namespace {

class JobSubscription final : public Subscription {
 public:
  explicit JobSubscription(std::shared_ptr<JobService::State> job) : job_(std::move(job)) {}

  std::optional<json> next(std::chrono::milliseconds timeout) override {
    std::unique_lock lock(job_->mutex);
    job_->cv.wait_for(lock, timeout, [&] { return index_ < job_->events.size() || is_terminal(job_->record.status); });
    if (index_ < job_->events.size()) return job_->events[index_++];
    if (is_terminal(job_->record.status)) closed_ = true;
    return std::nullopt;
  }

  bool closed() const override { return closed_; }

 private:
  std::shared_ptr<JobService::State> job_;
  std::size_t index_ = 0;
  bool closed_ = false;
};

json progress_event(const std::string& job_id, const HistoryEntry& h) {
  json levels = json::object();
  for (const auto& [rank, v] : h.best_levels) levels[std::to_string(rank)] = real_to_json(v);
  return json{{"type", "progress"},
              {"job_id", job_id},
              {"iteration", h.iteration},
              {"best_objective", real_to_json(h.best_objective)},
              {"best_levels", levels},
              {"mean_objective", real_to_json(h.mean_objective)},
              {"evaluations", h.evaluations},
              {"stage", h.stage},
              {"timestamp", now_iso()}};
}

json warning_event(const std::string& job_id, const std::string& message) {
  return json{{"type", "warning"}, {"job_id", job_id}, {"message", message}, {"timestamp", now_iso()}};
}

json candidate_summary(const ParameterSpace& space, const Candidate& c) {
  json j = c;
  j["parameters"] = named_params(space, c.params);
  return j;
}

json build_result(const JobService::State& job, const PreparedJob& prepared, const LearnResult& result) {
  const auto& problem = *prepared.problem;
  json train_ids = json::array();
  for (const auto& t : problem.data.targets) train_ids.push_back(t.id);
  json holdout_ids = json::array();
  for (const auto& t : prepared.holdout.targets) holdout_ids.push_back(t.id);
  json cv = nullptr;
  if (!prepared.holdout.targets.empty() && result.best.params.size() == problem.space.size()) {
    const auto params = result.best.params;
    auto external = [&problem, params](const std::string& id) { return problem.run_evaluator(id, params); };
    cv = to_json(cross_validate(problem.space, params, prepared.holdout, external));
  }
  json front = json::array();
  for (const auto& c : result.front) front.push_back(candidate_summary(problem.space, c));
  return json{{"job_id", job.record.job_id},
              {"name", job.config.name},
              {"model", job.config.model.id},
              {"species", job.config.model.species},
              {"space", problem.space},
              {"best", candidate_summary(problem.space, result.best)},
              {"front", front},
              {"history", result.history},
              {"total_evaluations", result.total_evaluations},
              {"train_targets", train_ids},
              {"holdout_targets", holdout_ids},
              {"cross_validation", cv}};
}

void run_job(std::shared_ptr<JobService::State> job, fs::path home, JobServiceOptions options, bool resume,
             std::stop_token stop) {
  std::string job_id;
  JobConfig config;
  {
    std::lock_guard lock(job->mutex);
    job_id = job->record.job_id;
    config = job->config;
  }
  auto finish = [&](JobStatus status, const std::string& note) {
    std::lock_guard lock(job->mutex);
    if (status == JobStatus::failed) job->record.error = note;
    job->transition(status, note);
  };
  try {
    const PreparedJob prepared = prepare_job(config, home);
    auto executor = make_executor(config.executor, options.broker);
    auto evaluator = make_batch_evaluator(prepared.problem, *executor, stop);
    auto learner = make_learner(config, prepared.problem->space, evaluator, prepared.comparator);

    const fs::path checkpoint = job->file("checkpoint.json");
    if (resume) {
      std::string problem;
      if (!fs::exists(checkpoint)) {
        problem = "no checkpoint found; restarting from scratch";
      } else {
        try {
          const json state = read_json_file(checkpoint);
          if (state.at("job_id").get<std::string>() != job_id) throw Error("checkpoint belongs to another job");
          learner->restore_state(state.at("learner"));
        } catch (const std::exception& e) {
          problem = std::string("checkpoint unreadable (") + e.what() + "); restarting from scratch";
          learner = make_learner(config, prepared.problem->space, evaluator, prepared.comparator);
        }
      }
      if (!problem.empty()) {
        std::lock_guard lock(job->mutex);
        job->reset_events();
        job->append_event(warning_event(job_id, problem));
      }
    }

    auto save_checkpoint = [&] {
      const json state{{"version", 1},
                       {"job_id", job_id},
                       {"strategy", learner->strategy()},
                       {"iteration", learner->result().history.empty() ? 0 : learner->result().history.back().iteration},
                       {"learner", learner->save_state()}};
      write_file_atomic(checkpoint, state.dump());
      std::lock_guard lock(job->mutex);
      job->record.checkpoint_path = checkpoint.string();
    };

    bool halted = false;
    while (!learner->done()) {
      if (stop.stop_requested()) {
        halted = true;
        break;
      }
      try {
        learner->step();
      } catch (const Cancelled&) {
        halted = true;
        break;
      }
      save_checkpoint();
      const auto& entry = learner->result().history.back();
      {
        std::lock_guard lock(job->mutex);
        job->append_event(progress_event(job_id, entry));
      }
      if (options.generation_hook && options.generation_hook(job_id, entry.iteration)) {
        halted = true;
        break;
      }
    }
    if (halted) {
      save_checkpoint();
      finish(JobStatus::cancelled, "stopped at a generation boundary");
      return;
    }
    save_checkpoint();
    const json result = build_result(*job, prepared, learner->result());
    write_file_atomic(job->file("result.json"), result.dump(2));
    finish(JobStatus::completed, {});
  } catch (const std::exception& e) {
    finish(JobStatus::failed, e.what());
  }
}

}  // namespace

JobService::JobService(fs::path home, JobServiceOptions options) : home_(std::move(home)), options_(std::move(options)) {
  fs::create_directories(home_ / "jobs");
  home_ = fs::canonical(home_);
  std::vector<fs::path> dirs;
  const fs::path index = home_ / "jobs" / "index.json";
  if (fs::exists(index)) {
    try {
      for (const auto& d : read_json_file(index)) dirs.emplace_back(d.get<std::string>());
    } catch (const std::exception&) {
    }
  }
  for (const auto& entry : fs::directory_iterator(home_ / "jobs")) {
    if (entry.is_directory() && std::find(dirs.begin(), dirs.end(), entry.path()) == dirs.end()) dirs.push_back(entry.path());
  }
  for (const auto& dir : dirs) {
    try {
      auto job = std::make_shared<State>();
      job->record = job_record_from_json(read_json_file(dir / "record.json"));
      job->record.dir = dir;
      job->config = parse_job_config(read_json_file(dir / "config.json"), dir);
      std::ifstream events(dir / "events.jsonl");
      std::string line;
      while (std::getline(events, line)) {
        json ev = json::parse(line, nullptr, false);
        if (!ev.is_discarded()) job->events.push_back(std::move(ev));
      }
      if (job->record.status == JobStatus::running) {
        std::lock_guard lock(job->mutex);
        job->record.error = "interrupted: the service stopped while the job was running";
        job->transition(JobStatus::failed, job->record.error);
      }
      jobs_[job->record.job_id] = job;
    } catch (const std::exception&) {
      // Unreadable job directories are skipped, never deleted.
    }
  }
}

JobService::~JobService() {
  std::vector<std::shared_ptr<State>> jobs;
  {
    std::lock_guard lock(mutex_);
    for (auto& [id, job] : jobs_) jobs.push_back(job);
  }
  for (auto& job : jobs) {
    if (job->runner.joinable()) {
      job->runner.request_stop();
      job->runner.join();
    }
  }
}

std::shared_ptr<JobService::State> JobService::find(const std::string& job_id) const {
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw NotFound("unknown job '" + job_id + "'");
  return it->second;
}

std::string JobService::submit(const json& config_document, const fs::path& base_dir) {
  JobConfig config = parse_job_config(config_document, base_dir.empty() ? home_ : base_dir);
  const fs::path root = config.output_dir.empty() ? home_ : fs::path(config.output_dir);

  auto job = std::make_shared<State>();
  std::lock_guard lock(mutex_);
  std::string id;
  do {
    id = new_job_id();
  } while (jobs_.count(id) || fs::exists(root / "jobs" / id));
  const fs::path dir = root / "jobs" / id;
  fs::create_directories(dir);

  job->config = std::move(config);
  job->record.job_id = id;
  job->record.name = job->config.name;
  job->record.status = JobStatus::created;
  job->record.created_at = now_iso();
  job->record.executor = job->config.executor;
  job->record.transitions.push_back({JobStatus::created, job->record.created_at, {}});
  job->record.dir = dir;
  write_file_atomic(dir / "config.json", to_json(job->config).dump(2));
  write_file_atomic(dir / "events.jsonl", "");
  job->persist();
  jobs_[id] = job;

  json index = json::array();
  for (const auto& [jid, j] : jobs_) index.push_back(j->record.dir.string());
  write_file_atomic(home_ / "jobs" / "index.json", index.dump(2));
  return id;
}

JobRecord JobService::get(const std::string& job_id) const {
  auto job = find(job_id);
  std::lock_guard lock(job->mutex);
  return job->record;
}

std::vector<JobRecord> JobService::list() const {
  std::vector<std::shared_ptr<State>> jobs;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, job] : jobs_) jobs.push_back(job);
  }
  std::vector<JobRecord> out;
  for (const auto& job : jobs) {
    std::lock_guard lock(job->mutex);
    out.push_back(job->record);
  }
  std::sort(out.begin(), out.end(), [](const JobRecord& a, const JobRecord& b) {
    return std::tie(a.created_at, a.job_id) < std::tie(b.created_at, b.job_id);
  });
  return out;
}

JobConfig JobService::config(const std::string& job_id) const {
  auto job = find(job_id);
  std::lock_guard lock(job->mutex);
  return job->config;
}

JobRecord JobService::launch(const std::shared_ptr<State>& job, JobStatus expected_from, bool resume) {
  std::lock_guard control(job->control);
  {
    std::lock_guard lock(job->mutex);
    const bool ok = expected_from == JobStatus::created
                        ? job->record.status == JobStatus::created
                        : (job->record.status == JobStatus::cancelled || job->record.status == JobStatus::failed);
    if (!ok) {
      throw IllegalTransition("cannot " + std::string(resume ? "restart" : "start") + " job " + job->record.job_id +
                              " in status " + std::string(to_string(job->record.status)));
    }
  }
  if (job->runner.joinable()) job->runner.join();
  std::lock_guard lock(job->mutex);
  job->transition(JobStatus::running, resume ? "restart" : "start");
  job->runner = std::jthread([job, home = home_, options = options_, resume](std::stop_token stop) {
    run_job(job, home, options, resume, stop);
  });
  return job->record;
}

JobRecord JobService::start(const std::string& job_id) { return launch(find(job_id), JobStatus::created, false); }

JobRecord JobService::restart(const std::string& job_id) { return launch(find(job_id), JobStatus::cancelled, true); }

JobRecord JobService::cancel(const std::string& job_id) {
  auto job = find(job_id);
  std::lock_guard control(job->control);
  {
    std::lock_guard lock(job->mutex);
    if (job->record.status != JobStatus::running) {
      throw IllegalTransition("cannot cancel job " + job_id + " in status " + std::string(to_string(job->record.status)));
    }
  }
  job->runner.request_stop();
  if (job->runner.joinable()) job->runner.join();
  std::lock_guard lock(job->mutex);
  return job->record;
}

JobRecord JobService::wait(const std::string& job_id) const {
  auto job = find(job_id);
  std::unique_lock lock(job->mutex);
  job->cv.wait(lock, [&] { return job->record.status != JobStatus::running; });
  return job->record;
}

json JobService::result(const std::string& job_id) const {
  auto job = find(job_id);
  fs::path path;
  {
    std::lock_guard lock(job->mutex);
    if (job->record.status != JobStatus::completed) {
      throw NotFound("job " + job_id + " has no result (status " + std::string(to_string(job->record.status)) + ")");
    }
    path = job->file("result.json");
  }
  return read_json_file(path);
}

std::unique_ptr<Subscription> JobService::subscribe(const std::string& job_id) const {
  return std::make_unique<JobSubscription>(find(job_id));
}

}  // namespace blast
