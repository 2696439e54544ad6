#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stop_token>
#include <string>
#include <vector>

#include "json.hpp"

namespace blast {

// Outcome of one task: a value, or the error the evaluation raised.
struct TaskResult {
  bool ok = true;
  nlohmann::json value;
  std::string error;

  friend bool operator==(const TaskResult&, const TaskResult&) = default;
};

// Evaluates one payload. Must be pure and idempotent: tasks can run more
// than once under the broker.
using TaskFn = std::function<nlohmann::json(const nlohmann::json&)>;

TaskResult run_task(const TaskFn& fn, const nlohmann::json& payload);

class Executor {
 public:
  virtual ~Executor() = default;

  // results[i] belongs to payloads[i]. Remote executors ignore `fn` and use
  // the evaluator their workers were started with.
  virtual std::vector<TaskResult> run(std::span<const nlohmann::json> payloads, const TaskFn& fn,
                                      std::stop_token stop = {}) = 0;
  virtual std::string describe() const = 0;
  // True when payloads leave the process and must be self-contained.
  virtual bool remote() const { return false; }
};

class SerialExecutor final : public Executor {
 public:
  std::vector<TaskResult> run(std::span<const nlohmann::json> payloads, const TaskFn& fn,
                              std::stop_token stop = {}) override;
  std::string describe() const override { return "serial"; }
};

class PoolExecutor final : public Executor {
 public:
  explicit PoolExecutor(std::size_t threads);
  std::vector<TaskResult> run(std::span<const nlohmann::json> payloads, const TaskFn& fn,
                              std::stop_token stop = {}) override;
  std::string describe() const override { return "pool:" + std::to_string(threads_); }

 private:
  std::size_t threads_;
};

struct BrokerOptions {
  std::chrono::milliseconds heartbeat_interval{2000};
  int missed_heartbeats = 3;
  std::chrono::milliseconds no_worker_timeout{300000};
  std::size_t max_frame = 16u * 1024u * 1024u;
};

struct BrokerStats {
  std::uint64_t tasks_dispatched = 0;
  std::uint64_t results_recorded = 0;
  std::uint64_t duplicates_discarded = 0;
  std::uint64_t reassignments = 0;
  std::uint64_t workers_seen = 0;
  std::uint64_t protocol_errors = 0;
};

// TCP broker. A single event-loop thread owns all connection state; batches
// are handed to it by run_batch(). Workers get one task at a time; a task is
// reassigned when its worker disconnects or stays silent for
// missed_heartbeats intervals, and the first RESULT per task id wins.
class Broker {
 public:
  // bind_address is "HOST:PORT" or ":PORT"; port 0 picks a free port.
  explicit Broker(const std::string& bind_address, BrokerOptions options = {});
  ~Broker();
  Broker(const Broker&) = delete;
  Broker& operator=(const Broker&) = delete;

  std::uint16_t port() const;
  std::size_t worker_count() const;
  BrokerStats stats() const;

  // Blocks until every payload has a result. Throws Error when no worker has
  // been connected for no_worker_timeout, and Cancelled when `stop` fires.
  // One batch at a time; concurrent callers are serialized.
  std::vector<TaskResult> run_batch(std::span<const nlohmann::json> payloads, std::stop_token stop = {});

  // Sends FIN to every worker and stops the event loop.
  void shutdown();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class BrokerExecutor final : public Executor {
 public:
  explicit BrokerExecutor(const std::string& bind_address, BrokerOptions options = {});
  std::vector<TaskResult> run(std::span<const nlohmann::json> payloads, const TaskFn& fn,
                              std::stop_token stop = {}) override;
  std::string describe() const override;
  bool remote() const override { return true; }
  Broker& broker() { return broker_; }

 private:
  std::string bind_address_;
  Broker broker_;
};

// "serial", "pool:N" or "broker:HOST:PORT". Throws ValidationError.
std::unique_ptr<Executor> make_executor(const std::string& spec, BrokerOptions options = {});
void validate_executor_spec(const std::string& spec);

std::vector<TaskResult> pmap(std::span<const nlohmann::json> payloads, const TaskFn& fn, Executor& executor);

// Left fold in task order.
template <typename T, typename Combine>
T reduce(std::span<const TaskResult> results, Combine combine, T init) {
  for (const auto& r : results) init = combine(std::move(init), r);
  return init;
}

struct WorkerOptions {
  std::string worker_id;  // empty: host-pid-counter
  std::chrono::milliseconds heartbeat_interval{2000};
  std::chrono::milliseconds backoff_base{1000};
  std::chrono::milliseconds backoff_cap{30000};
  int max_connect_attempts = -1;  // consecutive failures before giving up; -1 = forever
  std::size_t max_frame = 16u * 1024u * 1024u;
};

struct WorkerStats {
  std::uint64_t tasks = 0;
  std::uint64_t failures = 0;
  std::uint64_t connections = 0;
  bool received_fin = false;
};

// HELLO, then TASK → evaluate → RESULT until FIN. Reconnects with
// exponential backoff when the connection drops. A stop request closes the
// connection at once without answering the task in hand (a crash, as seen
// by the broker).
WorkerStats worker_run(const std::string& connect_address, const TaskFn& evaluator, WorkerOptions options = {},
                       std::stop_token stop = {});

}  // namespace blast
