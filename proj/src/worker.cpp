#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <condition_variable>
#include <mutex>
#include <thread>

#include "blast/error.hpp"
#include "blast/parallel.hpp"
#include "blast/wire.hpp"
#include "net.hpp"

namespace blast {

using nlohmann::json;

namespace {

std::string default_worker_id() {
  static std::atomic<int> counter{0};
  char host[256] = "worker";
  ::gethostname(host, sizeof host - 1);
  return std::string(host) + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++);
}

// Sleeps for `d` unless a stop arrives first; true when stopped.
bool interruptible_sleep(std::chrono::milliseconds d, std::stop_token stop) {
  std::mutex m;
  std::condition_variable_any cv;
  std::unique_lock lock(m);
  return cv.wait_for(lock, stop, d, [] { return false; }) || stop.stop_requested();
}

enum class SessionEnd { fin, lost, stopped };

class Session {
 public:
  Session(int fd, const TaskFn& evaluator, const WorkerOptions& options, const std::string& worker_id,
          WorkerStats& stats)
      : fd_(fd), evaluator_(evaluator), options_(options), worker_id_(worker_id), stats_(stats),
        decoder_(options.max_frame) {}

  SessionEnd run(std::stop_token stop) {
    if (!send(wire::hello(worker_id_))) return SessionEnd::lost;
    std::jthread heartbeat([this](std::stop_token hb_stop) {
      while (!interruptible_sleep(options_.heartbeat_interval, hb_stop)) {
        if (!send(wire::ping(worker_id_))) return;
      }
    });
    const SessionEnd end = loop(stop);
    heartbeat.request_stop();
    return end;
  }

 private:
  bool send(const json& m) {
    std::lock_guard lock(send_mutex_);
    return net::send_all(fd_, wire::frame_encode(m));
  }

  SessionEnd loop(std::stop_token stop) {
    char buf[65536];
    for (;;) {
      if (stop.stop_requested()) return SessionEnd::stopped;
      pollfd p{fd_, POLLIN, 0};
      const int ready = ::poll(&p, 1, 50);
      if (ready < 0 && errno != EINTR) return SessionEnd::lost;
      if (ready <= 0) continue;
      const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
      if (n == 0) return SessionEnd::lost;
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        return SessionEnd::lost;
      }
      decoder_.feed(std::string_view(buf, static_cast<std::size_t>(n)));
      try {
        while (auto m = decoder_.next()) {
          const auto type = wire::validate_message(*m);
          if (type == wire::MessageType::fin) {
            stats_.received_fin = true;
            return SessionEnd::fin;
          }
          if (type == wire::MessageType::pong) continue;
          if (type != wire::MessageType::task) throw ProtocolError("unexpected message from broker");
          const auto id = (*m)["task_id"].get<std::uint64_t>();
          const TaskResult r = run_task(evaluator_, (*m)["payload"]);
          if (stop.stop_requested()) return SessionEnd::stopped;
          ++stats_.tasks;
          if (!r.ok) ++stats_.failures;
          if (!send(r.ok ? wire::result_ok(id, r.value) : wire::result_error(id, r.error))) return SessionEnd::lost;
        }
      } catch (const ProtocolError&) {
        return SessionEnd::lost;
      }
    }
  }

  int fd_;
  const TaskFn& evaluator_;
  const WorkerOptions& options_;
  const std::string& worker_id_;
  WorkerStats& stats_;
  wire::FrameDecoder decoder_;
  std::mutex send_mutex_;
};

}  // namespace

WorkerStats worker_run(const std::string& connect_address, const TaskFn& evaluator, WorkerOptions options,
                       std::stop_token stop) {
  const auto addr = net::parse_address(connect_address);
  const std::string worker_id = options.worker_id.empty() ? default_worker_id() : options.worker_id;
  WorkerStats stats;
  int failures = 0;
  auto backoff = options.backoff_base;
  while (!stop.stop_requested()) {
    const int fd = net::connect_tcp(addr);
    if (fd < 0) {
      ++failures;
      if (options.max_connect_attempts >= 0 && failures >= options.max_connect_attempts) {
        throw Error("cannot reach broker at " + connect_address);
      }
      if (interruptible_sleep(backoff, stop)) break;
      backoff = std::min(backoff * 2, options.backoff_cap);
      continue;
    }
    failures = 0;
    backoff = options.backoff_base;
    ++stats.connections;
    SessionEnd end;
    {
      Session session(fd, evaluator, options, worker_id, stats);
      end = session.run(stop);
    }
    if (end == SessionEnd::stopped) {
      // Abrupt close: no FIN, no pending result.
      ::shutdown(fd, SHUT_RDWR);
    }
    net::close_fd(fd);
    if (end != SessionEnd::lost) break;
    if (interruptible_sleep(backoff, stop)) break;
    backoff = std::min(backoff * 2, options.backoff_cap);
  }
  return stats;
}

}  // namespace blast
