#include <fcntl.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include "blast/error.hpp"
#include "blast/parallel.hpp"
#include "blast/wire.hpp"
#include "net.hpp"

namespace blast {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Connection {
  wire::FrameDecoder decoder;
  std::string outbox;
  bool registered = false;
  std::string worker_id;
  std::optional<std::uint64_t> in_flight;
  Clock::time_point last_heard;
  bool closing = false;  // drop once the outbox is flushed
};

struct Batch {
  std::uint64_t base_id = 0;
  std::vector<json> payloads;
  std::vector<std::optional<TaskResult>> results;
  std::deque<std::uint64_t> pending;
  std::size_t remaining = 0;
  std::optional<Clock::time_point> no_workers_since;
  std::string failure;
};

}  // namespace

struct Broker::Impl {
  BrokerOptions options;
  int listen_fd = -1;
  int wake[2] = {-1, -1};
  std::uint16_t port = 0;

  mutable std::mutex mutex;
  std::condition_variable_any changed;
  std::mutex batch_mutex;  // serializes run_batch callers
  std::map<int, Connection> connections;
  std::optional<Batch> batch;
  std::uint64_t next_task_id = 1;
  BrokerStats stats;
  bool stopping = false;
  bool stopped = false;
  std::thread loop;

  void poke() {
    const char c = 1;
    [[maybe_unused]] auto n = ::write(wake[1], &c, 1);
  }

  std::size_t registered_workers() const {
    std::size_t n = 0;
    for (const auto& [fd, c] : connections) n += c.registered && !c.closing ? 1 : 0;
    return n;
  }

  bool outstanding(std::uint64_t id) const {
    return batch && id >= batch->base_id && id < batch->base_id + batch->payloads.size() &&
           !batch->results[id - batch->base_id];
  }

  void release_task(Connection& c) {
    if (c.in_flight && outstanding(*c.in_flight)) {
      batch->pending.push_front(*c.in_flight);
      ++stats.reassignments;
    }
    c.in_flight.reset();
  }

  void drop(int fd) {
    auto it = connections.find(fd);
    if (it == connections.end()) return;
    release_task(it->second);
    net::close_fd(fd);
    connections.erase(it);
  }

  void protocol_error(int fd) {
    ++stats.protocol_errors;
    drop(fd);
  }

  void handle(int fd, Connection& c, const json& m) {
    const auto type = wire::validate_message(m);
    if (!c.registered && type != wire::MessageType::hello) throw ProtocolError("expected HELLO");
    switch (type) {
      case wire::MessageType::hello:
        if (c.registered) throw ProtocolError("duplicate HELLO");
        if (m["protocol_version"].get<int>() != wire::kProtocolVersion) throw ProtocolError("unsupported protocol version");
        c.registered = true;
        c.worker_id = m["worker_id"].get<std::string>();
        ++stats.workers_seen;
        break;
      case wire::MessageType::result: {
        const auto id = m["task_id"].get<std::uint64_t>();
        if (c.in_flight == id) c.in_flight.reset();
        if (!outstanding(id)) {
          ++stats.duplicates_discarded;
          break;
        }
        TaskResult r;
        r.ok = m["ok"].get<bool>();
        if (r.ok) {
          r.value = m["value"];
        } else {
          r.value = nullptr;
          r.error = m["error"].get<std::string>();
        }
        batch->results[id - batch->base_id] = std::move(r);
        --batch->remaining;
        ++stats.results_recorded;
        break;
      }
      case wire::MessageType::ping:
        c.outbox += wire::frame_encode(wire::pong(c.worker_id));
        break;
      case wire::MessageType::pong:
        break;
      case wire::MessageType::fin:
        c.closing = true;
        break;
      case wire::MessageType::task:
        throw ProtocolError("workers must not send TASK");
    }
    (void)fd;
  }

  void read_from(int fd) {
    auto& c = connections.at(fd);
    char buf[65536];
    for (;;) {
      const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
      if (n > 0) {
        c.decoder.feed(std::string_view(buf, static_cast<std::size_t>(n)));
        c.last_heard = Clock::now();
        continue;
      }
      if (n == 0) {
        drain_messages(fd);
        drop(fd);
        return;
      }
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) break;
      drop(fd);
      return;
    }
    drain_messages(fd);
  }

  void drain_messages(int fd) {
    auto it = connections.find(fd);
    if (it == connections.end()) return;
    try {
      while (auto m = it->second.decoder.next()) handle(fd, it->second, *m);
    } catch (const ProtocolError&) {
      protocol_error(fd);
    }
  }

  void write_to(int fd) {
    auto& c = connections.at(fd);
    while (!c.outbox.empty()) {
      const ssize_t n = ::send(fd, c.outbox.data(), c.outbox.size(), MSG_NOSIGNAL);
      if (n > 0) {
        c.outbox.erase(0, static_cast<std::size_t>(n));
        continue;
      }
      if (n < 0 && errno == EINTR) continue;
      if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) return;
      drop(fd);
      return;
    }
  }

  void accept_all() {
    for (;;) {
      const int fd = ::accept4(listen_fd, nullptr, nullptr, SOCK_NONBLOCK | SOCK_CLOEXEC);
      if (fd < 0) return;
      Connection c;
      c.decoder = wire::FrameDecoder(options.max_frame);
      c.last_heard = Clock::now();
      connections.emplace(fd, std::move(c));
    }
  }

  void check_heartbeats(Clock::time_point now) {
    const auto limit = options.heartbeat_interval * options.missed_heartbeats;
    std::vector<int> dead;
    for (auto& [fd, c] : connections) {
      if (now - c.last_heard > limit) dead.push_back(fd);
    }
    for (int fd : dead) drop(fd);
  }

  void dispatch() {
    if (!batch) return;
    for (auto& [fd, c] : connections) {
      if (!c.registered || c.closing || c.in_flight) continue;
      while (!batch->pending.empty() && !outstanding(batch->pending.front())) batch->pending.pop_front();
      if (batch->pending.empty()) return;
      const auto id = batch->pending.front();
      batch->pending.pop_front();
      c.in_flight = id;
      c.outbox += wire::frame_encode(wire::task(id, batch->payloads[id - batch->base_id]));
      ++stats.tasks_dispatched;
    }
  }

  void check_worker_timeout(Clock::time_point now) {
    if (!batch || batch->remaining == 0) return;
    if (registered_workers() > 0) {
      batch->no_workers_since.reset();
      return;
    }
    if (!batch->no_workers_since) batch->no_workers_since = now;
    if (now - *batch->no_workers_since > options.no_worker_timeout) {
      batch->failure = "batch abandoned: no workers connected for " +
                       std::to_string(options.no_worker_timeout.count()) + " ms";
    }
  }

  void run() {
    std::vector<pollfd> fds;
    const auto tick = std::min<std::chrono::milliseconds>(options.heartbeat_interval / 4, std::chrono::milliseconds(100));
    for (;;) {
      fds.clear();
      {
        std::lock_guard lock(mutex);
        if (stopping) break;
        fds.push_back({listen_fd, POLLIN, 0});
        fds.push_back({wake[0], POLLIN, 0});
        for (const auto& [fd, c] : connections) {
          fds.push_back({fd, static_cast<short>(POLLIN | (c.outbox.empty() ? 0 : POLLOUT)), 0});
        }
      }
      ::poll(fds.data(), fds.size(), static_cast<int>(std::max<long>(1, tick.count())));

      std::lock_guard lock(mutex);
      if (fds[1].revents & POLLIN) {
        char buf[256];
        while (::read(wake[0], buf, sizeof buf) > 0) {
        }
      }
      if (fds[0].revents & POLLIN) accept_all();
      for (std::size_t k = 2; k < fds.size(); ++k) {
        const int fd = fds[k].fd;
        if (!connections.count(fd)) continue;
        if (fds[k].revents & (POLLIN | POLLHUP | POLLERR)) read_from(fd);
        if (connections.count(fd) && (fds[k].revents & POLLOUT)) write_to(fd);
      }
      const auto now = Clock::now();
      check_heartbeats(now);
      dispatch();
      for (auto it = connections.begin(); it != connections.end();) {
        const int fd = it->first;
        ++it;
        auto& c = connections.at(fd);
        if (!c.outbox.empty()) write_to(fd);
        if (connections.count(fd) && c.closing && c.outbox.empty()) drop(fd);
      }
      check_worker_timeout(now);
      changed.notify_all();
    }

    // Graceful shutdown: FIN to everyone, best effort.
    std::lock_guard lock(mutex);
    for (auto& [fd, c] : connections) {
      c.outbox += wire::frame_encode(wire::fin());
      ::send(fd, c.outbox.data(), c.outbox.size(), MSG_NOSIGNAL);
      ::shutdown(fd, SHUT_WR);
      net::close_fd(fd);
    }
    connections.clear();
    stopped = true;
    changed.notify_all();
  }
};

Broker::Broker(const std::string& bind_address, BrokerOptions options) : impl_(std::make_unique<Impl>()) {
  if (options.heartbeat_interval.count() <= 0) throw ValidationError("heartbeat interval must be positive");
  if (options.missed_heartbeats < 1) throw ValidationError("missed heartbeats must be >= 1");
  impl_->options = options;
  impl_->listen_fd = net::listen_tcp(net::parse_address(bind_address));
  impl_->port = net::local_port(impl_->listen_fd);
  if (::pipe2(impl_->wake, O_NONBLOCK | O_CLOEXEC) != 0) {
    net::close_fd(impl_->listen_fd);
    throw Error("cannot create wake pipe");
  }
  impl_->loop = std::thread([this] { impl_->run(); });
}

Broker::~Broker() {
  shutdown();
  net::close_fd(impl_->listen_fd);
  net::close_fd(impl_->wake[0]);
  net::close_fd(impl_->wake[1]);
}

std::uint16_t Broker::port() const { return impl_->port; }

std::size_t Broker::worker_count() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->registered_workers();
}

BrokerStats Broker::stats() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->stats;
}

std::vector<TaskResult> Broker::run_batch(std::span<const json> payloads, std::stop_token stop) {
  if (payloads.empty()) return {};
  std::lock_guard serial(impl_->batch_mutex);
  std::unique_lock lock(impl_->mutex);
  if (impl_->stopping) throw Error("broker is shut down");
  Batch b;
  b.base_id = impl_->next_task_id;
  impl_->next_task_id += payloads.size();
  b.payloads.assign(payloads.begin(), payloads.end());
  b.results.resize(payloads.size());
  for (std::size_t i = 0; i < payloads.size(); ++i) b.pending.push_back(b.base_id + i);
  b.remaining = payloads.size();
  impl_->batch = std::move(b);
  impl_->poke();

  impl_->changed.wait(lock, stop, [&] {
    return impl_->batch->remaining == 0 || !impl_->batch->failure.empty() || impl_->stopped;
  });
  Batch done = std::move(*impl_->batch);
  impl_->batch.reset();
  for (auto& [fd, c] : impl_->connections) c.in_flight.reset();
  if (done.remaining == 0) {
    std::vector<TaskResult> out;
    out.reserve(done.results.size());
    for (auto& r : done.results) out.push_back(std::move(*r));
    return out;
  }
  if (stop.stop_requested()) throw Cancelled("batch cancelled");
  if (!done.failure.empty()) throw Error(done.failure);
  throw Error("broker shut down during a batch");
}

void Broker::shutdown() {
  {
    std::lock_guard lock(impl_->mutex);
    if (impl_->stopping) {
      if (!impl_->loop.joinable()) return;
    }
    impl_->stopping = true;
  }
  impl_->poke();
  if (impl_->loop.joinable()) impl_->loop.join();
}

}  // namespace blast
