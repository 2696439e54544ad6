#include "blast/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <thread>

#include "blast/error.hpp"

namespace blast {

using nlohmann::json;

TaskResult run_task(const TaskFn& fn, const json& payload) {
  try {
    return {true, fn(payload), {}};
  } catch (const std::exception& e) {
    return {false, nullptr, e.what()};
  } catch (...) {
    return {false, nullptr, "unknown error"};
  }
}

std::vector<TaskResult> SerialExecutor::run(std::span<const json> payloads, const TaskFn& fn, std::stop_token stop) {
  std::vector<TaskResult> out;
  out.reserve(payloads.size());
  for (const auto& p : payloads) {
    if (stop.stop_requested()) throw Cancelled("batch cancelled");
    out.push_back(run_task(fn, p));
  }
  return out;
}

PoolExecutor::PoolExecutor(std::size_t threads) : threads_(threads) {
  if (threads == 0) throw ValidationError("pool needs at least one thread", "parallel.executor");
}

std::vector<TaskResult> PoolExecutor::run(std::span<const json> payloads, const TaskFn& fn, std::stop_token stop) {
  std::vector<TaskResult> out(payloads.size());
  std::atomic<std::size_t> next{0};
  auto drain = [&] {
    for (std::size_t i = next++; i < payloads.size(); i = next++) {
      if (stop.stop_requested()) return;
      out[i] = run_task(fn, payloads[i]);
    }
  };
  {
    std::vector<std::jthread> threads;
    const std::size_t n = std::min(threads_, payloads.size());
    for (std::size_t t = 1; t < n; ++t) threads.emplace_back(drain);
    drain();
  }
  if (stop.stop_requested()) throw Cancelled("batch cancelled");
  return out;
}

BrokerExecutor::BrokerExecutor(const std::string& bind_address, BrokerOptions options)
    : bind_address_(bind_address), broker_(bind_address, options) {}

std::vector<TaskResult> BrokerExecutor::run(std::span<const json> payloads, const TaskFn&, std::stop_token stop) {
  return broker_.run_batch(payloads, stop);
}

std::string BrokerExecutor::describe() const { return "broker:" + bind_address_; }

namespace {

std::size_t parse_pool_size(std::string_view text) {
  std::size_t n = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), n);
  if (ec != std::errc() || ptr != text.data() + text.size() || n == 0 || n > 1024) {
    throw ValidationError("pool size must be an integer in [1, 1024]", "parallel.executor");
  }
  return n;
}

}  // namespace

void validate_executor_spec(const std::string& spec) {
  if (spec == "serial") return;
  if (spec.rfind("pool:", 0) == 0) {
    parse_pool_size(std::string_view(spec).substr(5));
    return;
  }
  if (spec.rfind("broker:", 0) == 0) {
    const auto addr = std::string_view(spec).substr(7);
    const auto colon = addr.rfind(':');
    if (colon == std::string_view::npos) throw ValidationError("broker address must be HOST:PORT", "parallel.executor");
    unsigned port = 0;
    const auto p = addr.substr(colon + 1);
    auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), port);
    if (ec != std::errc() || ptr != p.data() + p.size() || port > 65535) {
      throw ValidationError("bad broker port", "parallel.executor");
    }
    return;
  }
  throw ValidationError("expected serial, pool:N or broker:HOST:PORT, got '" + spec + "'", "parallel.executor");
}

std::unique_ptr<Executor> make_executor(const std::string& spec, BrokerOptions options) {
  validate_executor_spec(spec);
  if (spec == "serial") return std::make_unique<SerialExecutor>();
  if (spec.rfind("pool:", 0) == 0) return std::make_unique<PoolExecutor>(parse_pool_size(std::string_view(spec).substr(5)));
  return std::make_unique<BrokerExecutor>(spec.substr(7), options);
}

std::vector<TaskResult> pmap(std::span<const json> payloads, const TaskFn& fn, Executor& executor) {
  if (payloads.empty()) return {};
  return executor.run(payloads, fn);
}

}  // namespace blast
