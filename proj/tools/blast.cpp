// blast: command-line front end.
//
//   blast model list | show <id> [--species A,B]
//   blast data validate <file>
//   blast run <config> [--executor serial|pool:N|broker:ADDR]
//   blast worker --connect HOST:PORT
//   blast serve --port P --home DIR
//   blast validate <config> <params-file>
//
// Exit status: 0 success, 1 validation error, 2 runtime failure.

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "blast/evaluation.hpp"
#include "blast/jobs.hpp"
#include "blast/serialize.hpp"
#include "blast/server.hpp"
#include "blast/trainset.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

fs::path blast_home(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("BLAST_HOME"); env && *env) return env;
  return "blast_home";
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw blast::ValidationError("cannot open " + p.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw blast::ValidationError(p.string() + " is not valid JSON");
  return j;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Blocks SIGINT/SIGTERM in every thread and runs `on_signal` from a
// dedicated thread when one arrives.
class SignalWatcher {
 public:
  explicit SignalWatcher(std::function<void()> on_signal) {
    sigemptyset(&set_);
    sigaddset(&set_, SIGINT);
    sigaddset(&set_, SIGTERM);
    sigaddset(&set_, SIGUSR1);
    pthread_sigmask(SIG_BLOCK, &set_, nullptr);
    thread_ = std::thread([this, f = std::move(on_signal)] {
      int sig = 0;
      sigwait(&set_, &sig);
      if (sig != SIGUSR1) f();
    });
  }
  ~SignalWatcher() {
    pthread_kill(thread_.native_handle(), SIGUSR1);
    thread_.join();
  }

 private:
  sigset_t set_;
  std::thread thread_;
};

void print_progress(const json& ev) {
  if (ev.value("type", "") == "warning") {
    std::fprintf(stderr, "warning: %s\n", ev.value("message", "").c_str());
    return;
  }
  const auto num = [](const json& v) { return v.is_number() ? v.get<double>() : INFINITY; };
  std::printf("%-8s iter %5d  best %.6e  mean %.6e  evals %zu\n", ev.value("stage", "").c_str(),
              ev.value("iteration", 0), num(ev["best_objective"]), num(ev["mean_objective"]),
              ev.value("evaluations", std::size_t{0}));
  std::fflush(stdout);
}

int cmd_model_list(bool as_json) {
  json out = json::array();
  for (const auto& m : blast::list_models()) out.push_back(blast::model_summary(m));
  if (as_json) {
    std::cout << out.dump(2) << '\n';
    return kOk;
  }
  for (const auto& m : blast::list_models()) {
    std::printf("%-18s %-13s cutoff=%-7s %s\n", m.model_id.c_str(), m.arity == blast::Arity::pair ? "pair" : "pair+triplet",
                m.cutoff_param.c_str(), m.summary.c_str());
  }
  return kOk;
}

int cmd_model_show(const std::string& id, const std::string& species, bool as_json) {
  const json d = blast::model_detail(id, split_list(species));
  if (as_json) {
    std::cout << d.dump(2) << '\n';
    return kOk;
  }
  std::printf("%s (%s)\n", id.c_str(), d["arity"].get<std::string>().c_str());
  std::printf("  %-16s %-6s %12s %12s %12s %12s\n", "name", "unit", "lower", "upper", "default_low", "default_high");
  for (const auto& p : d["parameters"]) {
    std::printf("  %-16s %-6s %12g %12g %12g %12g\n", p["name"].get<std::string>().c_str(),
                p["unit"].get<std::string>().c_str(), p["lower"].get<double>(), p["upper"].get<double>(),
                p["default_low"].get<double>(), p["default_high"].get<double>());
  }
  return kOk;
}

int cmd_data_validate(const fs::path& file) {
  const auto ext = file.extension().string();
  if (ext == ".xyz" || ext == ".extxyz") {
    const auto frames = blast::load_structures(file);
    std::printf("%s: %zu frame(s)\n", file.string().c_str(), frames.size());
    for (const auto& s : frames) {
      s.validate();
      std::printf("  %-24s %zu atoms%s\n", s.label.c_str(), s.positions.size(), s.cell ? ", periodic cell" : "");
    }
    return kOk;
  }
  const json doc = read_json(file);
  if (doc.is_object() && doc.contains("structures")) {
    const auto data = blast::load_dataset(file);
    std::printf("%s: %zu structure(s), %zu target(s)\n", file.string().c_str(), data.structures.size(),
                data.targets.size());
    for (const auto& t : data.targets) {
      std::printf("  %-20s %-32s %14.6g %-6s w=%g rank=%d tol=%g\n", t.id.c_str(), t.kind.to_string().c_str(), t.target,
                  t.unit.c_str(), t.weight, t.rank, t.tolerance);
    }
    return kOk;
  }
  const auto targets = blast::parse_targets(doc);
  std::printf("%s: %zu target(s)\n", file.string().c_str(), targets.size());
  return kOk;
}

int cmd_run(const fs::path& config_path, const std::string& executor, const std::string& home_flag) {
  json doc = read_json(config_path);
  if (!executor.empty()) doc["parallel"] = {{"executor", executor}};
  blast::JobService service(blast_home(home_flag));
  const std::string id = service.submit(doc, fs::absolute(config_path).parent_path());
  std::printf("job %s\n", id.c_str());
  std::fflush(stdout);
  SignalWatcher watcher([&] {
    try {
      service.cancel(id);
    } catch (const std::exception&) {
    }
  });
  service.start(id);
  auto sub = service.subscribe(id);
  while (!sub->closed()) {
    if (auto ev = sub->next(std::chrono::milliseconds(500))) print_progress(*ev);
  }
  const auto record = service.wait(id);
  if (record.status != blast::JobStatus::completed) {
    std::fprintf(stderr, "job %s %s%s%s\n", id.c_str(), std::string(blast::to_string(record.status)).c_str(),
                 record.error.empty() ? "" : ": ", record.error.c_str());
    return kRuntime;
  }
  const json result = service.result(id);
  std::printf("best objective %.9e\n", result["best"]["objective"].is_number() ? result["best"]["objective"].get<double>() : INFINITY);
  for (const auto& [name, v] : result["best"]["parameters"].items()) std::printf("  %-16s %.10g\n", name.c_str(), v.get<double>());
  if (!result["cross_validation"].is_null()) {
    const auto& cv = result["cross_validation"];
    std::printf("cross-validation: %d passed, %d failed, rms normalized residual %.4g\n", cv.value("passed", 0),
                cv.value("failed", 0), cv.value("rms_normalized_residual", 0.0));
  }
  std::printf("result: %s\n", (record.dir / "result.json").string().c_str());
  return kOk;
}

int cmd_worker(const std::string& connect, int heartbeat_ms, const std::string& worker_id) {
  blast::WorkerOptions options;
  options.heartbeat_interval = std::chrono::milliseconds(heartbeat_ms);
  options.worker_id = worker_id;
  std::stop_source stop;
  SignalWatcher watcher([&] { stop.request_stop(); });
  const auto stats = blast::worker_run(connect, blast::make_candidate_task_fn(), options, stop.get_token());
  std::fprintf(stderr, "worker done: %llu task(s), %llu failure(s), %llu connection(s)%s\n",
               static_cast<unsigned long long>(stats.tasks), static_cast<unsigned long long>(stats.failures),
               static_cast<unsigned long long>(stats.connections), stats.received_fin ? ", FIN received" : "");
  return kOk;
}

int cmd_serve(const std::string& host, int port, const std::string& home_flag) {
  blast::JobService service(blast_home(home_flag));
  blast::HttpApi api(service);
  SignalWatcher watcher([&] { api.stop(); });
  const int bound = api.start(host, port);
  std::printf("serving %s on http://%s:%d\n", service.home().string().c_str(), host.c_str(), bound);
  std::fflush(stdout);
  api.wait();
  return kOk;
}

blast::ParameterVector load_params(const fs::path& file, const blast::ParameterSpace& space) {
  json doc = read_json(file);
  if (doc.is_object() && doc.contains("best")) doc = doc["best"].value("parameters", doc["best"]["params"]);
  blast::ParameterVector v{std::vector<double>(space.size())};
  if (doc.is_array()) {
    if (doc.size() != space.size()) throw blast::ValidationError("expected " + std::to_string(space.size()) + " values", "params");
    for (std::size_t i = 0; i < space.size(); ++i) v[i] = doc[i].get<double>();
  } else if (doc.is_object()) {
    for (std::size_t i = 0; i < space.size(); ++i) {
      const auto& name = space.specs[i].name;
      if (!doc.contains(name)) {
        if (space.specs[i].frozen()) {
          v[i] = space.specs[i].lower;
          continue;
        }
        throw blast::ValidationError("missing value", "params." + name);
      }
      v[i] = doc[name].get<double>();
    }
  } else {
    throw blast::ValidationError("params file must hold an object or an array", "params");
  }
  const auto bad = blast::validate_params(space, v);
  if (!bad.empty()) throw blast::ValidationError("value outside bounds", "params." + space.specs[bad.front()].name);
  return v;
}

int cmd_validate(const fs::path& config_path, const fs::path& params_file, const std::string& home_flag) {
  const auto config = blast::parse_job_config(read_json(config_path), fs::absolute(config_path).parent_path());
  const auto prepared = blast::prepare_job(config, blast_home(home_flag));
  const auto& problem = *prepared.problem;
  const auto params = load_params(params_file, problem.space);
  const blast::Dataset& holdout = prepared.holdout.targets.empty() ? problem.data : prepared.holdout;
  auto external = [&](const std::string& id) { return problem.run_evaluator(id, params); };
  const auto report = blast::cross_validate(problem.space, params, holdout, external);
  json out = blast::to_json(report);
  out["set"] = prepared.holdout.targets.empty() ? "all" : "holdout";
  std::cout << out.dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Force-field fitting workbench"};
  app.require_subcommand(1);

  auto* model = app.add_subcommand("model", "Inspect the model registry");
  model->require_subcommand(1);
  bool as_json = false;
  auto* model_list = model->add_subcommand("list", "List supported models");
  model_list->add_flag("--json", as_json, "Print JSON");
  std::string model_id;
  std::string species = "A";
  auto* model_show = model->add_subcommand("show", "Show a model's parameters, bounds and default ranges");
  model_show->add_option("id", model_id, "Model id")->required();
  model_show->add_option("--species", species, "Comma-separated species");
  model_show->add_flag("--json", as_json, "Print JSON");

  auto* data = app.add_subcommand("data", "Training data tools");
  data->require_subcommand(1);
  std::string data_file;
  auto* data_validate = data->add_subcommand("validate", "Check a dataset, targets or extended XYZ file");
  data_validate->add_option("file", data_file)->required();

  std::string config_file;
  std::string executor;
  std::string home;
  auto* run = app.add_subcommand("run", "Run a fitting job to completion");
  run->add_option("config", config_file)->required();
  run->add_option("--executor", executor, "serial | pool:N | broker:HOST:PORT");
  run->add_option("--home", home, "Job storage root (default $BLAST_HOME or ./blast_home)");

  std::string connect;
  int heartbeat_ms = 2000;
  std::string worker_id;
  auto* worker = app.add_subcommand("worker", "Serve evaluations for a broker");
  worker->add_option("--connect", connect, "Broker HOST:PORT")->required();
  worker->add_option("--heartbeat-ms", heartbeat_ms, "Heartbeat interval")->check(CLI::PositiveNumber);
  worker->add_option("--id", worker_id, "Worker id");

  int port = 8080;
  std::string host = "127.0.0.1";
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  serve->add_option("--port", port)->check(CLI::Range(0, 65535));
  serve->add_option("--host", host);
  serve->add_option("--home", home, "Job storage root (default $BLAST_HOME or ./blast_home)");

  std::string params_file;
  auto* validate = app.add_subcommand("validate", "Score fitted parameters on a config's held-out targets");
  validate->add_option("config", config_file)->required();
  validate->add_option("params", params_file, "JSON object of parameter values, or a result.json")->required();
  validate->add_option("--home", home);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*model_list) return cmd_model_list(as_json);
    if (*model_show) return cmd_model_show(model_id, species, as_json);
    if (*data_validate) return cmd_data_validate(data_file);
    if (*run) return cmd_run(config_file, executor, home);
    if (*worker) return cmd_worker(connect, heartbeat_ms, worker_id);
    if (*serve) return cmd_serve(host, port, home);
    if (*validate) return cmd_validate(config_file, params_file, home);
  } catch (const blast::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidation;
  } catch (const blast::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
  return kOk;
}
