#include "blast/server.hpp"

#include <atomic>
#include <sstream>
#include <thread>

#include "httplib.h"

#include "blast/serialize.hpp"

namespace blast {

using nlohmann::json;

json model_summary(const ModelDescriptor& m) {
  return json{{"model_id", m.model_id},
              {"arity", m.arity == Arity::pair ? "pair" : "pair+triplet"},
              {"cutoff_param", m.cutoff_param},
              {"summary", m.summary}};
}

json model_detail(const std::string& model_id, const std::vector<std::string>& species) {
  json j = model_summary(find_model(model_id));
  j["species"] = species;
  j["parameters"] = parameter_space(model_id, species).specs;
  return j;
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(2), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message, const std::string& path = {}) {
  json body{{"error", message}};
  if (!path.empty()) body["path"] = path;
  send_json(res, status, body);
}

// Maps library errors onto HTTP statuses.
template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const NotFound& e) {
    send_error(res, 404, e.what());
  } catch (const IllegalTransition& e) {
    send_error(res, 409, e.what());
  } catch (const ValidationError& e) {
    send_error(res, 400, e.what(), e.path());
  } catch (const std::exception& e) {
    send_error(res, 500, e.what());
  }
}

std::vector<std::string> split_species(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string sse_frame(const json& ev) {
  const std::string type = ev.value("type", "progress");
  return "event: " + type + "\ndata: " + ev.dump() + "\n\n";
}

}  // namespace

struct HttpApi::Impl {
  JobService& service;
  httplib::Server server;
  std::thread thread;
  std::atomic<bool> stopping{false};

  explicit Impl(JobService& s) : service(s) { routes(); }

  void routes() {
    server.Get("/api/models", [](const httplib::Request&, httplib::Response& res) {
      json out = json::array();
      for (const auto& m : list_models()) out.push_back(model_summary(m));
      send_json(res, 200, out);
    });

    server.Get(R"(/api/models/([A-Za-z0-9_]+))", [](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string id = req.matches[1];
        try {
          find_model(id);
        } catch (const Error& e) {
          throw NotFound(e.what());
        }
        auto species = split_species(req.has_param("species") ? req.get_param_value("species") : "A");
        if (species.empty()) throw ValidationError("must list at least one species", "species");
        send_json(res, 200, model_detail(id, species));
      });
    });

    server.Post("/api/jobs", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const json doc = json::parse(req.body, nullptr, false);
        if (doc.is_discarded()) throw ValidationError("request body is not valid JSON");
        const std::string id = service.submit(doc);
        send_json(res, 201, {{"job_id", id}, {"status", "created"}});
      });
    });

    server.Get("/api/jobs", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        json out = json::array();
        for (const auto& r : service.list()) out.push_back(to_json(r));
        send_json(res, 200, out);
      });
    });

    server.Get(R"(/api/jobs/([A-Za-z0-9_\-]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        json body = to_json(service.get(req.matches[1]));
        body["config"] = to_json(service.config(req.matches[1]));
        send_json(res, 200, body);
      });
    });

    server.Post(R"(/api/jobs/([A-Za-z0-9_\-]+)/(start|cancel|restart))",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] {
                    const std::string id = req.matches[1];
                    const std::string action = req.matches[2];
                    JobRecord r = action == "start"    ? service.start(id)
                                  : action == "cancel" ? service.cancel(id)
                                                       : service.restart(id);
                    send_json(res, 200, to_json(r));
                  });
                });

    server.Get(R"(/api/jobs/([A-Za-z0-9_\-]+)/result)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, service.result(req.matches[1])); });
    });

    server.Get(R"(/api/jobs/([A-Za-z0-9_\-]+)/progress)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        std::shared_ptr<Subscription> sub = service.subscribe(req.matches[1]);
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider("text/event-stream", [this, sub](std::size_t, httplib::DataSink& sink) {
          while (!stopping) {
            if (!sink.is_writable()) return false;
            auto ev = sub->next(std::chrono::milliseconds(250));
            if (ev) {
              const std::string frame = sse_frame(*ev);
              if (!sink.write(frame.data(), frame.size())) return false;
              return true;
            }
            if (sub->closed()) {
              sink.done();
              return true;
            }
            // Comment line keeps idle connections alive.
            static constexpr char keepalive[] = ": keepalive\n\n";
            if (!sink.write(keepalive, sizeof keepalive - 1)) return false;
            return true;
          }
          sink.done();
          return true;
        });
      });
    });
  }
};

HttpApi::HttpApi(JobService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpApi::~HttpApi() { stop(); }

int HttpApi::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("cannot bind HTTP server to " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpApi::serve(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw Error("cannot serve on " + host + ":" + std::to_string(port));
}

void HttpApi::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void HttpApi::stop() {
  impl_->stopping = true;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace blast
