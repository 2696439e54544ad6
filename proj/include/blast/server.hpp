#pragma once

#include <memory>
#include <string>

#include "blast/jobs.hpp"

namespace blast {

// HTTP front end of a JobService:
//   GET  /api/models, /api/models/{id}[?species=A,B]
//   POST /api/jobs, GET /api/jobs, GET /api/jobs/{id}
//   POST /api/jobs/{id}/start|cancel|restart
//   GET  /api/jobs/{id}/progress (text/event-stream)
//   GET  /api/jobs/{id}/result
class HttpApi {
 public:
  explicit HttpApi(JobService& service);
  ~HttpApi();
  HttpApi(const HttpApi&) = delete;
  HttpApi& operator=(const HttpApi&) = delete;

  // Binds and serves on a background thread; port 0 picks a free port.
  // Returns the bound port. Throws Error when the bind fails.
  int start(const std::string& host, int port);
  // Serves on the calling thread until stop().
  void serve(const std::string& host, int port);
  // Blocks until a server started with start() stops.
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Model registry views shared by the CLI and the HTTP API.
nlohmann::json model_summary(const ModelDescriptor& m);
nlohmann::json model_detail(const std::string& model_id, const std::vector<std::string>& species);

}  // namespace blast
