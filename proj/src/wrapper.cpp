#include "blast/wrapper.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>
#include <thread>

#include "blast/error.hpp"

namespace blast {

namespace fs = std::filesystem;
using nlohmann::json;

void ExternalEvaluatorSpec::validate(const std::string& path) const {
  if (id.empty()) throw ValidationError("must be non-empty", path + ".id");
  for (char c : id) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) {
      throw ValidationError("may contain only letters, digits, '_', '-' and '.'", path + ".id");
    }
  }
  if (command.empty() || command.front().empty()) throw ValidationError("must be a non-empty argv list", path + ".command");
  if (!stdout_pattern && !result_file) {
    throw ValidationError("needs stdout_pattern or result_file", path + ".output");
  }
  if (stdout_pattern) {
    try {
      const std::regex re(*stdout_pattern);
      if (re.mark_count() != 1) throw ValidationError("must have exactly one capture group", path + ".stdout_pattern");
    } catch (const std::regex_error& e) {
      throw ValidationError(std::string("invalid regex: ") + e.what(), path + ".stdout_pattern");
    }
  }
  if (result_file && (result_file->name.empty() || result_file->key.empty())) {
    throw ValidationError("needs name and key", path + ".result_file");
  }
  if (!(timeout_s > 0.0) || !std::isfinite(timeout_s)) throw ValidationError("must be > 0", path + ".timeout_s");
  if (retries < 0) throw ValidationError("must be >= 0", path + ".retries");
  for (std::size_t i = 0; i < template_files.size(); ++i) {
    const auto& rendered = template_files[i].second;
    if (rendered.empty() || fs::path(rendered).is_absolute() || rendered.find("..") != std::string::npos) {
      throw ValidationError("rendered name must be a relative path inside the run directory",
                            path + ".templates[" + std::to_string(i) + "]");
    }
  }
}

ExternalEvaluatorSpec evaluator_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) throw ValidationError("must be an object", path);
  ExternalEvaluatorSpec s;
  try {
    s.id = j.at("id").get<std::string>();
    s.command = j.at("command").get<std::vector<std::string>>();
    if (j.contains("templates")) {
      for (const auto& t : j["templates"]) {
        if (t.is_array()) {
          s.template_files.emplace_back(t.at(0).get<std::string>(), t.at(1).get<std::string>());
        } else {
          s.template_files.emplace_back(t.at("template").get<std::string>(), t.at("name").get<std::string>());
        }
      }
    }
    if (j.contains("stdout_pattern")) s.stdout_pattern = j["stdout_pattern"].get<std::string>();
    if (j.contains("result_file")) {
      s.result_file = ResultFileOutput{j["result_file"].at("name").get<std::string>(),
                                       j["result_file"].at("key").get<std::string>()};
    }
    s.timeout_s = j.value("timeout_s", 60.0);
    s.retries = j.value("retries", 0);
  } catch (const json::exception& e) {
    throw ValidationError(e.what(), path);
  }
  s.validate(path);
  return s;
}

json to_json(const ExternalEvaluatorSpec& s) {
  json t = json::array();
  for (const auto& [tpl, name] : s.template_files) t.push_back({{"template", tpl}, {"name", name}});
  json j{{"id", s.id}, {"command", s.command}, {"templates", t}, {"timeout_s", s.timeout_s}, {"retries", s.retries}};
  if (s.stdout_pattern) j["stdout_pattern"] = *s.stdout_pattern;
  if (s.result_file) j["result_file"] = {{"name", s.result_file->name}, {"key", s.result_file->key}};
  return j;
}

std::string render_template(std::string_view text, const std::map<std::string, double>& params) {
  static constexpr std::string_view open = "{{param:";
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto start = text.find(open, pos);
    if (start == std::string_view::npos) break;
    const auto close = text.find("}}", start + open.size());
    if (close == std::string_view::npos) break;
    out.append(text.substr(pos, start - pos));
    const std::string name(text.substr(start + open.size(), close - start - open.size()));
    const auto it = params.find(name);
    if (it == params.end()) throw ValidationError("template references unknown parameter '" + name + "'", name);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", it->second);
    out += buf;
    pos = close + 2;
  }
  out.append(text.substr(pos));
  return out;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::optional<double> to_real(const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path make_run_dir(const fs::path& scratch, const std::string& id) {
  static std::atomic<std::uint64_t> counter{0};
  thread_local std::mt19937_64 rng{std::random_device{}()};
  fs::create_directories(scratch);
  for (;;) {
    char suffix[64];
    std::snprintf(suffix, sizeof suffix, "-%d-%llu-%08llx", static_cast<int>(::getpid()),
                  static_cast<unsigned long long>(counter++), static_cast<unsigned long long>(rng() & 0xffffffffu));
    fs::path dir = scratch / (id + suffix);
    if (fs::create_directory(dir)) return dir;
  }
}

struct ProcessOutcome {
  bool started = false;
  bool timed_out = false;
  int exit_code = -1;
  std::string error;
};

ProcessOutcome run_process(const std::vector<std::string>& command, const fs::path& dir, double timeout_s) {
  std::vector<char*> argv;
  for (const auto& a : command) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  const std::string dir_s = dir.string();
  const std::string out_s = (dir / "stdout.txt").string();
  const std::string err_s = (dir / "stderr.txt").string();

  ProcessOutcome o;
  const pid_t pid = ::fork();
  if (pid < 0) {
    o.error = "fork failed";
    return o;
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    if (::chdir(dir_s.c_str()) != 0) ::_exit(126);
    const int out = ::open(out_s.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    const int err = ::open(err_s.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    const int in = ::open("/dev/null", O_RDONLY);
    if (out < 0 || err < 0 || in < 0) ::_exit(126);
    ::dup2(in, 0);
    ::dup2(out, 1);
    ::dup2(err, 2);
    ::execvp(argv[0], argv.data());
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  o.started = true;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
  int status = 0;
  for (;;) {
    const pid_t r = ::waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0 && errno != EINTR) {
      o.error = "waitpid failed";
      return o;
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      ::kill(-pid, SIGKILL);
      ::kill(pid, SIGKILL);
      while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
      }
      o.timed_out = true;
      return o;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  // Clean up anything the command left behind in its process group.
  ::kill(-pid, SIGKILL);
  if (WIFEXITED(status)) {
    o.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    o.exit_code = 128 + WTERMSIG(status);
  }
  return o;
}

// One attempt. Returns the value or the reason it failed.
Prediction attempt(const ExternalEvaluatorSpec& spec, const fs::path& dir) {
  const ProcessOutcome o = run_process(spec.command, dir, spec.timeout_s);
  if (!o.error.empty()) return Prediction::failure(o.error);
  if (o.timed_out) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "timed out after %g s", spec.timeout_s);
    return Prediction::failure(buf);
  }
  if (o.exit_code == 127) return Prediction::failure("command not found: " + spec.command.front());
  if (o.exit_code != 0) return Prediction::failure("exit status " + std::to_string(o.exit_code));
  if (spec.stdout_pattern) {
    const std::string out = read_file(dir / "stdout.txt");
    std::smatch m;
    const std::regex re(*spec.stdout_pattern);
    if (!std::regex_search(out, m, re)) return Prediction::failure("stdout pattern not found");
    const auto v = to_real(trim(m[1].str()));
    if (!v) return Prediction::failure("captured text '" + m[1].str() + "' is not a number");
    return Prediction::success(*v);
  }
  try {
    return Prediction::success(parse_result_file(dir / spec.result_file->name, spec.result_file->key));
  } catch (const Error& e) {
    return Prediction::failure(e.what());
  }
}

}  // namespace

double parse_result_file(const fs::path& path, const std::string& key) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open result file " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    if (trim(std::string_view(line).substr(0, eq)) != key) continue;
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto v = to_real(value);
    if (!v) throw ParseError("value of '" + key + "' is not numeric: '" + value + "'");
    return *v;
  }
  throw ParseError("key '" + key + "' not found in " + path.string());
}

ExternalRun run_external(const ExternalEvaluatorSpec& spec, const std::map<std::string, double>& params,
                         const fs::path& scratch_dir, const fs::path& template_dir) {
  ExternalRun run;
  std::vector<std::pair<std::string, std::string>> rendered;
  try {
    for (const auto& [tpl, name] : spec.template_files) {
      fs::path src = tpl;
      if (src.is_relative() && !template_dir.empty()) src = template_dir / src;
      std::ifstream in(src);
      if (!in) return {Prediction::failure("cannot read template " + src.string()), 0, {}};
      std::ostringstream ss;
      ss << in.rdbuf();
      rendered.emplace_back(name, render_template(ss.str(), params));
    }
  } catch (const Error& e) {
    run.prediction = Prediction::failure(e.what());
    return run;
  }

  for (int k = 0; k <= spec.retries; ++k) {
    const fs::path dir = make_run_dir(scratch_dir, spec.id);
    for (const auto& [name, text] : rendered) {
      const fs::path target = dir / name;
      fs::create_directories(target.parent_path());
      std::ofstream(target, std::ios::binary) << text;
    }
    ++run.attempts;
    run.prediction = attempt(spec, dir);
    if (run.prediction.ok) {
      std::error_code ec;
      fs::remove_all(dir, ec);
      run.run_dir.clear();
      return run;
    }
    run.run_dir = dir;
  }
  run.prediction.error = spec.id + ": " + run.prediction.error + " (after " + std::to_string(run.attempts) +
                         " attempt" + (run.attempts == 1 ? "" : "s") + "; kept " + run.run_dir.string() + ")";
  return run;
}

fs::path template_dir_for(const fs::path& home, const std::string& evaluator_id) {
  return home / "templates" / evaluator_id;
}

}  // namespace blast
