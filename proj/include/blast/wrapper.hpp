#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "blast/objective.hpp"

namespace blast {

struct ResultFileOutput {
  std::string name;  // file inside the run directory
  std::string key;
};

// An external program that computes one scalar property.
struct ExternalEvaluatorSpec {
  std::string id;
  std::vector<std::string> command;  // argv; argv[0] looked up on PATH
  // (template path, rendered file name). Relative template paths resolve
  // against the evaluator's template directory.
  std::vector<std::pair<std::string, std::string>> template_files;
  std::optional<std::string> stdout_pattern;  // regex with one numeric capture group
  std::optional<ResultFileOutput> result_file;
  double timeout_s = 60.0;
  int retries = 0;

  // `path` prefixes field names in errors, e.g. "evaluators[0]".
  void validate(const std::string& path = "evaluator") const;
};

ExternalEvaluatorSpec evaluator_from_json(const nlohmann::json& j, const std::string& path = "evaluator");
nlohmann::json to_json(const ExternalEvaluatorSpec& spec);

// Replaces each {{param:NAME}} with the value at 17 significant digits.
// Throws ValidationError naming a parameter that is not in `params`.
std::string render_template(std::string_view text, const std::map<std::string, double>& params);

// First `key = value` line wins. Throws ParseError on a missing key or a
// non-numeric value.
double parse_result_file(const std::filesystem::path& path, const std::string& key);

struct ExternalRun {
  Prediction prediction;
  int attempts = 0;
  std::filesystem::path run_dir;  // kept only when the run failed
};

// Renders the templates into a fresh subdirectory of scratch_dir, runs the
// command there and parses the value. Nonzero exit, timeout and unparseable
// output are retried `retries` times and then reported as a failed
// prediction; this never throws for a failing program.
ExternalRun run_external(const ExternalEvaluatorSpec& spec, const std::map<std::string, double>& params,
                         const std::filesystem::path& scratch_dir, const std::filesystem::path& template_dir = {});

// <home>/templates/<evaluator_id>
std::filesystem::path template_dir_for(const std::filesystem::path& home, const std::string& evaluator_id);

}  // namespace blast
