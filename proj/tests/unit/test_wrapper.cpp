#include <fstream>
#include <set>
#include <thread>

#include "doctest.h"

#include "blast/error.hpp"
#include "blast/wrapper.hpp"
#include "helpers.hpp"

using namespace blast;
using blast::testing::TempDir;
namespace fs = std::filesystem;

namespace {

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

ExternalEvaluatorSpec shell(const std::string& id, const std::string& script) {
  ExternalEvaluatorSpec s;
  s.id = id;
  s.command = {"sh", "-c", script};
  s.stdout_pattern = R"(ENERGY=\s*(\S+))";
  s.timeout_s = 10.0;
  return s;
}

std::size_t entries(const fs::path& dir) {
  if (!fs::exists(dir)) return 0;
  return static_cast<std::size_t>(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}));
}

}  // namespace

TEST_CASE("render_template substitutes parameters at full precision") {
  const std::map<std::string, double> p{{"epsilon", 0.0103}, {"sigma", 3.4}, {"third", 1.0 / 3.0}};
  CHECK(render_template("pair_coeff * * {{param:epsilon}} {{param:sigma}}", p) == "pair_coeff * * 0.0103 3.3999999999999999");
  CHECK(render_template("x={{param:third}}", p) == "x=0.33333333333333331");
  CHECK(render_template("no placeholders {{other}}", p) == "no placeholders {{other}}");
  CHECK(render_template("{{param:sigma}}{{param:sigma}}", p) == "3.39999999999999993.3999999999999999");
  CHECK(render_template("", p).empty());
  try {
    render_template("{{param:gamma}}", p);
    FAIL("expected a ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("gamma") != std::string::npos);
  }
}

TEST_CASE("parse_result_file takes the first matching key") {
  TempDir tmp("wrapper_parse");
  const fs::path f = tmp.path / "out.txt";
  write(f, "# header\nenergy_total = -3.5\nenergy = -1.25\nenergy = 9\n");
  CHECK(parse_result_file(f, "energy") == -1.25);
  CHECK(parse_result_file(f, "energy_total") == -3.5);
  CHECK_THROWS_AS(parse_result_file(f, "pressure"), ParseError);
  write(f, "energy = lots\n");
  CHECK_THROWS_AS(parse_result_file(f, "energy"), ParseError);
  CHECK_THROWS_AS(parse_result_file(tmp.path / "missing.txt", "energy"), ParseError);
}

TEST_CASE("evaluator spec validation names the field") {
  auto expect_path = [](const ExternalEvaluatorSpec& s, const std::string& path) {
    try {
      s.validate("evaluators[0]");
      FAIL("expected a ValidationError");
    } catch (const ValidationError& e) {
      CHECK(e.path() == path);
    }
  };
  ExternalEvaluatorSpec ok = shell("ok", "true");
  CHECK_NOTHROW(ok.validate());
  auto s = ok;
  s.id = "";
  expect_path(s, "evaluators[0].id");
  s = ok;
  s.id = "bad id";
  expect_path(s, "evaluators[0].id");
  s = ok;
  s.command.clear();
  expect_path(s, "evaluators[0].command");
  s = ok;
  s.stdout_pattern.reset();
  expect_path(s, "evaluators[0].output");
  s = ok;
  s.stdout_pattern = "E=(\\d)(\\d)";
  expect_path(s, "evaluators[0].stdout_pattern");
  s = ok;
  s.timeout_s = 0;
  expect_path(s, "evaluators[0].timeout_s");
  s = ok;
  s.retries = -1;
  expect_path(s, "evaluators[0].retries");
}

TEST_CASE("evaluator spec json round-trip") {
  ExternalEvaluatorSpec s = shell("lmp", "echo ENERGY=1");
  s.template_files = {{"in.tpl", "in.lmp"}};
  s.result_file = ResultFileOutput{"log", "energy"};
  s.retries = 2;
  const auto back = evaluator_from_json(to_json(s));
  CHECK(to_json(back) == to_json(s));
  CHECK_THROWS_AS(evaluator_from_json(nlohmann::json::array()), ValidationError);
}

TEST_CASE("stdout pattern captures the value") {
  TempDir tmp("wrapper_stdout");
  const auto run = run_external(shell("echo", "echo 'ENERGY= -1.25'"), {}, tmp.path);
  CHECK(run.prediction.ok);
  CHECK(run.prediction.value == -1.25);
  CHECK(run.attempts == 1);
  CHECK(run.run_dir.empty());
  CHECK(entries(tmp.path) == 0);
}

TEST_CASE("templates are rendered into the run directory") {
  TempDir tmp("wrapper_tpl");
  write(tmp.path / "tpl" / "input.tpl", "{{param:x}}\n");
  auto spec = shell("cat", "echo ENERGY= $(cat input.txt)");
  spec.template_files = {{"input.tpl", "input.txt"}};
  const auto run = run_external(spec, {{"x", 2.5}}, tmp.path / "scratch", tmp.path / "tpl");
  CHECK(run.prediction.ok);
  CHECK(run.prediction.value == 2.5);
  const auto missing = run_external(spec, {{"y", 1.0}}, tmp.path / "scratch", tmp.path / "tpl");
  CHECK_FALSE(missing.prediction.ok);
  CHECK(missing.prediction.error.find("x") != std::string::npos);
}

TEST_CASE("failing program is reported, retried, and its directory kept") {
  TempDir tmp("wrapper_fail");
  auto spec = shell("broken", "echo nothing useful; exit 3");
  spec.retries = 2;
  const auto run = run_external(spec, {}, tmp.path);
  CHECK_FALSE(run.prediction.ok);
  CHECK(run.attempts == 3);
  CHECK(fs::exists(run.run_dir));
  CHECK(run.prediction.error.find("broken") == 0);
  CHECK(run.prediction.error.find("3 attempts") != std::string::npos);
}

TEST_CASE("missing program is a failed prediction, not an exception") {
  TempDir tmp("wrapper_missing");
  ExternalEvaluatorSpec spec;
  spec.id = "ghost";
  spec.command = {"definitely-not-a-real-program-xyz"};
  spec.stdout_pattern = "E=(\\S+)";
  ExternalRun run;
  CHECK_NOTHROW(run = run_external(spec, {}, tmp.path));
  CHECK_FALSE(run.prediction.ok);
}

TEST_CASE("concurrent runs get distinct run directories") {
  TempDir tmp("wrapper_concurrent");
  auto spec = shell("pwd", "echo ENERGY= 1; pwd > /dev/null; exit 1");
  std::vector<fs::path> dirs(8);
  {
    std::vector<std::jthread> threads;
    for (int i = 0; i < 8; ++i) {
      threads.emplace_back([&, i] { dirs[i] = run_external(spec, {}, tmp.path).run_dir; });
    }
  }
  const std::set<fs::path> unique(dirs.begin(), dirs.end());
  CHECK(unique.size() == 8);
  CHECK(entries(tmp.path) == 8);
}

TEST_CASE("template directory layout") {
  CHECK(template_dir_for("/srv/blast", "lammps") == fs::path("/srv/blast/templates/lammps"));
}
