#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "helpers.hpp"

#include "blast/error.hpp"
#include "blast/learn.hpp"
#include "blast/serialize.hpp"

using namespace blast;
using namespace blast::testing;
using nlohmann::json;

namespace {

double sphere(const ParameterVector& v) {
  double s = 0;
  for (double x : v.values) s += x * x;
  return s;
}

double rosenbrock(const ParameterVector& v) {
  return 100 * std::pow(v[1] - v[0] * v[0], 2) + std::pow(1 - v[0], 2);
}

BatchEvaluator two_objectives() {
  return [](std::span<const ParameterVector> batch) {
    std::vector<Candidate> out;
    for (const auto& v : batch) {
      const double f1 = v[0] * v[0], f2 = (v[0] - 2) * (v[0] - 2);
      out.push_back(Candidate{v, {}, f1 + f2, {{1, f1}, {2, f2}}, true});
    }
    return out;
  };
}

GaConfig ga_config(int pop, int gens, std::uint64_t seed) {
  GaConfig c;
  c.population = pop;
  c.generations = gens;
  c.seed = seed;
  return c;
}

Candidate scored(const ParameterVector& v, double y) { return Candidate{v, {}, y, {{1, y}}, true}; }

}  // namespace

TEST_CASE("random search") {
  const auto space = box_space(3, -5, 5);
  std::size_t calls = 0;
  const auto one = random_search(space, scalar_evaluator(sphere, &calls), 1, 4);
  CHECK(calls == 1);
  CHECK(one.total_evaluations == 1);
  CHECK(one.best.objective == sphere(one.best.params));

  const auto a = random_search(space, scalar_evaluator(sphere), 1000, 1);
  const auto b = random_search(space, scalar_evaluator(sphere), 1000, 1);
  CHECK(json(a).dump() == json(b).dump());
  CHECK(a.best.objective < 1.0);
}

TEST_CASE("ga_step operators") {
  const auto space = box_space(2, -1, 1);
  GaConfig cfg = ga_config(6, 1, 1);
  cfg.mutation_rate = 0.0;
  cfg.elitism = 0;
  std::vector<Candidate> same(6, scored(ParameterVector{{0.25, -0.5}}, 1.0));
  std::mt19937_64 rng(1);
  const auto off = ga_step(space, same, single_comparator(), cfg, rng);
  CHECK(off.elites.empty());
  REQUIRE(off.children.size() == 6);
  for (const auto& c : off.children) CHECK(c == ParameterVector{{0.25, -0.5}});

  cfg.elitism = 2;
  cfg.mutation_rate = 1.0;
  cfg.mutation_sigma_fraction = 5.0;
  std::vector<Candidate> pop;
  for (int i = 0; i < 6; ++i) pop.push_back(scored(ParameterVector{{0.1 * i, -0.1 * i}}, 6.0 - i));
  const auto next = ga_step(space, pop, single_comparator(), cfg, rng);
  REQUIRE(next.elites.size() == 2);
  CHECK(next.elites[0].params == pop[5].params);
  CHECK(next.elites[1].params == pop[4].params);
  CHECK(next.children.size() == 4);
  for (const auto& c : next.children) CHECK(validate_params(space, c).empty());
}

TEST_CASE("GA golden run and monotone history") {
  const auto space = box_space(3, -5, 5);
  const auto r = run_ga(space, scalar_evaluator(sphere), ga_config(32, 50, 1), single_comparator());
  CHECK(r.best.objective < 0.1);
  CHECK(r.history.size() == 50);
  for (std::size_t i = 1; i < r.history.size(); ++i) {
    CHECK(r.history[i].best_objective <= r.history[i - 1].best_objective);
    CHECK(r.history[i].iteration > r.history[i - 1].iteration);
  }
}

TEST_CASE("HOGA with a single rank matches plain GA") {
  const auto space = box_space(3, -5, 5);
  const auto plain = run_ga(space, scalar_evaluator(sphere), ga_config(16, 20, 5), single_comparator());
  const auto hoga = run_ga(space, scalar_evaluator(sphere), ga_config(16, 20, 5), hierarchical_comparator({{1, 1e-12}}));
  CHECK(json(plain.best).dump() == json(hoga.best).dump());
  CHECK(json(plain.history).dump() == json(hoga.history).dump());
}

TEST_CASE("HOGA history is monotone under the hierarchical order") {
  const auto space = box_space(2, -3, 3);
  BatchEvaluator eval = [](std::span<const ParameterVector> batch) {
    std::vector<Candidate> out;
    for (const auto& v : batch) {
      const double a = v[0] * v[0], b = (v[1] - 1) * (v[1] - 1);
      out.push_back(Candidate{v, {}, a + b, {{1, a}, {2, b}}, true});
    }
    return out;
  };
  const std::map<int, double> tol{{1, 0.05}, {2, 0.01}};
  const auto cmp = hierarchical_comparator(tol);
  auto learner = make_ga(space, eval, ga_config(16, 30, 2), cmp);
  std::optional<Candidate> prev;
  while (!learner->done()) {
    learner->step();
    const auto& best = learner->result().best;
    if (prev) CHECK(cmp(best, *prev) <= 0);
    prev = best;
  }
}

TEST_CASE("non-dominated sorting and crowding") {
  const std::vector<std::vector<double>> pts{{1, 4}, {2, 2}, {4, 1}, {3, 3}};
  const auto fronts = non_dominated_sort(pts);
  REQUIRE(fronts.size() == 2);
  CHECK(std::set<std::size_t>(fronts[0].begin(), fronts[0].end()) == std::set<std::size_t>{0, 1, 2});
  CHECK(fronts[1] == std::vector<std::size_t>{3});
  const auto cd = crowding_distance(pts, fronts[0]);
  CHECK(std::isinf(cd[0]));
  CHECK(std::isinf(cd[2]));
  CHECK(std::isfinite(cd[1]));
  CHECK(std::isinf(objective_vector(Candidate{{}, {}, 0, {{1, 0}, {2, 0}}, false})[0]));
}

TEST_CASE("nsga2") {
  const auto front = nsga2(box_space(1, -5, 5), two_objectives(), ga_config(40, 60, 1));
  REQUIRE(!front.empty());
  for (const auto& a : front) {
    CHECK(a.params[0] >= -0.05);
    CHECK(a.params[0] <= 2.05);
    for (const auto& b : front) CHECK(!dominates(a.level_objectives, b.level_objectives));
  }
  CHECK_THROWS_AS(nsga2(box_space(1, -5, 5), scalar_evaluator(sphere), ga_config(8, 2, 1)), ValidationError);
}

TEST_CASE("Nelder-Mead") {
  const auto space = box_space(3, -10, 10);
  const ParameterVector c{{1.5, -2.0, 3.25}};
  auto quad = [c](const ParameterVector& v) {
    double s = 0;
    for (std::size_t i = 0; i < v.size(); ++i) s += (v[i] - c[i]) * (v[i] - c[i]);
    return s;
  };
  const auto q = nelder_mead(space, scalar_evaluator(quad), ParameterVector{{-7, 7, 0}}, {});
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(q.best.params[i] - c[i]) < 1e-6);

  const auto r = nelder_mead(box_space(2, -5, 5), scalar_evaluator(rosenbrock), ParameterVector{{-1.2, 1.0}}, {});
  CHECK(std::hypot(r.best.params[0] - 1, r.best.params[1] - 1) < 1e-4);
  CHECK(r.history.size() <= 500);

  // Minimum outside the box: every evaluated point stays inside.
  const auto box = box_space(2, 0, 1);
  bool inside = true;
  BatchEvaluator watch = [&](std::span<const ParameterVector> batch) {
    std::vector<Candidate> out;
    for (const auto& v : batch) {
      inside = inside && validate_params(box, v).empty();
      out.push_back(scored(v, (v[0] + 3) * (v[0] + 3) + (v[1] - 4) * (v[1] - 4)));
    }
    return out;
  };
  const auto b = nelder_mead(box, watch, ParameterVector{{0.0, 1.0}}, {});
  CHECK(inside);
  CHECK(b.best.params[0] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(b.best.params[1] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_THROWS_AS(nelder_mead(box, watch, ParameterVector{{2.0, 1.0}}, {}), ValidationError);
}

TEST_CASE("two-stage refinement") {
  const auto space = box_space(2, -5, 5);
  const auto ga = ga_config(16, 10, 3);
  const auto global = run_ga(space, scalar_evaluator(rosenbrock), ga, single_comparator());
  const auto both = two_stage(space, scalar_evaluator(rosenbrock), ga, single_comparator(), {}, 3);
  CHECK(both.best.objective <= global.best.objective);
  CHECK(both.history.size() > global.history.size());
  CHECK(both.history.front().stage == "global");
  CHECK(both.history.back().stage == "local");

  const auto k1 = two_stage(space, scalar_evaluator(rosenbrock), ga, single_comparator(), {}, 1);
  const auto nm = nelder_mead(space, scalar_evaluator(rosenbrock), global.best.params, {});
  CHECK(k1.best.params == nm.best.params);
  CHECK(k1.total_evaluations == global.total_evaluations + nm.total_evaluations);
  CHECK_THROWS_AS(two_stage(space, scalar_evaluator(rosenbrock), ga, single_comparator(), {}, 0), ValidationError);
}

TEST_CASE("config validation names the field") {
  auto path_of = [](GaConfig c) {
    try {
      c.validate();
    } catch (const ValidationError& e) {
      return e.path();
    }
    return std::string();
  };
  GaConfig c;
  c.population = 3;
  CHECK(path_of(c) == "learner.population");
  c = {};
  c.tournament_size = 1;
  CHECK(path_of(c) == "learner.tournament_size");
  c = {};
  c.elitism = c.population;
  CHECK(path_of(c) == "learner.elitism");
  c = {};
  c.generations = 0;
  CHECK(path_of(c) == "learner.generations");
  CHECK(path_of(GaConfig{}).empty());
}

namespace {

struct Counting {
  std::size_t calls = 0;
  bool in_bounds = true;
  ParameterSpace space;
};

BatchEvaluator counting(Counting& c, std::function<double(const ParameterVector&)> f) {
  return [&c, f](std::span<const ParameterVector> batch) {
    std::vector<Candidate> out;
    for (const auto& v : batch) {
      ++c.calls;
      c.in_bounds = c.in_bounds && validate_params(c.space, v).empty();
      out.push_back(scored(v, f(v)));
    }
    return out;
  };
}

using Factory = std::function<std::unique_ptr<Learner>(BatchEvaluator)>;

std::vector<std::pair<std::string, Factory>> factories(const ParameterSpace& space) {
  return {
      {"random", [&](BatchEvaluator e) { return make_random_search(space, e, 150, 3, 32); }},
      {"ga", [&](BatchEvaluator e) { return make_ga(space, e, ga_config(12, 15, 4), single_comparator()); }},
      {"hoga", [&](BatchEvaluator e) { return make_ga(space, e, ga_config(12, 15, 4), hierarchical_comparator({{1, 1e-3}})); }},
      {"nelder_mead", [&](BatchEvaluator e) { return make_nelder_mead(space, e, ParameterVector{{2.0, -2.0}}, {}); }},
      {"two_stage", [&](BatchEvaluator e) { return make_two_stage(space, e, ga_config(12, 6, 4), single_comparator(), {}, 2); }},
  };
}

}  // namespace

TEST_CASE("learners are deterministic, count evaluations and stay in bounds") {
  const auto space = box_space(2, -5, 5);
  for (const auto& [name, make] : factories(space)) {
    CAPTURE(name);
    Counting c1{0, true, space}, c2{0, true, space};
    auto a = make(counting(c1, rosenbrock));
    auto b = make(counting(c2, rosenbrock));
    const auto ra = run_to_completion(*a);
    const auto rb = run_to_completion(*b);
    CHECK(json(ra).dump() == json(rb).dump());
    CHECK(ra.total_evaluations == c1.calls);
    CHECK(c1.in_bounds);
  }
}

TEST_CASE("checkpoint round-trip resumes identically") {
  const auto space = box_space(2, -5, 5);
  for (const auto& [name, make] : factories(space)) {
    CAPTURE(name);
    auto straight = make(scalar_evaluator(rosenbrock));
    const auto want = json(run_to_completion(*straight)).dump();
    for (int cut : {1, 3, 7}) {
      auto first = make(scalar_evaluator(rosenbrock));
      for (int i = 0; i < cut && !first->done(); ++i) first->step();
      const std::string saved = first->save_state().dump();
      auto second = make(scalar_evaluator(rosenbrock));
      second->restore_state(json::parse(saved));
      CHECK(second->save_state().dump() == saved);
      CHECK(json(run_to_completion(*second)).dump() == want);
    }
  }
  auto ns = [&] { return make_nsga2(box_space(1, -5, 5), two_objectives(), ga_config(12, 8, 2)); };
  auto straight = ns();
  const auto want = json(run_to_completion(*straight)).dump();
  auto first = ns();
  for (int i = 0; i < 4; ++i) first->step();
  auto second = ns();
  second->restore_state(json::parse(first->save_state().dump()));
  CHECK(json(run_to_completion(*second)).dump() == want);
}
