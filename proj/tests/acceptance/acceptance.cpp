// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <signal.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "blast/error.hpp"
#include "blast/evaluation.hpp"
#include "blast/jobs.hpp"
#include "blast/learn.hpp"
#include "blast/objective.hpp"
#include "blast/parallel.hpp"
#include "blast/potentials.hpp"
#include "blast/properties.hpp"
#include "blast/serialize.hpp"
#include "blast/structure.hpp"
#include "blast/trainset.hpp"
#include "blast/wire.hpp"
#include "blast/wrapper.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace blast;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("blast_acceptance_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ParameterVector lj_params(const ParameterSpace& space, double eps, double sigma, double cutoff) {
  ParameterVector v{std::vector<double>(space.size())};
  v[*space.index_of("epsilon")] = eps;
  v[*space.index_of("sigma")] = sigma;
  v[*space.index_of("cutoff")] = cutoff;
  return v;
}

// Synthetic LJ targets from a known truth.
std::vector<TargetProperty> lj_targets(double eps, double sigma) {
  const auto space = parameter_space("lennard_jones", {"Ar"});
  const auto truth = lj_params(space, eps, sigma, 6.0 * sigma);
  std::map<std::string, RelaxResult> cache;
  PropertyContext ctx;
  ctx.relax_cache = &cache;
  json entries = json::array();
  int k = 0;
  for (double f : {1.0, 1.12, 1.3, 1.6, 2.0}) {
    const auto kind = "dimer_energy(" + format_real(f * sigma) + ")";
    const double v = compute_property(PropertyKind::parse(kind), space, truth, ctx);
    json e{{"id", "dimer_" + std::to_string(k++)}, {"kind", kind}, {"target", v}};
    // At r = sigma the energy is only the cutoff shift; a relative scale
    // there would make one residual dominate everything else.
    if (std::abs(v) < 0.01) e["scale"] = 0.01;
    entries.push_back(e);
  }
  for (const std::string kind : {"lattice_constant(fcc,Ar)", "cohesive_energy(fcc,Ar)"}) {
    entries.push_back({{"id", kind.substr(0, kind.find('('))}, {"kind", kind},
                       {"target", compute_property(PropertyKind::parse(kind), space, truth, ctx)}});
  }
  return parse_targets(entries);
}

// --- 1 -----------------------------------------------------------------------

Outcome lj_round_trip() {
  const double eps = 0.8, sigma = 1.1;
  auto problem = std::make_shared<FitProblem>();
  problem->space = parameter_space("lennard_jones", {"Ar"});
  auto& cut = problem->space.at("cutoff");
  cut.lower = cut.upper = cut.default_low = cut.default_high = 6.0 * sigma;
  problem->data.targets = lj_targets(eps, sigma);

  GaConfig ga;
  ga.population = 64;
  ga.generations = 100;
  ga.seed = 1;
  NelderMeadConfig nm;
  PoolExecutor pool(4);
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = two_stage(problem->space, make_batch_evaluator(problem, pool), ga, single_comparator(), nm, 3);
  const double wall = seconds_since(t0);

  const double e_fit = r.best.params[*problem->space.index_of("epsilon")];
  const double s_fit = r.best.params[*problem->space.index_of("sigma")];
  const double de = std::abs(e_fit / eps - 1.0), ds = std::abs(s_fit / sigma - 1.0);
  Outcome o;
  o.pass = de < 0.01 && ds < 0.01 && r.best.objective < 1e-6 && wall < 120.0;
  o.detail = fmt("epsilon %.6f (%.2e rel) sigma %.6f (%.2e rel) objective %.3e wall %.1f s evals %zu", e_fit, de,
                 s_fit, ds, r.best.objective, wall, r.total_evaluations);
  return o;
}

// --- 2 -----------------------------------------------------------------------

Outcome lj_fcc_oracle() {
  const auto space = parameter_space("lennard_jones", {"Ar"});
  const auto p = lj_params(space, 1.0, 1.0, 6.0);
  const auto br = default_lattice_bracket(space, p, LatticeKind::fcc, "Ar");
  const auto r = relax_lattice(space, p, LatticeKind::fcc, "Ar", br);
  const double nn = r.lattice_constant * nearest_neighbor_ratio(LatticeKind::fcc);
  const double dnn = std::abs(nn / 1.0902 - 1.0), de = std::abs(r.energy_per_atom / -8.610 - 1.0);
  return {dnn <= 0.005 && de <= 0.01,
          fmt("nn distance %.6f sigma (%.3f%%) E_coh %.5f eps (%.3f%%)", nn, 100 * dnn, r.energy_per_atom, 100 * de)};
}

// --- 3 -----------------------------------------------------------------------

struct ForceCheck {
  double max_rel = 0.0;
  double max_net = 0.0;
};

// Random cluster whose pair distances all sit in [r_min, cutoff - 0.1] or
// beyond cutoff + 0.1.
Structure random_cluster(std::mt19937_64& rng, const std::string& species, int n, double r_min, double cutoff) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double box = 0.55 * cutoff * std::cbrt(static_cast<double>(n));
  for (;;) {
    Structure s;
    s.label = "cluster";
    for (int k = 0; k < n && static_cast<int>(s.size()) < n;) {
      const Vec3 x{box * u(rng), box * u(rng), box * u(rng)};
      bool ok = true;
      for (const auto& y : s.positions) {
        const double d = norm(x - y);
        if (d < r_min || std::abs(d - cutoff) < 0.1) ok = false;
      }
      if (++k > 100000) break;
      if (!ok) continue;
      s.positions.push_back(x);
      s.species.push_back(species);
    }
    if (static_cast<int>(s.size()) == n) return s;
  }
}

void check_forces(const ParameterSpace& space, const ParameterVector& p, const Structure& s, ForceCheck& out) {
  const auto f = forces(space, p, s);
  const double h = 1e-5;
  double fmax = 0.0, dmax = 0.0;
  Vec3 net{};
  for (std::size_t i = 0; i < s.size(); ++i) {
    net = net + f[i];
    for (int c = 0; c < 3; ++c) {
      Structure a = s, b = s;
      a.positions[i][c] += h;
      b.positions[i][c] -= h;
      const double fd = -(energy(space, p, a) - energy(space, p, b)) / (2 * h);
      fmax = std::max(fmax, std::abs(f[i][c]));
      dmax = std::max(dmax, std::abs(f[i][c] - fd));
    }
  }
  out.max_rel = std::max(out.max_rel, dmax / std::max(fmax, 1e-300));
  for (int c = 0; c < 3; ++c) out.max_net = std::max(out.max_net, std::abs(net[c]));
}

Outcome force_correctness() {
  std::mt19937_64 rng(20240611);
  ForceCheck lj, sw;
  {
    const auto space = parameter_space("lennard_jones", {"Ar"});
    const auto p = lj_params(space, 0.0103, 3.4, 8.5);
    for (int k = 0; k < 20; ++k) check_forces(space, p, random_cluster(rng, "Ar", 8 + k % 9, 3.0, 8.5), lj);
  }
  {
    const auto space = parameter_space("stillinger_weber", {"Si"});
    ParameterVector p{std::vector<double>(space.size())};
    const std::map<std::string, double> si{{"epsilon", 2.1683}, {"sigma", 2.0951}, {"a", 1.8},
                                           {"lambda", 21.0},    {"gamma", 1.2},    {"cos_theta0", -1.0 / 3.0},
                                           {"A", 7.049556277},  {"B", 0.6022245584}, {"p", 4.0},
                                           {"q", 0.0}};
    for (const auto& [k, v] : si) p[*space.index_of(k)] = v;
    for (int k = 0; k < 20; ++k) check_forces(space, p, random_cluster(rng, "Si", 6 + k % 7, 2.0, 1.8 * 2.0951), sw);
  }
  const double rel = std::max(lj.max_rel, sw.max_rel), net = std::max(lj.max_net, sw.max_net);
  return {rel < 1e-6 && net < 1e-10,
          fmt("max rel error LJ %.2e SW %.2e; max |net force| %.2e eV/A", lj.max_rel, sw.max_rel, net)};
}

// --- 4 -----------------------------------------------------------------------

ParameterSpace box_space(std::size_t n, double lo, double hi) {
  ParameterSpace s;
  s.model_id = "test";
  for (std::size_t i = 0; i < n; ++i) s.specs.push_back({"x" + std::to_string(i), "1", lo, hi, lo, hi});
  return s;
}

BatchEvaluator scalar_evaluator(std::function<double(const ParameterVector&)> f) {
  return [f](std::span<const ParameterVector> batch) {
    std::vector<Candidate> out;
    for (const auto& v : batch) {
      const double y = f(v);
      out.push_back(Candidate{v, {}, y, {{1, y}}, true});
    }
    return out;
  };
}

Outcome optimizer_golden_runs() {
  const auto rosen = [](const ParameterVector& v) {
    return 100 * std::pow(v[1] - v[0] * v[0], 2) + std::pow(1 - v[0], 2);
  };
  const auto nm = nelder_mead(box_space(2, -5, 5), scalar_evaluator(rosen), ParameterVector{{-1.2, 1.0}}, {});
  const double nm_dist = std::hypot(nm.best.params[0] - 1, nm.best.params[1] - 1);
  const bool nm_ok = nm_dist < 1e-4 && nm.history.size() <= 500;

  GaConfig ga;
  ga.population = 32;
  ga.generations = 50;
  ga.seed = 1;
  const auto sphere = [](const ParameterVector& v) { return v[0] * v[0] + v[1] * v[1] + v[2] * v[2]; };
  const auto g = run_ga(box_space(3, -5, 5), scalar_evaluator(sphere), ga, single_comparator());
  const bool ga_ok = g.best.objective < 0.1;

  BatchEvaluator two = [](std::span<const ParameterVector> batch) {
    std::vector<Candidate> out;
    for (const auto& v : batch) {
      const double f1 = v[0] * v[0], f2 = (v[0] - 2) * (v[0] - 2);
      out.push_back(Candidate{v, {}, f1 + f2, {{1, f1}, {2, f2}}, true});
    }
    return out;
  };
  GaConfig nc;
  nc.population = 40;
  nc.generations = 60;
  nc.seed = 1;
  const auto front = nsga2(box_space(1, -10, 10), two, nc);
  bool nondominated = !front.empty();
  double xmin = 1e300, xmax = -1e300;
  for (const auto& a : front) {
    xmin = std::min(xmin, a.params[0]);
    xmax = std::max(xmax, a.params[0]);
    for (const auto& b : front) nondominated = nondominated && !dominates(a.level_objectives, b.level_objectives);
  }
  const bool ns_ok = nondominated && xmin >= -0.05 && xmax <= 2.05;
  return {nm_ok && ga_ok && ns_ok,
          fmt("NM dist %.2e in %zu iters; GA sphere %.3e; nsga2 front %zu pts x in [%.4f, %.4f]%s", nm_dist,
              nm.history.size(), g.best.objective, front.size(), xmin, xmax, nondominated ? "" : " DOMINATED")};
}

// --- 5 -----------------------------------------------------------------------

Outcome dominance_and_hoga() {
  std::mt19937_64 rng(5);
  int front_mismatch = 0;
  for (int t = 0; t < 200; ++t) {
    const int n = std::uniform_int_distribution<int>(1, 64)(rng);
    const int m = std::uniform_int_distribution<int>(2, 4)(rng);
    const bool coarse = t % 2 == 0;  // integer grid provokes ties
    std::vector<std::vector<double>> pts(n, std::vector<double>(m));
    for (auto& p : pts) {
      for (auto& x : p) x = coarse ? std::uniform_int_distribution<int>(0, 4)(rng) : std::uniform_real_distribution<double>(0, 1)(rng);
    }
    std::set<std::size_t> brute;
    for (int i = 0; i < n; ++i) {
      bool dominated = false;
      for (int j = 0; j < n && !dominated; ++j) dominated = j != i && dominates(pts[j], pts[i]);
      if (!dominated) brute.insert(i);
    }
    const auto fronts = non_dominated_sort(pts);
    const std::set<std::size_t> got(fronts.at(0).begin(), fronts.at(0).end());
    if (got != brute) ++front_mismatch;
  }

  const std::map<int, double> tol{{1, 0.01}, {2, 0.05}, {3, 0.2}};
  const auto cmp = hierarchical_comparator(tol);
  auto random_candidate = [&] {
    Candidate c;
    std::uniform_real_distribution<double> u(0.0, 0.1);
    for (int r = 1; r <= 3; ++r) c.level_objectives[r] = u(rng) * r;
    c.feasible = std::uniform_int_distribution<int>(0, 9)(rng) != 0;
    c.objective = 0;
    for (const auto& [r, v] : c.level_objectives) c.objective += v;
    if (!c.feasible) c.objective = INFINITY;
    return c;
  };
  int intransitive = 0;
  for (int t = 0; t < 10000; ++t) {
    const Candidate c[3] = {random_candidate(), random_candidate(), random_candidate()};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        for (int k = 0; k < 3; ++k) {
          const auto ij = cmp(c[i], c[j]), jk = cmp(c[j], c[k]), ik = cmp(c[i], c[k]);
          if (ij <= 0 && jk <= 0 && !(ik <= 0)) ++intransitive;
          if (ij < 0 && jk < 0 && !(ik < 0)) ++intransitive;
          if (ij == 0 && jk == 0 && !(ik == 0)) ++intransitive;
        }
      }
    }
  }
  return {front_mismatch == 0 && intransitive == 0,
          fmt("front mismatches %d/200; intransitive triples %d/10000", front_mismatch, intransitive)};
}

// --- 6 -----------------------------------------------------------------------

json task_value(const json& p) {
  const auto i = p.at("i").get<int>();
  double acc = 0.0;
  for (int k = 1; k <= 200; ++k) acc += std::sin(i * 0.37 + k) / k;
  return {{"i", i}, {"acc", acc}, {"tag", "t" + std::to_string(i % 7)}};
}

std::string dump_all(const std::vector<TaskResult>& rs) {
  json a = json::array();
  for (const auto& r : rs) a.push_back({{"ok", r.ok}, {"value", r.value}, {"error", r.error}});
  return a.dump();
}

Outcome parallel_fabric() {
  std::vector<json> payloads;
  for (int i = 0; i < 1000; ++i) payloads.push_back({{"i", i}});
  const TaskFn fn = [](const json& p) -> json {
    if (p.at("i").get<int>() % 97 == 13) throw std::runtime_error("deliberate failure");
    return task_value(p);
  };

  SerialExecutor serial;
  const std::string want = dump_all(pmap(payloads, fn, serial));
  PoolExecutor pool(4);
  const bool pool_ok = dump_all(pmap(payloads, fn, pool)) == want;

  bool broker_ok = false;
  {
    BrokerExecutor exec(":0");
    const std::string addr = "127.0.0.1:" + std::to_string(exec.broker().port());
    std::vector<std::jthread> workers;
    for (int w = 0; w < 4; ++w) {
      workers.emplace_back([&, w](std::stop_token st) {
        WorkerOptions o;
        o.worker_id = "w" + std::to_string(w);
        o.backoff_base = std::chrono::milliseconds(20);
        worker_run(addr, fn, o, st);
      });
    }
    broker_ok = dump_all(pmap(payloads, fn, exec)) == want;
    exec.broker().shutdown();
  }

  // Kill trials: one worker dies abruptly mid-batch.
  std::mt19937_64 rng(6);
  int lost_or_dup = 0, trials_with_reassign = 0;
  std::vector<json> small(payloads.begin(), payloads.begin() + 60);
  const TaskFn slow = [](const json& p) -> json {
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    return task_value(p);
  };
  std::vector<TaskResult> expect;
  for (const auto& p : small) expect.push_back(run_task(slow, p));
  const std::string expect_s = dump_all(expect);
  for (int t = 0; t < 50; ++t) {
    BrokerOptions bo;
    bo.heartbeat_interval = std::chrono::milliseconds(40);
    bo.missed_heartbeats = 3;
    bo.no_worker_timeout = std::chrono::milliseconds(20000);
    Broker broker(":0", bo);
    const std::string addr = "127.0.0.1:" + std::to_string(broker.port());
    std::vector<std::jthread> workers;
    for (int w = 0; w < 4; ++w) {
      workers.emplace_back([&, w](std::stop_token st) {
        WorkerOptions o;
        o.worker_id = "k" + std::to_string(w);
        o.heartbeat_interval = std::chrono::milliseconds(40);
        o.backoff_base = std::chrono::milliseconds(20);
        o.max_connect_attempts = 200;
        worker_run(addr, slow, o, st);
      });
    }
    const int victim = std::uniform_int_distribution<int>(0, 3)(rng);
    const auto delay = std::chrono::microseconds(std::uniform_int_distribution<int>(0, 20000)(rng));  // batch lasts ~30 ms
    std::jthread killer([&] {
      std::this_thread::sleep_for(delay);
      workers[victim].request_stop();
    });
    const auto got = broker.run_batch(small);
    killer.join();
    if (dump_all(got) != expect_s || broker.stats().results_recorded != small.size()) ++lost_or_dup;
    if (broker.stats().reassignments > 0) ++trials_with_reassign;
    broker.shutdown();
  }

  int codec_bad = 0;
  const json msgs[] = {wire::hello("w-1"), wire::task(7, {{"x", {1.5, -2.25e-300, "å"}}}),
                       wire::result_ok(7, {{"v", 0.1}}), wire::result_error(8, "boom"),
                       wire::ping("w-1"),  wire::pong("w-1"), wire::fin()};
  for (const auto& m : msgs) {
    const auto back = wire::frame_decode(wire::frame_encode(m));
    if (back != m || wire::validate_message(back) != wire::validate_message(m)) ++codec_bad;
  }
  return {pool_ok && broker_ok && lost_or_dup == 0 && codec_bad == 0,
          fmt("pool(4) %s; broker+4 %s; kill trials bad %d/50 (%d reassigned); codec mismatches %d",
              pool_ok ? "equal" : "DIFFERS", broker_ok ? "equal" : "DIFFERS", lost_or_dup, trials_with_reassign,
              codec_bad)};
}

// --- 7 -----------------------------------------------------------------------

json small_job(const std::string& name, int generations, int population) {
  json targets = json::array();
  for (const auto& t : lj_targets(0.8, 1.1)) {
    if (t.kind.type == PropertyType::dimer_energy) targets.push_back({{"id", t.id}, {"kind", t.kind.to_string()}, {"target", t.target}});
  }
  return {{"name", name},
          {"model", {{"id", "lennard_jones"}, {"species", {"Ar"}}, {"parameters", {{"cutoff", {{"fixed", 6.6}}}}}}},
          {"data", {{"targets", targets}}},
          {"learner", {{"strategy", "ga"}, {"population", population}, {"generations", generations}}},
          {"parallel", {{"executor", "serial"}}},
          {"seed", 3}};
}

bool legal_history(const JobRecord& r) {
  if (r.transitions.empty() || r.transitions.front().status != JobStatus::created) return false;
  for (std::size_t i = 1; i < r.transitions.size(); ++i) {
    if (!legal_transition(r.transitions[i - 1].status, r.transitions[i].status)) return false;
  }
  return r.transitions.back().status == r.status;
}

Outcome job_lifecycle() {
  const fs::path home = fresh_dir("jobs");
  std::string hooked_job;
  std::atomic<bool> fired{false};
  JobServiceOptions opts;
  opts.generation_hook = [&](const std::string& id, int iteration) {
    if (id != hooked_job || iteration != 10 || fired.exchange(true)) return false;
    return true;
  };
  bool equal = false;
  std::string detail;
  {
    JobService svc(home, opts);
    const auto a = svc.submit(small_job("straight", 25, 16));
    svc.start(a);
    const auto ra = svc.wait(a);
    hooked_job = svc.submit(small_job("interrupted", 25, 16));
    svc.start(hooked_job);
    const auto mid = svc.wait(hooked_job);
    const int stopped_at = mid.progress ? mid.progress->value("iteration", -1) : -1;
    svc.restart(hooked_job);
    const auto rb = svc.wait(hooked_job);
    if (ra.status == JobStatus::completed && rb.status == JobStatus::completed) {
      const auto ba = svc.result(a).at("best"), bb = svc.result(hooked_job).at("best");
      equal = ba.at("parameters") == bb.at("parameters") && ba.at("objective") == bb.at("objective");
      detail = fmt("interrupted at generation %d (%s), resumed best %s", stopped_at, std::string(to_string(mid.status)).c_str(),
                   equal ? "identical" : "DIFFERS");
    } else {
      detail = "runs did not complete: " + ra.error + " " + rb.error;
    }
  }

  // Fuzz: random actions on a handful of jobs; every persisted record must
  // show only legal transitions.
  const fs::path fhome = fresh_dir("fuzz");
  std::mt19937_64 rng(7);
  int illegal_persisted = 0, rejected = 0, actions = 0;
  {
    JobService svc(fhome);
    std::vector<std::string> ids;
    for (; actions < 1000; ++actions) {
      const int what = std::uniform_int_distribution<int>(0, ids.size() < 6 ? 5 : 4)(rng);
      if (ids.empty() || what == 5) {
        ids.push_back(svc.submit(small_job("fuzz", std::uniform_int_distribution<int>(1, 4)(rng), 4)));
        continue;
      }
      const auto& id = ids[std::uniform_int_distribution<std::size_t>(0, ids.size() - 1)(rng)];
      try {
        switch (what) {
          case 0: svc.start(id); break;
          case 1: svc.cancel(id); break;
          case 2: svc.restart(id); break;
          case 3: svc.get(id); break;
          default: svc.wait(id); break;
        }
      } catch (const IllegalTransition&) {
        ++rejected;
      }
      std::ifstream in(svc.get(id).dir / "record.json");
      if (!legal_history(job_record_from_json(json::parse(in)))) ++illegal_persisted;
    }
    for (const auto& id : ids) {
      const auto r = svc.wait(id);
      std::ifstream in(r.dir / "record.json");
      if (!legal_history(job_record_from_json(json::parse(in)))) ++illegal_persisted;
    }
  }
  std::error_code ec;
  fs::remove_all(home, ec);
  fs::remove_all(fhome, ec);
  return {equal && illegal_persisted == 0,
          detail + fmt("; fuzz %d actions, %d rejected, %d illegal persisted", actions, rejected, illegal_persisted)};
}

// --- 8 -----------------------------------------------------------------------

// Zombies count as dead: an orphan may wait for a reaper that never comes.
bool alive(pid_t pid) {
  std::ifstream in("/proc/" + std::to_string(pid) + "/stat");
  std::string line;
  if (!std::getline(in, line)) return false;
  const auto close = line.rfind(')');
  return close != std::string::npos && close + 2 < line.size() && line[close + 2] != 'Z';
}

Outcome wrapper_stub() {
  const fs::path root = fresh_dir("wrapper");
  const fs::path tpl = root / "templates";
  const fs::path scratch = root / "scratch";
  fs::create_directories(tpl);
  auto write = [](const fs::path& p, const std::string& text) { std::ofstream(p) << text; };
  const std::map<std::string, double> params{{"epsilon", 0.8}, {"sigma", 1.1}};
  std::vector<std::string> fails;

  write(tpl / "stdout.sh", "echo 'step 1'\necho \"final energy: $(cat value.txt) eV\"\n");
  write(tpl / "value.in", "{{param:epsilon}}");
  ExternalEvaluatorSpec s;
  s.id = "stdout";
  s.command = {"sh", "run.sh"};
  s.template_files = {{"stdout.sh", "run.sh"}, {"value.in", "value.txt"}};
  s.stdout_pattern = R"(final energy:\s*(\S+))";
  auto r = run_external(s, params, scratch, tpl);
  if (!r.prediction.ok || r.prediction.value != 0.8 || r.attempts != 1) fails.push_back("stdout");

  write(tpl / "file.sh", "printf 'note = x\\nenergy = -1.25e-1\\nenergy = 9\\n' > out.dat\n");
  s.id = "file";
  s.template_files = {{"file.sh", "run.sh"}};
  s.stdout_pattern.reset();
  s.result_file = ResultFileOutput{"out.dat", "energy"};
  r = run_external(s, params, scratch, tpl);
  if (!r.prediction.ok || r.prediction.value != -0.125) fails.push_back("result_file");

  const fs::path counter = root / "count";
  write(tpl / "flaky.sh", "n=$(cat " + counter.string() + " 2>/dev/null || echo 0)\nn=$((n+1))\necho $n > " +
                              counter.string() + "\n[ $n -ge 2 ] || exit 3\necho 'energy = 4.5' > out.dat\n");
  s.id = "flaky";
  s.template_files = {{"flaky.sh", "run.sh"}};
  s.retries = 2;
  r = run_external(s, params, scratch, tpl);
  if (!r.prediction.ok || r.prediction.value != 4.5 || r.attempts != 2) fails.push_back("retry");

  write(tpl / "fail.sh", "exit 1\n");
  s.id = "fail";
  s.template_files = {{"fail.sh", "run.sh"}};
  s.retries = 1;
  r = run_external(s, params, scratch, tpl);
  if (r.prediction.ok || r.attempts != 2 || r.run_dir.empty() || !fs::exists(r.run_dir / "stderr.txt") ||
      r.prediction.error.find("exit status 1") == std::string::npos) {
    fails.push_back("exhausted retries");
  }

  const fs::path pidfile = root / "child.pid";
  write(tpl / "hang.sh", "sleep 30 &\necho $! > " + pidfile.string() + "\nwait\n");
  s.id = "hang";
  s.template_files = {{"hang.sh", "run.sh"}};
  s.retries = 0;
  s.timeout_s = 0.5;
  const auto t0 = std::chrono::steady_clock::now();
  r = run_external(s, params, scratch, tpl);
  const double took = seconds_since(t0);
  pid_t child = 0;
  std::ifstream(pidfile) >> child;
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  if (r.prediction.ok || r.prediction.error.find("timed out") == std::string::npos || took > 5.0 || child <= 0 ||
      alive(child)) {
    fails.push_back("timeout");
  }

  std::error_code ec;
  fs::remove_all(root, ec);
  std::string detail = "stdout, result file, retry, timeout (" + fmt("%.2f s", took) + ")";
  if (!fails.empty()) {
    detail = "failed:";
    for (const auto& f : fails) detail += " " + f;
  }
  return {fails.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"LJ round-trip refit", lj_round_trip},
      {"LJ fcc physics oracle", lj_fcc_oracle},
      {"force correctness", force_correctness},
      {"optimizer golden runs", optimizer_golden_runs},
      {"dominance and HOGA oracles", dominance_and_hoga},
      {"parallel fabric", parallel_fabric},
      {"job lifecycle", job_lifecycle},
      {"external wrapper", wrapper_stub},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int n = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(n)) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %d [%s] %s: %s (%.1f s)\n", n, o.pass ? "PASS" : "FAIL", criteria[k].first,
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
