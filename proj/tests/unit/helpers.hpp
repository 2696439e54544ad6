#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "json.hpp"

#include "blast/objective.hpp"
#include "blast/learn.hpp"
#include "blast/potentials.hpp"
#include "blast/structure.hpp"

namespace blast::testing {

inline ParameterVector lj(const ParameterSpace& space, double eps, double sigma, double cutoff) {
  ParameterVector v{std::vector<double>(space.size())};
  v[*space.index_of("epsilon")] = eps;
  v[*space.index_of("sigma")] = sigma;
  v[*space.index_of("cutoff")] = cutoff;
  return v;
}

inline ParameterVector silicon_sw(const ParameterSpace& space) {
  ParameterVector p{std::vector<double>(space.size())};
  const std::pair<const char*, double> si[] = {{"epsilon", 2.1683}, {"sigma", 2.0951}, {"a", 1.8},
                                               {"lambda", 21.0},    {"gamma", 1.2},    {"cos_theta0", -1.0 / 3.0},
                                               {"A", 7.049556277},  {"B", 0.6022245584}, {"p", 4.0},
                                               {"q", 0.0}};
  for (const auto& [k, v] : si) p[*space.index_of(k)] = v;
  return p;
}

// n atoms in a box, no pair closer than r_min.
inline Structure random_cluster(std::mt19937_64& rng, const std::string& species, int n, double box, double r_min) {
  std::uniform_real_distribution<double> u(0.0, box);
  Structure s;
  s.label = "cluster";
  while (static_cast<int>(s.size()) < n) {
    const Vec3 x{u(rng), u(rng), u(rng)};
    bool ok = true;
    for (const auto& y : s.positions) ok = ok && norm(x - y) >= r_min;
    if (!ok) continue;
    s.positions.push_back(x);
    s.species.push_back(species);
  }
  return s;
}

inline ParameterSpace box_space(std::size_t n, double lo, double hi) {
  ParameterSpace s;
  s.model_id = "test";
  for (std::size_t i = 0; i < n; ++i) s.specs.push_back({"x" + std::to_string(i), "1", lo, hi, lo, hi});
  return s;
}

template <class F>
BatchEvaluator scalar_evaluator(F f, std::size_t* calls = nullptr) {
  return [f, calls](std::span<const ParameterVector> batch) {
    std::vector<Candidate> out;
    for (const auto& v : batch) {
      if (calls) ++*calls;
      const double y = f(v);
      out.push_back(Candidate{v, {}, y, {{1, y}}, true});
    }
    return out;
  };
}

// Lennard-Jones dimer energy for epsilon 0.8, sigma 1.1, shifted at 6.6.
inline double lj_shifted(double r) {
  auto v = [](double x) {
    const double s6 = std::pow(1.1 / x, 6);
    return 4 * 0.8 * (s6 * s6 - s6);
  };
  return v(r) - v(6.6);
}

// Small GA job fitting epsilon and sigma to four dimer energies.
inline nlohmann::json lj_job_doc(const std::string& name, int generations, int population = 8) {
  nlohmann::json targets = nlohmann::json::array();
  for (double r : {1.15, 1.25, 1.4, 1.8}) {
    targets.push_back({{"id", "d" + std::to_string(static_cast<int>(r * 100))},
                       {"kind", "dimer_energy(" + std::to_string(r) + ")"},
                       {"target", lj_shifted(r)}});
  }
  return {{"name", name},
          {"model", {{"id", "lennard_jones"}, {"species", {"Ar"}}, {"parameters", {{"cutoff", {{"fixed", 6.6}}}}}}},
          {"data", {{"targets", targets}}},
          {"learner", {{"strategy", "ga"}, {"population", population}, {"generations", generations}}},
          {"parallel", {{"executor", "serial"}}},
          {"seed", 11}};
}

// Removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("blast_unit_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace blast::testing
