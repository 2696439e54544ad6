#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"

#include "blast/error.hpp"
#include "blast/potentials.hpp"

using namespace blast;
using namespace blast::testing;

TEST_CASE("registry lists three models in fixed order") {
  const auto& models = list_models();
  REQUIRE(models.size() == 3);
  CHECK(models[0].model_id == "lennard_jones");
  CHECK(models[1].model_id == "morse");
  CHECK(models[2].model_id == "stillinger_weber");
  CHECK(models[2].arity == Arity::pair_triplet);
  for (const auto& m : models) {
    const auto space = parameter_space(m.model_id, {"X"});
    CHECK(space.index_of(m.cutoff_param).has_value());
    CHECK_NOTHROW(space.validate());
  }
  CHECK_THROWS_AS(find_model("tersoff"), ValidationError);
}

TEST_CASE("parameter space sizes") {
  CHECK(parameter_space("lennard_jones", {"Ar"}).size() == 3);
  CHECK(parameter_space("stillinger_weber", {"Si"}).size() == 10);
  const auto ab = parameter_space("lennard_jones", {"A", "B"});
  CHECK(ab.size() == 9);
  CHECK(ab.index_of("epsilon_A_B").has_value());
  CHECK(ab.index_of("sigma_B_B").has_value());
  CHECK(parameter_space("morse", {"Cu"}).size() == 4);
  CHECK_THROWS_AS(parameter_space("stillinger_weber", {"Si", "Ge"}), ValidationError);
  CHECK_THROWS_AS(parameter_space("nope", {"Ar"}), ValidationError);
  CHECK_THROWS_AS(parameter_space("lennard_jones", {}), ValidationError);
}

TEST_CASE("pair energy reference values") {
  const auto space = parameter_space("lennard_jones", {"Ar"});
  const auto p = lj(space, 1.0, 1.0, 100.0);
  CHECK(pair_energy(space, p, std::pow(2.0, 1.0 / 6.0)) == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(std::abs(pair_energy(space, p, 1.0)) < 1e-9);
  CHECK(pair_energy(space, p, 1.5) == doctest::Approx(-0.320337).epsilon(1e-6));
  CHECK(pair_energy(space, p, 150.0) == 0.0);
  CHECK_THROWS_AS(pair_energy(space, p, 0.0), ValidationError);

  const auto ms = parameter_space("morse", {"Cu"});
  ParameterVector m{{1.0, 1.0, 1.0, 100.0}};
  CHECK(pair_energy(ms, m, 2.0) == doctest::Approx(-0.600424).epsilon(1e-6));
  CHECK(pair_energy(ms, m, 1.0) == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("shifted pair energies vanish continuously at the cutoff") {
  const auto space = parameter_space("lennard_jones", {"Ar"});
  const auto p = lj(space, 1.0, 1.0, 2.5);
  double prev = std::abs(pair_energy(space, p, 2.5 - 1e-2));
  for (double d : {1e-3, 1e-4, 1e-5, 1e-6}) {
    const double v = std::abs(pair_energy(space, p, 2.5 - d));
    CHECK(v < prev);
    prev = v;
  }
  CHECK(prev < 1e-5);
  CHECK(pair_energy(space, p, 2.5) == 0.0);
}

TEST_CASE("dimer energy and forces at the minimum") {
  const auto space = parameter_space("lennard_jones", {"Ar"});
  const auto p = lj(space, 1.0, 1.0, 100.0);
  const auto d = dimer("Ar", "Ar", std::pow(2.0, 1.0 / 6.0));
  CHECK(energy(space, p, d) == doctest::Approx(-1.0).epsilon(1e-9));
  for (const auto& f : forces(space, p, d)) CHECK(norm(f) < 1e-9);
}

TEST_CASE("cluster invariances") {
  std::mt19937_64 rng(11);
  const auto space = parameter_space("lennard_jones", {"Ar"});
  const auto p = lj(space, 0.0103, 3.4, 8.5);
  const auto sws = parameter_space("stillinger_weber", {"Si"});
  const auto swp = silicon_sw(sws);
  for (int trial = 0; trial < 5; ++trial) {
    for (const bool use_sw : {false, true}) {
      const auto& sp = use_sw ? sws : space;
      const auto& pp = use_sw ? swp : p;
      auto s = random_cluster(rng, use_sw ? "Si" : "Ar", 10, use_sw ? 6.0 : 9.0, use_sw ? 2.0 : 3.0);
      const double e0 = energy(sp, pp, s);

      Structure moved = s;
      for (auto& x : moved.positions) x = x + Vec3{3.7, -12.1, 0.25};
      CHECK(energy(sp, pp, moved) == doctest::Approx(e0).epsilon(1e-9));

      const double th = 0.7 + trial;
      Structure rotated = s;
      for (auto& x : rotated.positions) {
        x = {std::cos(th) * x.x - std::sin(th) * x.y, std::sin(th) * x.x + std::cos(th) * x.y, x.z};
        x = {x.x, std::cos(0.3) * x.y - std::sin(0.3) * x.z, std::sin(0.3) * x.y + std::cos(0.3) * x.z};
      }
      CHECK(energy(sp, pp, rotated) == doctest::Approx(e0).epsilon(1e-9));

      Structure permuted = s;
      std::shuffle(permuted.positions.begin(), permuted.positions.end(), rng);
      CHECK(energy(sp, pp, permuted) == doctest::Approx(e0).epsilon(1e-9));

      CHECK(energy(sp, pp, s) == e0);
    }
  }
}

TEST_CASE("forces match finite differences and sum to zero") {
  std::mt19937_64 rng(3);
  const auto space = parameter_space("lennard_jones", {"Ar"});
  const auto p = lj(space, 1.0, 1.0, 2.5);
  int checked = 0;
  while (checked < 3) {
    const auto s = random_cluster(rng, "Ar", 8, 2.5, 0.9);
    bool near_cutoff = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (std::size_t j = i + 1; j < s.size(); ++j) near_cutoff |= std::abs(norm(s.positions[i] - s.positions[j]) - 2.5) < 0.1;
    }
    if (near_cutoff) continue;
    ++checked;
    const auto f = forces(space, p, s);
    Vec3 net{};
    double fmax = 0.0, dmax = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      net = net + f[i];
      for (int c = 0; c < 3; ++c) {
        Structure a = s, b = s;
        a.positions[i][c] += 1e-5;
        b.positions[i][c] -= 1e-5;
        const double fd = -(energy(space, p, a) - energy(space, p, b)) / 2e-5;
        fmax = std::max(fmax, std::abs(f[i][c]));
        dmax = std::max(dmax, std::abs(fd - f[i][c]));
      }
    }
    CHECK(dmax / fmax < 1e-6);
    for (int c = 0; c < 3; ++c) CHECK(std::abs(net[c]) < 1e-10);
  }
}

TEST_CASE("stillinger-weber terms vanish smoothly at a*sigma") {
  const auto space = parameter_space("stillinger_weber", {"Si"});
  const auto p = silicon_sw(space);
  const double rc = 1.8 * 2.0951;
  CHECK(std::abs(pair_energy(space, p, rc - 1e-3)) < 1e-12);
  CHECK(pair_energy(space, p, rc + 1e-3) == 0.0);
  Structure tri;
  tri.species = {"Si", "Si", "Si"};
  tri.positions = {{0, 0, 0}, {rc - 1e-3, 0, 0}, {0, 2.35, 0}};
  const double e_near = energy(space, p, tri);
  tri.positions[1].x = rc + 1e-3;
  const double e_far = energy(space, p, tri);
  CHECK(std::abs(e_near - e_far) < 1e-10);
}

TEST_CASE("validate_params reports out-of-bounds indices") {
  const auto space = parameter_space("lennard_jones", {"Ar"});
  CHECK(validate_params(space, lj(space, 1.0, 1.0, 5.0)).empty());
  CHECK(validate_params(space, lj(space, 10.0, 1.0, 5.0)).empty());
  CHECK(validate_params(space, lj(space, 11.0, 1.0, 5.0)) == std::vector<std::size_t>{0});
  CHECK(validate_params(space, lj(space, 1.0, NAN, 50.0)) == std::vector<std::size_t>{1, 2});
  CHECK_THROWS_AS(validate_params(space, ParameterVector{{1.0}}), ValidationError);
  CHECK(clip_to_bounds(space, lj(space, 11.0, 0.1, 5.0)) == lj(space, 10.0, 0.5, 5.0));
}

TEST_CASE("periodic energy enforces the half-cell rule") {
  const auto space = parameter_space("lennard_jones", {"Ar"});
  const auto p = lj(space, 1.0, 1.0, 2.5);
  const auto cell = make_lattice(LatticeKind::fcc, 1.55, "Ar");
  CHECK_THROWS_AS(energy(space, p, cell), ComputeError);
  const auto big = make_lattice(LatticeKind::fcc, 1.55, "Ar", {4, 4, 4});
  CHECK(energy(space, p, big) / 256.0 == doctest::Approx(lattice_energy_per_atom(space, p, cell)).epsilon(1e-9));
}

TEST_CASE("energy per atom is independent of the supercell size") {
  const auto space = parameter_space("lennard_jones", {"Ar"});
  const auto p = lj(space, 1.0, 1.0, 2.0);
  for (auto kind : {LatticeKind::sc, LatticeKind::bcc, LatticeKind::fcc, LatticeKind::diamond}) {
    const double a = 2.0;
    const double ref = energy(space, p, make_lattice(kind, a, "Ar", {2, 2, 2})) / (8.0 * basis_size(kind));
    for (int n : {3, 4}) {
      const double e = energy(space, p, make_lattice(kind, a, "Ar", {n, n, n})) / (n * n * n * basis_size(kind));
      CHECK(e == doctest::Approx(ref).epsilon(1e-9));
    }
  }
}

TEST_CASE("species missing from the parameter space is rejected") {
  const auto space = parameter_space("lennard_jones", {"Ar"});
  CHECK_THROWS_AS(energy(space, lj(space, 1, 1, 3), dimer("Ar", "Kr", 1.2)), Error);
}

TEST_CASE("mixed-species pairs use their own block") {
  const auto space = parameter_space("lennard_jones", {"A", "B"});
  ParameterVector v{std::vector<double>(space.size(), 1.0)};
  for (const char* s : {"cutoff_A_A", "cutoff_A_B", "cutoff_B_B"}) v[*space.index_of(s)] = 50.0;
  v[*space.index_of("epsilon_A_B")] = 2.0;
  CHECK(pair_energy(space, v, std::pow(2.0, 1.0 / 6.0), "A", "B") == doctest::Approx(-2.0).epsilon(1e-6));
  CHECK(pair_energy(space, v, std::pow(2.0, 1.0 / 6.0), "B", "A") == doctest::Approx(-2.0).epsilon(1e-6));
  CHECK(pair_energy(space, v, std::pow(2.0, 1.0 / 6.0), "B", "B") == doctest::Approx(-1.0).epsilon(1e-6));
}
