#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "blast/structure.hpp"
#include "blast/vec3.hpp"

namespace blast {

// One fittable parameter. Bounds are inclusive; the default range seeds
// initial sampling.
struct ParameterSpec {
  std::string name;
  std::string unit;
  double lower = 0.0;
  double upper = 0.0;
  double default_low = 0.0;
  double default_high = 0.0;

  double width() const noexcept { return upper - lower; }
  bool frozen() const noexcept { return upper == lower; }
};

struct ParameterSpace {
  std::string model_id;
  std::vector<std::string> species;
  std::vector<ParameterSpec> specs;

  std::size_t size() const noexcept { return specs.size(); }
  std::optional<std::size_t> index_of(std::string_view name) const;
  const ParameterSpec& at(std::string_view name) const;
  ParameterSpec& at(std::string_view name);

  // Checks ParameterSpec ordering invariants and name uniqueness.
  void validate() const;
};

// A point in a ParameterSpace, values in canonical spec order.
struct ParameterVector {
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  friend bool operator==(const ParameterVector&, const ParameterVector&) = default;
};

enum class Arity { pair, pair_triplet };

struct ModelDescriptor {
  std::string model_id;
  Arity arity = Arity::pair;
  std::string cutoff_param;
  std::string summary;
};

const std::vector<ModelDescriptor>& list_models();
const ModelDescriptor& find_model(std::string_view model_id);

// Full parameter space for a model over the given species, with the built-in
// bounds and default ranges. Pair models carry one parameter block per
// species pair (AA, AB, BB, ...); with more than one species the names gain a
// pair suffix, e.g. "epsilon_A_B".
ParameterSpace parameter_space(std::string_view model_id, const std::vector<std::string>& species);

// Empty when the vector is valid; otherwise the indices outside [lower, upper]
// (NaN counts as outside). Throws ValidationError on a length mismatch.
std::vector<std::size_t> validate_params(const ParameterSpace& space, const ParameterVector& v);

// Clamps every value into its bounds.
ParameterVector clip_to_bounds(const ParameterSpace& space, ParameterVector v);

// Two-body energy between species a and b at distance r (Å). Defaults to the
// first species of the space. Lennard-Jones and Morse are shifted so they
// vanish at their cutoff and are zero beyond it.
double pair_energy(const ParameterSpace& space, const ParameterVector& params, double r,
                   std::string_view species_a = {}, std::string_view species_b = {});

// Largest interaction range of the model under these parameters.
double interaction_cutoff(const ParameterSpace& space, const ParameterVector& params);

// Characteristic nearest-neighbor distance of a species pair (the pair
// potential minimum for LJ and SW, r0 for Morse). Used to seed brackets.
double characteristic_length(const ParameterSpace& space, const ParameterVector& params,
                             std::string_view species_a = {}, std::string_view species_b = {});

// Total energy (eV). Periodic structures must satisfy cutoff ≤ half the
// minimum periodic cell width; build a supercell otherwise.
double energy(const ParameterSpace& space, const ParameterVector& params, const Structure& s);

// Analytic forces, -dE/dr per atom (eV/Å). Same preconditions as energy().
std::vector<Vec3> forces(const ParameterSpace& space, const ParameterVector& params, const Structure& s);

struct EnergyAndForces {
  double energy = 0.0;
  std::vector<Vec3> forces;
};
EnergyAndForces energy_and_forces(const ParameterSpace& space, const ParameterVector& params,
                                  const Structure& s);

// Energy per atom of an infinite periodic crystal given by one (or more)
// periodic cells. Images are summed directly, so the half-cell rule does not
// apply; the result equals energy()/N of any large enough supercell.
double lattice_energy_per_atom(const ParameterSpace& space, const ParameterVector& params,
                               const Structure& cell);

}  // namespace blast
