#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "blast/potentials.hpp"
#include "blast/structure.hpp"

namespace blast {

enum class PropertyType {
  energy_per_atom,
  energy_difference,
  lattice_constant,
  cohesive_energy,
  bulk_modulus,
  dimer_energy,
  dimer_distance,
  external,
};

// What a target measures. Written compactly as e.g. "dimer_energy(1.5)",
// "lattice_constant(fcc,Ar)", "energy_difference(a,b)", "external(md_run)".
struct PropertyKind {
  PropertyType type = PropertyType::energy_per_atom;
  std::string label_a;  // energy_per_atom, energy_difference
  std::string label_b;  // energy_difference
  LatticeKind lattice = LatticeKind::fcc;
  std::string species_a;  // lattice species / dimer species; empty = first species
  std::string species_b;
  double r = 0.0;            // dimer_energy distance
  std::string evaluator_id;  // external

  static PropertyKind parse(std::string_view text);
  std::string to_string() const;
  // eV, Å or eV/Å³; empty for external kinds (trust the declared unit).
  std::string natural_unit() const;

  friend bool operator==(const PropertyKind&, const PropertyKind&) = default;
};

struct Bracket {
  double lo = 0.0;
  double hi = 0.0;
};

struct RelaxResult {
  double lattice_constant = 0.0;  // Å
  double energy_per_atom = 0.0;   // eV/atom
};

// Isotropic relaxation of a cubic lattice. The bracket is on the cubic lattice
// constant in Å; golden-section search to 1e-6 Å. Throws ComputeError when
// the bracket holds no interior minimum.
RelaxResult relax_lattice(const ParameterSpace& space, const ParameterVector& params, LatticeKind kind,
                          const std::string& species, Bracket bracket);

// Default bracket: nearest-neighbor distance within [0.75, 1.35] of the
// model's characteristic length.
Bracket default_lattice_bracket(const ParameterSpace& space, const ParameterVector& params, LatticeKind kind,
                                const std::string& species);

// B = V0 d²E/dV² from a five-point stencil at ±1 %, ±2 % volume strain.
// eV/Å³. Throws ComputeError on non-positive curvature.
double bulk_modulus(const ParameterSpace& space, const ParameterVector& params, LatticeKind kind,
                    const std::string& species, double a_eq);

// Equilibrium separation of an isolated dimer.
double dimer_distance(const ParameterSpace& space, const ParameterVector& params, const std::string& species_a,
                      const std::string& species_b);

// Inputs compute_property can draw on besides the model itself.
struct PropertyContext {
  const std::map<std::string, Structure>* structures = nullptr;
  // Returns the value computed by an external evaluator; throws on failure.
  std::function<double(const std::string& evaluator_id)> external;
  // Memo for relaxations shared between lattice targets of one candidate.
  std::map<std::string, RelaxResult>* relax_cache = nullptr;
};

double compute_property(const PropertyKind& kind, const ParameterSpace& space, const ParameterVector& params,
                        const PropertyContext& ctx);

}  // namespace blast
