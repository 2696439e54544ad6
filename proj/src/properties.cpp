#include "blast/properties.hpp"

#include <cmath>
#include <vector>

#include "blast/error.hpp"

namespace blast {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return std::string(s.substr(first, last - first + 1));
}

double parse_number(const std::string& text, std::string_view what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("expected a number for " + std::string(what) + ", got '" + text + "'");
  }
}

struct GoldenResult {
  double x;
  double f;
};

template <class F>
GoldenResult golden_section(F&& f, double lo, double hi, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  return {x, f(x)};
}

template <class F>
GoldenResult interior_minimum(F&& f, Bracket bracket, double tol, std::string_view what) {
  if (!(bracket.lo > 0.0 && bracket.hi > bracket.lo)) {
    throw ValidationError("bracket must satisfy 0 < lo < hi for " + std::string(what));
  }
  const double f_lo = f(bracket.lo);
  const double f_hi = f(bracket.hi);
  const GoldenResult best = golden_section(f, bracket.lo, bracket.hi, tol);
  if (!std::isfinite(best.f)) throw ComputeError("non-finite energy while minimizing " + std::string(what));
  if (!(best.f < f_lo && best.f < f_hi)) {
    throw ComputeError("no interior minimum in [" + format_real(bracket.lo) + ", " + format_real(bracket.hi) +
                       "] for " + std::string(what));
  }
  return best;
}

}  // namespace

PropertyKind PropertyKind::parse(std::string_view text) {
  const std::string s = trim(text);
  std::string name = s;
  std::vector<std::string> args;
  const auto open = s.find('(');
  if (open != std::string::npos) {
    if (s.back() != ')') throw ValidationError("unbalanced parentheses in property kind '" + s + "'");
    name = trim(std::string_view(s).substr(0, open));
    const std::string inner = s.substr(open + 1, s.size() - open - 2);
    std::size_t start = 0;
    while (start <= inner.size()) {
      const auto comma = inner.find(',', start);
      const auto piece = trim(std::string_view(inner).substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (!piece.empty()) args.push_back(piece);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }

  PropertyKind k;
  auto need = [&](std::size_t lo, std::size_t hi) {
    if (args.size() < lo || args.size() > hi) {
      throw ValidationError("property kind '" + name + "' takes " + std::to_string(lo) +
                            (lo == hi ? "" : "-" + std::to_string(hi)) + " argument(s)");
    }
  };
  if (name == "energy_per_atom") {
    need(1, 1);
    k.type = PropertyType::energy_per_atom;
    k.label_a = args[0];
  } else if (name == "energy_difference") {
    need(2, 2);
    k.type = PropertyType::energy_difference;
    k.label_a = args[0];
    k.label_b = args[1];
  } else if (name == "lattice_constant" || name == "cohesive_energy" || name == "bulk_modulus") {
    need(1, 2);
    k.type = name == "lattice_constant"  ? PropertyType::lattice_constant
             : name == "cohesive_energy" ? PropertyType::cohesive_energy
                                         : PropertyType::bulk_modulus;
    k.lattice = parse_lattice_kind(args[0]);
    if (args.size() == 2) k.species_a = args[1];
  } else if (name == "dimer_energy") {
    need(1, 3);
    if (args.size() == 2) throw ValidationError("dimer_energy takes r or (r, species_a, species_b)");
    k.type = PropertyType::dimer_energy;
    k.r = parse_number(args[0], "dimer_energy distance");
    if (!(k.r > 0.0)) throw ValidationError("dimer_energy distance must be positive");
    if (args.size() == 3) {
      k.species_a = args[1];
      k.species_b = args[2];
    }
  } else if (name == "dimer_distance") {
    if (!args.empty()) need(2, 2);
    k.type = PropertyType::dimer_distance;
    if (args.size() == 2) {
      k.species_a = args[0];
      k.species_b = args[1];
    }
  } else if (name == "external") {
    need(1, 1);
    k.type = PropertyType::external;
    k.evaluator_id = args[0];
  } else {
    throw ValidationError("unknown property kind '" + name + "'");
  }
  return k;
}

std::string PropertyKind::to_string() const {
  auto with_species = [&](std::string head) {
    return species_a.empty() ? head + ")" : head + "," + species_a + ")";
  };
  switch (type) {
    case PropertyType::energy_per_atom: return "energy_per_atom(" + label_a + ")";
    case PropertyType::energy_difference: return "energy_difference(" + label_a + "," + label_b + ")";
    case PropertyType::lattice_constant: return with_species("lattice_constant(" + std::string(blast::to_string(lattice)));
    case PropertyType::cohesive_energy: return with_species("cohesive_energy(" + std::string(blast::to_string(lattice)));
    case PropertyType::bulk_modulus: return with_species("bulk_modulus(" + std::string(blast::to_string(lattice)));
    case PropertyType::dimer_energy:
      return species_a.empty() ? "dimer_energy(" + format_real(r) + ")"
                               : "dimer_energy(" + format_real(r) + "," + species_a + "," + species_b + ")";
    case PropertyType::dimer_distance:
      return species_a.empty() ? "dimer_distance" : "dimer_distance(" + species_a + "," + species_b + ")";
    case PropertyType::external: return "external(" + evaluator_id + ")";
  }
  return {};
}

std::string PropertyKind::natural_unit() const {
  switch (type) {
    case PropertyType::energy_per_atom:
    case PropertyType::energy_difference:
    case PropertyType::cohesive_energy:
    case PropertyType::dimer_energy: return "eV";
    case PropertyType::lattice_constant:
    case PropertyType::dimer_distance: return "Å";
    case PropertyType::bulk_modulus: return "eV/Å³";
    case PropertyType::external: return {};
  }
  return {};
}

RelaxResult relax_lattice(const ParameterSpace& space, const ParameterVector& params, LatticeKind kind,
                          const std::string& species, Bracket bracket) {
  auto e_of_a = [&](double a) { return lattice_energy_per_atom(space, params, make_lattice(kind, a, species)); };
  const GoldenResult best = interior_minimum(e_of_a, bracket, 1e-6, std::string(to_string(kind)) + " lattice");
  return {best.x, best.f};
}

Bracket default_lattice_bracket(const ParameterSpace& space, const ParameterVector& params, LatticeKind kind,
                                const std::string& species) {
  const double a0 = characteristic_length(space, params, species, species) / nearest_neighbor_ratio(kind);
  return {0.75 * a0, 1.35 * a0};
}

double bulk_modulus(const ParameterSpace& space, const ParameterVector& params, LatticeKind kind,
                    const std::string& species, double a_eq) {
  if (!(a_eq > 0.0)) throw ValidationError("lattice constant must be positive");
  const double n_basis = static_cast<double>(basis_size(kind));
  const double v0 = a_eq * a_eq * a_eq / n_basis;
  const double h = 0.01 * v0;
  auto e_of_strain = [&](int step) {
    const double a = a_eq * std::cbrt(1.0 + 0.01 * step);
    return lattice_energy_per_atom(space, params, make_lattice(kind, a, species));
  };
  const double fm2 = e_of_strain(-2);
  const double fm1 = e_of_strain(-1);
  const double f0 = e_of_strain(0);
  const double fp1 = e_of_strain(1);
  const double fp2 = e_of_strain(2);
  const double curvature = (-fp2 + 16.0 * fp1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * h * h);
  if (!(curvature > 0.0)) throw ComputeError("non-positive E(V) curvature: lattice is unstable");
  return v0 * curvature;
}

double dimer_distance(const ParameterSpace& space, const ParameterVector& params, const std::string& species_a,
                      const std::string& species_b) {
  const double d0 = characteristic_length(space, params, species_a, species_b);
  auto e_of_r = [&](double r) { return pair_energy(space, params, r, species_a, species_b); };
  return interior_minimum(e_of_r, Bracket{0.5 * d0, 1.5 * d0}, 1e-9, "dimer").x;
}

namespace {

const Structure& lookup(const PropertyContext& ctx, const std::string& label) {
  if (ctx.structures) {
    auto it = ctx.structures->find(label);
    if (it != ctx.structures->end()) return it->second;
  }
  throw ValidationError("unresolved structure label '" + label + "'");
}

RelaxResult relaxed(const PropertyKind& kind, const ParameterSpace& space, const ParameterVector& params,
                    const PropertyContext& ctx) {
  const std::string species = kind.species_a.empty() ? space.species.front() : kind.species_a;
  const std::string key = std::string(to_string(kind.lattice)) + "/" + species;
  if (ctx.relax_cache) {
    auto it = ctx.relax_cache->find(key);
    if (it != ctx.relax_cache->end()) return it->second;
  }
  const RelaxResult r =
      relax_lattice(space, params, kind.lattice, species, default_lattice_bracket(space, params, kind.lattice, species));
  if (ctx.relax_cache) (*ctx.relax_cache)[key] = r;
  return r;
}

double energy_per_atom(const Structure& s, const ParameterSpace& space, const ParameterVector& params) {
  if (s.size() == 0) throw ValidationError("structure '" + s.label + "' is empty");
  return energy(space, params, s) / static_cast<double>(s.size());
}

}  // namespace

double compute_property(const PropertyKind& kind, const ParameterSpace& space, const ParameterVector& params,
                        const PropertyContext& ctx) {
  const std::string first = space.species.empty() ? std::string{} : space.species.front();
  switch (kind.type) {
    case PropertyType::energy_per_atom: return energy_per_atom(lookup(ctx, kind.label_a), space, params);
    case PropertyType::energy_difference:
      return energy_per_atom(lookup(ctx, kind.label_a), space, params) -
             energy_per_atom(lookup(ctx, kind.label_b), space, params);
    case PropertyType::lattice_constant: return relaxed(kind, space, params, ctx).lattice_constant;
    case PropertyType::cohesive_energy: return relaxed(kind, space, params, ctx).energy_per_atom;
    case PropertyType::bulk_modulus: {
      const double a_eq = relaxed(kind, space, params, ctx).lattice_constant;
      return bulk_modulus(space, params, kind.lattice, kind.species_a.empty() ? first : kind.species_a, a_eq);
    }
    case PropertyType::dimer_energy: {
      const std::string a = kind.species_a.empty() ? first : kind.species_a;
      const std::string b = kind.species_b.empty() ? a : kind.species_b;
      return energy(space, params, dimer(a, b, kind.r));
    }
    case PropertyType::dimer_distance: {
      const std::string a = kind.species_a.empty() ? first : kind.species_a;
      const std::string b = kind.species_b.empty() ? a : kind.species_b;
      return dimer_distance(space, params, a, b);
    }
    case PropertyType::external:
      if (!ctx.external) throw ComputeError("no external evaluator configured for '" + kind.evaluator_id + "'");
      return ctx.external(kind.evaluator_id);
  }
  throw ComputeError("unhandled property kind");
}

}  // namespace blast
