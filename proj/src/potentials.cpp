#include "blast/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "blast/error.hpp"
#include "neighbors.hpp"

namespace blast {

namespace {

const double kSixthRootOfTwo = std::pow(2.0, 1.0 / 6.0);

struct SpecTemplate {
  const char* name;
  const char* unit;
  double lower, upper, default_low, default_high;
};

// Per-pair blocks for the pair models.
const std::vector<SpecTemplate> kLennardJones = {
    {"epsilon", "eV", 1e-4, 10.0, 0.05, 2.0},
    {"sigma", "Å", 0.5, 6.0, 0.8, 4.0},
    {"cutoff", "Å", 1.0, 20.0, 4.0, 10.0},
};

const std::vector<SpecTemplate> kMorse = {
    {"D", "eV", 1e-4, 10.0, 0.05, 2.0},
    {"a", "1/Å", 0.1, 10.0, 0.5, 3.0},
    {"r0", "Å", 0.5, 6.0, 1.0, 4.0},
    {"cutoff", "Å", 1.0, 20.0, 4.0, 10.0},
};

// Stillinger-Weber in the LAMMPS convention; defaults bracket the original Si set.
const std::vector<SpecTemplate> kStillingerWeber = {
    {"epsilon", "eV", 0.1, 10.0, 1.0, 4.0},
    {"sigma", "Å", 1.0, 4.0, 1.5, 2.5},
    {"a", "1", 1.2, 2.5, 1.6, 2.0},
    {"lambda", "1", 0.0, 60.0, 10.0, 30.0},
    {"gamma", "1", 0.5, 3.0, 0.8, 1.6},
    {"cos_theta0", "1", -1.0, 1.0, -0.5, -0.2},
    {"A", "1", 1.0, 20.0, 5.0, 9.0},
    {"B", "1", 0.1, 2.0, 0.4, 0.8},
    {"p", "1", 2.0, 8.0, 3.0, 5.0},
    {"q", "1", 0.0, 4.0, 0.0, 1.0},
};

enum class Form { lennard_jones, morse, stillinger_weber };

Form form_of(std::string_view model_id) {
  if (model_id == "lennard_jones") return Form::lennard_jones;
  if (model_id == "morse") return Form::morse;
  if (model_id == "stillinger_weber") return Form::stillinger_weber;
  throw ValidationError("unknown model '" + std::string(model_id) + "'");
}

std::size_t pair_index(std::size_t a, std::size_t b, std::size_t n) {
  if (a > b) std::swap(a, b);
  return a * n - a * (a - 1) / 2 - a + b;  // row-major upper triangle incl. diagonal
}

// Parameters resolved into flat per-pair coefficients.
struct PairCoeffs {
  double p0 = 0, p1 = 0, p2 = 0;  // LJ: eps, sigma, -; Morse: D, a, r0
  double cutoff = 0;
  double shift = 0;
};

struct SwCoeffs {
  double epsilon, sigma, a, lambda, gamma, cos_theta0, A, B, p, q;
  double cutoff() const { return a * sigma; }
};

double lj_raw(const PairCoeffs& c, double r) {
  const double s2 = (c.p1 / r) * (c.p1 / r);
  const double s6 = s2 * s2 * s2;
  return 4.0 * c.p0 * (s6 * s6 - s6);
}

double morse_raw(const PairCoeffs& c, double r) {
  const double e = std::exp(-c.p1 * (r - c.p2));
  return c.p0 * (1.0 - e) * (1.0 - e) - c.p0;
}

class Model {
 public:
  Model(const ParameterSpace& space, const ParameterVector& params) : form_(form_of(space.model_id)) {
    if (params.size() != space.size()) {
      throw ValidationError("parameter vector has " + std::to_string(params.size()) + " values, space has " +
                            std::to_string(space.size()));
    }
    for (std::size_t i = 0; i < space.species.size(); ++i) species_index_[space.species[i]] = i;
    n_species_ = space.species.size();

    if (form_ == Form::stillinger_weber) {
      const auto& v = params.values;
      sw_ = SwCoeffs{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9]};
      max_cutoff_ = sw_.cutoff();
      return;
    }
    const std::size_t block = form_ == Form::lennard_jones ? kLennardJones.size() : kMorse.size();
    const std::size_t n_pairs = n_species_ * (n_species_ + 1) / 2;
    pairs_.resize(n_pairs);
    for (std::size_t k = 0; k < n_pairs; ++k) {
      const double* v = params.values.data() + k * block;
      PairCoeffs& c = pairs_[k];
      if (form_ == Form::lennard_jones) {
        c.p0 = v[0];
        c.p1 = v[1];
        c.cutoff = v[2];
        c.shift = lj_raw(c, c.cutoff);
      } else {
        c.p0 = v[0];
        c.p1 = v[1];
        c.p2 = v[2];
        c.cutoff = v[3];
        c.shift = morse_raw(c, c.cutoff);
      }
      max_cutoff_ = std::max(max_cutoff_, c.cutoff);
    }
  }

  double max_cutoff() const { return max_cutoff_; }
  Form form() const { return form_; }
  const SwCoeffs& sw() const { return sw_; }

  std::size_t species_index(std::string_view label) const {
    auto it = species_index_.find(std::string(label));
    if (it == species_index_.end()) {
      throw ComputeError("species '" + std::string(label) + "' is not in the parameter space");
    }
    return it->second;
  }

  const PairCoeffs& pair(std::size_t a, std::size_t b) const { return pairs_[pair_index(a, b, n_species_)]; }

  // Pair energy and dV/dr for species indices a, b.
  void pair_term(std::size_t a, std::size_t b, double r, double& v, double& dv) const {
    v = 0.0;
    dv = 0.0;
    if (form_ == Form::stillinger_weber) {
      sw_pair(r, v, dv);
      return;
    }
    const PairCoeffs& c = pair(a, b);
    if (r >= c.cutoff) return;
    if (form_ == Form::lennard_jones) {
      const double s2 = (c.p1 / r) * (c.p1 / r);
      const double s6 = s2 * s2 * s2;
      v = 4.0 * c.p0 * (s6 * s6 - s6) - c.shift;
      dv = 4.0 * c.p0 * (-12.0 * s6 * s6 + 6.0 * s6) / r;
    } else {
      const double e = std::exp(-c.p1 * (r - c.p2));
      v = c.p0 * (1.0 - e) * (1.0 - e) - c.p0 - c.shift;
      dv = 2.0 * c.p0 * c.p1 * (1.0 - e) * e;
    }
  }

  void sw_pair(double r, double& v, double& dv) const {
    const SwCoeffs& s = sw_;
    const double rc = s.cutoff();
    if (r >= rc) return;
    const double x = s.sigma / (r - rc);
    const double ex = std::exp(x);
    const double sr = s.sigma / r;
    const double bp = s.B * std::pow(sr, s.p);
    const double bq = std::pow(sr, s.q);
    const double poly = bp - bq;
    v = s.A * s.epsilon * poly * ex;
    const double dpoly = (-s.p * bp + s.q * bq) / r;
    const double dex = ex * (-s.sigma / ((r - rc) * (r - rc)));
    dv = s.A * s.epsilon * (dpoly * ex + poly * dex);
  }

  // Three-body term centered on the vertex atom; d1, d2 point to the two
  // neighbors. Gradients are with respect to d1 and d2.
  double sw_triplet(const Vec3& d1, double r1, const Vec3& d2, double r2, Vec3* g1, Vec3* g2) const {
    const SwCoeffs& s = sw_;
    const double rc = s.cutoff();
    if (r1 >= rc || r2 >= rc) return 0.0;
    const double gs = s.gamma * s.sigma;
    const double e1 = std::exp(gs / (r1 - rc));
    const double e2 = std::exp(gs / (r2 - rc));
    const double c = dot(d1, d2) / (r1 * r2);
    const double dc = c - s.cos_theta0;
    const double pre = s.lambda * s.epsilon;
    const double h = pre * dc * dc * e1 * e2;
    if (g1 && g2) {
      const Vec3 dc_dd1 = d2 * (1.0 / (r1 * r2)) - d1 * (c / (r1 * r1));
      const Vec3 dc_dd2 = d1 * (1.0 / (r1 * r2)) - d2 * (c / (r2 * r2));
      const double de1 = -gs / ((r1 - rc) * (r1 - rc));  // d(ln e1)/dr1
      const double de2 = -gs / ((r2 - rc) * (r2 - rc));
      *g1 = dc_dd1 * (2.0 * pre * dc * e1 * e2) + d1 * (h * de1 / r1);
      *g2 = dc_dd2 * (2.0 * pre * dc * e1 * e2) + d2 * (h * de2 / r2);
    }
    return h;
  }

 private:
  Form form_;
  std::map<std::string, std::size_t> species_index_;
  std::size_t n_species_ = 0;
  std::vector<PairCoeffs> pairs_;
  SwCoeffs sw_{};
  double max_cutoff_ = 0.0;
};

EnergyAndForces evaluate(const Model& model, const Structure& s, bool want_forces) {
  std::vector<std::size_t> kind(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) kind[i] = model.species_index(s.species[i]);

  EnergyAndForces out;
  if (want_forces) out.forces.assign(s.size(), Vec3{});
  if (s.size() == 0) return out;

  if (!want_forces && model.form() != Form::stillinger_weber) {
    double total = 0.0;
    detail::for_each_neighbor(s, model.max_cutoff(),
                              [&](std::size_t i, std::size_t j, std::array<int, 3>, const Vec3&, double r) {
                                if (r < 1e-12) {
                                  throw ComputeError("overlapping atoms " + std::to_string(i) + " and " +
                                                     std::to_string(j));
                                }
                                double v = 0.0;
                                double dv = 0.0;
                                model.pair_term(kind[i], kind[j], r, v, dv);
                                total += 0.5 * v;
                              });
    out.energy = total;
    return out;
  }

  const auto neighbors = full_neighbors(s, model.max_cutoff());
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (const Neighbor& nb : neighbors[i]) {
      if (nb.r < 1e-12) throw ComputeError("overlapping atoms " + std::to_string(i) + " and " + std::to_string(nb.j));
      double v = 0.0;
      double dv = 0.0;
      model.pair_term(kind[i], kind[nb.j], nb.r, v, dv);
      total += 0.5 * v;
      if (want_forces && dv != 0.0) {
        const Vec3 g = nb.delta * (0.5 * dv / nb.r);
        out.forces[i] += g;
        out.forces[nb.j] -= g;
      }
    }
  }

  if (model.form() == Form::stillinger_weber) {
    const double rc = model.sw().cutoff();
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto& list = neighbors[i];
      for (std::size_t a = 0; a < list.size(); ++a) {
        if (list[a].r >= rc) continue;
        for (std::size_t b = a + 1; b < list.size(); ++b) {
          if (list[b].r >= rc) continue;
          Vec3 g1;
          Vec3 g2;
          total += model.sw_triplet(list[a].delta, list[a].r, list[b].delta, list[b].r, want_forces ? &g1 : nullptr,
                                    want_forces ? &g2 : nullptr);
          if (want_forces) {
            out.forces[list[a].j] -= g1;
            out.forces[list[b].j] -= g2;
            out.forces[i] += g1 + g2;
          }
        }
      }
    }
  }
  out.energy = total;
  return out;
}

void require_half_cell(const Model& model, const Structure& s) {
  const double width = min_periodic_width(s);
  if (model.max_cutoff() > 0.5 * width) {
    throw ComputeError("cutoff " + format_real(model.max_cutoff()) + " Å exceeds half the minimum cell width (" +
                       format_real(0.5 * width) + " Å) of '" + s.label + "'; use a supercell");
  }
}

std::size_t species_or_first(const ParameterSpace& space, const Model& model, std::string_view label) {
  if (label.empty()) {
    if (space.species.empty()) throw ValidationError("parameter space has no species");
    return 0;
  }
  return model.species_index(label);
}

}  // namespace

std::optional<std::size_t> ParameterSpace::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].name == name) return i;
  }
  return std::nullopt;
}

const ParameterSpec& ParameterSpace::at(std::string_view name) const {
  auto idx = index_of(name);
  if (!idx) throw ValidationError("no parameter named '" + std::string(name) + "'");
  return specs[*idx];
}

ParameterSpec& ParameterSpace::at(std::string_view name) {
  return const_cast<ParameterSpec&>(std::as_const(*this).at(name));
}

void ParameterSpace::validate() const {
  if (specs.empty()) throw ValidationError("parameter space is empty");
  std::set<std::string> seen;
  for (const auto& s : specs) {
    if (!seen.insert(s.name).second) throw ValidationError("duplicate parameter name", s.name);
    if (!(s.lower <= s.default_low && s.default_low <= s.default_high && s.default_high <= s.upper)) {
      throw ValidationError("require lower <= default_low <= default_high <= upper", s.name);
    }
  }
}

const std::vector<ModelDescriptor>& list_models() {
  static const std::vector<ModelDescriptor> models = {
      {"lennard_jones", Arity::pair, "cutoff", "12-6 Lennard-Jones, shifted to zero at the cutoff"},
      {"morse", Arity::pair, "cutoff", "Morse pair potential, shifted to zero at the cutoff"},
      {"stillinger_weber", Arity::pair_triplet, "a",
       "Stillinger-Weber two- and three-body potential (single species), range a*sigma"},
  };
  return models;
}

const ModelDescriptor& find_model(std::string_view model_id) {
  for (const auto& m : list_models()) {
    if (m.model_id == model_id) return m;
  }
  throw ValidationError("unknown model '" + std::string(model_id) + "'");
}

ParameterSpace parameter_space(std::string_view model_id, const std::vector<std::string>& species) {
  const Form form = form_of(model_id);
  if (species.empty()) throw ValidationError("at least one species is required");
  std::set<std::string> unique(species.begin(), species.end());
  if (unique.size() != species.size()) throw ValidationError("duplicate species label");

  ParameterSpace space;
  space.model_id = std::string(model_id);
  space.species = species;

  auto add = [&](const SpecTemplate& t, const std::string& suffix) {
    space.specs.push_back({std::string(t.name) + suffix, t.unit, t.lower, t.upper, t.default_low, t.default_high});
  };

  if (form == Form::stillinger_weber) {
    if (species.size() != 1) throw ValidationError("stillinger_weber supports a single species only");
    for (const auto& t : kStillingerWeber) add(t, "");
    return space;
  }
  const auto& block = form == Form::lennard_jones ? kLennardJones : kMorse;
  for (std::size_t a = 0; a < species.size(); ++a) {
    for (std::size_t b = a; b < species.size(); ++b) {
      const std::string suffix = species.size() == 1 ? "" : "_" + species[a] + "_" + species[b];
      for (const auto& t : block) add(t, suffix);
    }
  }
  return space;
}

std::vector<std::size_t> validate_params(const ParameterSpace& space, const ParameterVector& v) {
  if (v.size() != space.size()) {
    throw ValidationError("parameter vector length " + std::to_string(v.size()) + " != space size " +
                          std::to_string(space.size()));
  }
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] >= space.specs[i].lower && v[i] <= space.specs[i].upper)) bad.push_back(i);
  }
  return bad;
}

ParameterVector clip_to_bounds(const ParameterSpace& space, ParameterVector v) {
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::clamp(v[i], space.specs[i].lower, space.specs[i].upper);
  return v;
}

double pair_energy(const ParameterSpace& space, const ParameterVector& params, double r, std::string_view species_a,
                   std::string_view species_b) {
  if (!(r > 0.0)) throw ValidationError("pair distance must be positive");
  const Model model(space, params);
  const std::size_t a = species_or_first(space, model, species_a);
  const std::size_t b = species_b.empty() ? a : model.species_index(species_b);
  double v = 0.0;
  double dv = 0.0;
  model.pair_term(a, b, r, v, dv);
  return v;
}

double interaction_cutoff(const ParameterSpace& space, const ParameterVector& params) {
  return Model(space, params).max_cutoff();
}

double characteristic_length(const ParameterSpace& space, const ParameterVector& params, std::string_view species_a,
                             std::string_view species_b) {
  const Model model(space, params);
  if (model.form() == Form::stillinger_weber) return kSixthRootOfTwo * model.sw().sigma;
  const std::size_t a = species_or_first(space, model, species_a);
  const std::size_t b = species_b.empty() ? a : model.species_index(species_b);
  const PairCoeffs& c = model.pair(a, b);
  return model.form() == Form::lennard_jones ? kSixthRootOfTwo * c.p1 : c.p2;
}

double energy(const ParameterSpace& space, const ParameterVector& params, const Structure& s) {
  const Model model(space, params);
  require_half_cell(model, s);
  return evaluate(model, s, false).energy;
}

std::vector<Vec3> forces(const ParameterSpace& space, const ParameterVector& params, const Structure& s) {
  return energy_and_forces(space, params, s).forces;
}

EnergyAndForces energy_and_forces(const ParameterSpace& space, const ParameterVector& params, const Structure& s) {
  const Model model(space, params);
  require_half_cell(model, s);
  return evaluate(model, s, true);
}

double lattice_energy_per_atom(const ParameterSpace& space, const ParameterVector& params, const Structure& cell) {
  if (cell.size() == 0) throw ValidationError("empty structure");
  const Model model(space, params);
  return evaluate(model, cell, false).energy / static_cast<double>(cell.size());
}

}  // namespace blast
