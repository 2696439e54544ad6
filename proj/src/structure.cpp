#include "blast/structure.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include "blast/error.hpp"
#include "neighbors.hpp"

namespace blast {

void Structure::validate() const {
  if (species.size() != positions.size()) {
    throw ValidationError("species count " + std::to_string(species.size()) +
                          " does not match position count " + std::to_string(positions.size()));
  }
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const auto& p = positions[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      throw ValidationError("non-finite position for atom " + std::to_string(i));
    }
  }
  if (any_periodic()) {
    if (!cell) throw ValidationError("periodic structure without a cell");
    if (!(determinant(*cell) > 0.0)) throw ValidationError("cell determinant must be positive");
  }
}

std::array<double, 3> cell_widths(const Mat3& cell) {
  const double volume = std::abs(determinant(cell));
  return {volume / norm(cross(cell[1], cell[2])), volume / norm(cross(cell[2], cell[0])),
          volume / norm(cross(cell[0], cell[1]))};
}

double min_periodic_width(const Structure& s) {
  double w = std::numeric_limits<double>::infinity();
  if (!s.cell) return w;
  const auto widths = cell_widths(*s.cell);
  for (int k = 0; k < 3; ++k) {
    if (s.periodic[k]) w = std::min(w, widths[k]);
  }
  return w;
}

NeighborList neighbor_list(const Structure& s, double cutoff) {
  NeighborList out;
  out.cutoff = cutoff;
  detail::for_each_neighbor(s, cutoff,
                    [&](std::size_t i, std::size_t j, std::array<int, 3> image, const Vec3&, double r) {
                      if (i <= j) out.pairs.push_back({i, j, image, r});
                    });
  return out;
}

std::vector<std::vector<Neighbor>> full_neighbors(const Structure& s, double cutoff) {
  std::vector<std::vector<Neighbor>> out(s.size());
  detail::for_each_neighbor(s, cutoff,
                    [&](std::size_t i, std::size_t j, std::array<int, 3>, const Vec3& d, double r) {
                      out[i].push_back({j, d, r});
                    });
  return out;
}

LatticeKind parse_lattice_kind(std::string_view name) {
  if (name == "sc") return LatticeKind::sc;
  if (name == "fcc") return LatticeKind::fcc;
  if (name == "bcc") return LatticeKind::bcc;
  if (name == "diamond") return LatticeKind::diamond;
  throw ValidationError("unknown lattice kind '" + std::string(name) + "'");
}

std::string_view to_string(LatticeKind kind) {
  switch (kind) {
    case LatticeKind::sc: return "sc";
    case LatticeKind::fcc: return "fcc";
    case LatticeKind::bcc: return "bcc";
    case LatticeKind::diamond: return "diamond";
  }
  return "?";
}

namespace {

std::vector<Vec3> fractional_basis(LatticeKind kind) {
  switch (kind) {
    case LatticeKind::sc: return {{0, 0, 0}};
    case LatticeKind::bcc: return {{0, 0, 0}, {0.5, 0.5, 0.5}};
    case LatticeKind::fcc: return {{0, 0, 0}, {0, 0.5, 0.5}, {0.5, 0, 0.5}, {0.5, 0.5, 0}};
    case LatticeKind::diamond:
      return {{0, 0, 0},          {0, 0.5, 0.5},      {0.5, 0, 0.5},      {0.5, 0.5, 0},
              {0.25, 0.25, 0.25}, {0.25, 0.75, 0.75}, {0.75, 0.25, 0.75}, {0.75, 0.75, 0.25}};
  }
  return {};
}

}  // namespace

std::size_t basis_size(LatticeKind kind) { return fractional_basis(kind).size(); }

double nearest_neighbor_ratio(LatticeKind kind) {
  switch (kind) {
    case LatticeKind::sc: return 1.0;
    case LatticeKind::fcc: return 1.0 / std::sqrt(2.0);
    case LatticeKind::bcc: return std::sqrt(3.0) / 2.0;
    case LatticeKind::diamond: return std::sqrt(3.0) / 4.0;
  }
  return 1.0;
}

Structure make_lattice(LatticeKind kind, double a, const std::string& species, std::array<int, 3> repeat) {
  if (!(a > 0.0)) throw ValidationError("lattice constant must be positive");
  for (int r : repeat) {
    if (r < 1) throw ValidationError("lattice repeat must be >= 1");
  }
  Structure s;
  s.label = std::string(to_string(kind)) + "_" + species + "_" + format_real(a);
  const auto basis = fractional_basis(kind);
  for (int x = 0; x < repeat[0]; ++x) {
    for (int y = 0; y < repeat[1]; ++y) {
      for (int z = 0; z < repeat[2]; ++z) {
        for (const auto& f : basis) {
          s.positions.push_back({(x + f.x) * a, (y + f.y) * a, (z + f.z) * a});
          s.species.push_back(species);
        }
      }
    }
  }
  s.cell = Mat3{Vec3{repeat[0] * a, 0, 0}, Vec3{0, repeat[1] * a, 0}, Vec3{0, 0, repeat[2] * a}};
  s.periodic = {true, true, true};
  return s;
}

Structure dimer(const std::string& species_a, const std::string& species_b, double r) {
  if (!(r > 0.0)) throw ValidationError("dimer distance must be positive");
  Structure s;
  s.species = {species_a, species_b};
  s.positions = {{0, 0, 0}, {r, 0, 0}};
  s.label = "dimer_" + species_a + "_" + species_b + "_" + format_real(r);
  return s;
}

std::string format_real(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) return std::to_string(v);
  return std::string(buf, end);
}

}  // namespace blast
