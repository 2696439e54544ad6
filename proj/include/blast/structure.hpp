#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "blast/vec3.hpp"

namespace blast {

// An atomic (or coarse-grained bead) configuration. Positions in Å, cell rows
// are lattice vectors in Å.
struct Structure {
  std::vector<std::string> species;
  std::vector<Vec3> positions;
  std::optional<Mat3> cell;
  std::array<bool, 3> periodic{false, false, false};
  std::string label;

  std::size_t size() const noexcept { return positions.size(); }
  bool any_periodic() const noexcept { return periodic[0] || periodic[1] || periodic[2]; }

  // Throws ValidationError on non-finite positions, species/position count
  // mismatch, or a periodic flag without a positive-determinant cell.
  void validate() const;
};

// Perpendicular distance between opposite faces of the cell, per axis.
std::array<double, 3> cell_widths(const Mat3& cell);

// Smallest width over the periodic axes; +inf for a cluster.
double min_periodic_width(const Structure& s);

struct NeighborPair {
  std::size_t i = 0;
  std::size_t j = 0;
  std::array<int, 3> image{0, 0, 0};  // j is taken at positions[j] + image·cell
  double distance = 0.0;
};

struct NeighborList {
  std::vector<NeighborPair> pairs;
  double cutoff = 0.0;
};

// All pairs within `cutoff` including periodic images, with i ≤ j. Pairs with
// i < j appear once per image. An atom's interaction with its own images
// (i == j) is listed for both +image and -image, so each such bond
// contributes half weight when summed.
//
// Images are enumerated explicitly, so any cutoff is accepted here; the
// half-cell rule is enforced by the energy routines.
NeighborList neighbor_list(const Structure& s, double cutoff);

// One directed neighbor entry: atom j seen from i through `delta` = r_j' - r_i.
struct Neighbor {
  std::size_t j = 0;
  Vec3 delta;
  double r = 0.0;
};

// Full per-atom neighbor lists (each bond seen from both ends, self-images
// included). The workhorse behind energy and forces.
std::vector<std::vector<Neighbor>> full_neighbors(const Structure& s, double cutoff);

enum class LatticeKind { sc, fcc, bcc, diamond };

LatticeKind parse_lattice_kind(std::string_view name);
std::string_view to_string(LatticeKind kind);
std::size_t basis_size(LatticeKind kind);
// Nearest-neighbor distance divided by the cubic lattice constant.
double nearest_neighbor_ratio(LatticeKind kind);

Structure make_lattice(LatticeKind kind, double a, const std::string& species,
                       std::array<int, 3> repeat = {1, 1, 1});

Structure dimer(const std::string& species_a, const std::string& species_b, double r);

// Shortest decimal that round-trips the value ("1", "1.5", "0.1").
std::string format_real(double v);

}  // namespace blast
