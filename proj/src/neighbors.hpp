#pragma once

// Neighbor enumeration shared by the structure and potential code.

#include <array>
#include <cmath>
#include <cstddef>

#include "blast/error.hpp"
#include "blast/structure.hpp"

namespace blast::detail {

struct Reciprocal {
  Mat3 rows;  // rows[k] · v gives the fractional coordinate of v along axis k
};

inline Reciprocal reciprocal(const Mat3& cell) {
  const double det = determinant(cell);
  const Vec3 b0 = cross(cell[1], cell[2]) * (1.0 / det);
  const Vec3 b1 = cross(cell[2], cell[0]) * (1.0 / det);
  const Vec3 b2 = cross(cell[0], cell[1]) * (1.0 / det);
  return {{b0, b1, b2}};
}

// Calls visit(i, j, image, delta, r) for every directed (i, j, image) within
// the cutoff, excluding the trivial self pair.
template <class Visit>
void for_each_neighbor(const Structure& s, double cutoff, Visit&& visit) {
  if (!(cutoff > 0.0)) throw ValidationError("cutoff must be positive");
  s.validate();
  const std::size_t n = s.size();
  const double cut2 = cutoff * cutoff;

  if (!s.any_periodic()) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const Vec3 d = s.positions[j] - s.positions[i];
        const double r2 = dot(d, d);
        if (r2 <= cut2) visit(i, j, std::array<int, 3>{0, 0, 0}, d, std::sqrt(r2));
      }
    }
    return;
  }

  const Mat3& cell = *s.cell;
  const Reciprocal rec = reciprocal(cell);
  const auto widths = cell_widths(cell);
  std::array<int, 3> reach{0, 0, 0};
  for (int k = 0; k < 3; ++k) {
    if (s.periodic[k]) reach[k] = static_cast<int>(std::floor(cutoff / widths[k] + 0.5 + 1e-9));
  }

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const Vec3 d0 = s.positions[j] - s.positions[i];
      // Shift to the nearest image first so the search box is centered.
      std::array<int, 3> base{0, 0, 0};
      for (int k = 0; k < 3; ++k) {
        if (s.periodic[k]) base[k] = -static_cast<int>(std::lround(dot(rec.rows[k], d0)));
      }
      for (int a = base[0] - reach[0]; a <= base[0] + reach[0]; ++a) {
        for (int b = base[1] - reach[1]; b <= base[1] + reach[1]; ++b) {
          for (int c = base[2] - reach[2]; c <= base[2] + reach[2]; ++c) {
            if (i == j && a == 0 && b == 0 && c == 0) continue;
            const Vec3 d = d0 + cell[0] * a + cell[1] * b + cell[2] * c;
            const double r2 = dot(d, d);
            if (r2 <= cut2) visit(i, j, std::array<int, 3>{a, b, c}, d, std::sqrt(r2));
          }
        }
      }
    }
  }
}


}  // namespace blast::detail
