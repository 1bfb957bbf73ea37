// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>

#include "eit/common.hpp"

namespace eit::dbar {

// 2^l x 2^l lattice over [-sR, sR)^2, row-major with rows along Im k. The
// origin is lattice point (n/2, n/2).
struct KGrid {
  int l = 7;
  double s = 2.1;
  double R = 4.0;

  std::size_t size() const { return std::size_t{1} << l; }
  std::size_t points() const { return size() * size(); }
  double half_width() const { return s * R; }
  double spacing() const { return 2.0 * s * R / static_cast<double>(size()); }
  std::size_t origin_index() const { return (size() / 2) * size() + size() / 2; }

  cplx point(std::size_t row, std::size_t col) const {
    return {lattice_coord(col, size(), half_width()), lattice_coord(row, size(), half_width())};
  }
  cplx point(std::size_t flat) const { return point(flat / size(), flat % size()); }

  friend bool operator==(const KGrid&, const KGrid&) = default;
};

inline KGrid build_kgrid(double R, double s = 2.1, int l = 7) {
  if (l < 4 || l > 12) throw InvalidArgument("build_kgrid: l must lie in [4, 12], got " + std::to_string(l));
  if (!(R > 0.0)) throw InvalidArgument("build_kgrid: R must be positive");
  if (!(s >= 2.0)) throw InvalidArgument("build_kgrid: s must be at least 2");
  return KGrid{l, s, R};
}

}  // namespace eit::dbar
