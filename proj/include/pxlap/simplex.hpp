// Kuhn triangulation of a box grid: every cell splits into dim! simplices,
// one per axis ordering, each a monotone lattice path from the cell's lower
// corner. P1 gradients are constant on a simplex and are forward differences
// along the path.
#pragma once

#include <array>
#include <vector>

#include "pxlap/grid.hpp"

namespace pxl {

struct Simplex {
  /// Path vertices v[0..dim]; v[k+1] = v[k] + e_{axis[k]}.
  std::array<std::size_t, kMaxDim + 1> v{};
  std::array<int, kMaxDim> axis{};
  Vec centroid{};
};

class SimplexMesh {
 public:
  explicit SimplexMesh(const Grid& grid);

  const Grid& grid() const { return grid_; }
  const std::vector<Simplex>& simplices() const { return simplices_; }
  double simplex_volume() const { return volume_; }

  Vec gradient(const Simplex& s, const std::vector<double>& u) const;
  /// Adds scale * <flux, D(hat_i)> to out[i] for each vertex i of s.
  void scatter(const Simplex& s, const Vec& flux, double scale, std::vector<double>& out) const;

 private:
  Grid grid_;
  std::vector<Simplex> simplices_;
  double volume_ = 0.0;
};

}  // namespace pxl
