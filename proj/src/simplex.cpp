#include "pxlap/simplex.hpp"

#include <algorithm>

namespace pxl {

SimplexMesh::SimplexMesh(const Grid& grid) : grid_(grid) {
  const int n = grid.dim();
  std::array<int, kMaxDim> perm{0, 1, 2};
  int n_perm = 1;
  for (int k = 2; k <= n; ++k) n_perm *= k;
  volume_ = grid.cell_volume() / n_perm;

  Index cells{};
  for (int a = 0; a < kMaxDim; ++a) cells[a] = a < n ? grid.cells(a) : 1;
  simplices_.reserve(static_cast<std::size_t>(cells[0]) * cells[1] * cells[2] * n_perm);
  Index c{};
  for (c[2] = 0; c[2] < cells[2]; ++c[2]) {
    for (c[1] = 0; c[1] < cells[1]; ++c[1]) {
      for (c[0] = 0; c[0] < cells[0]; ++c[0]) {
        std::sort(perm.begin(), perm.begin() + n);
        do {
          Simplex s;
          Index k = c;
          s.v[0] = grid.flat(k);
          Vec sum = grid.point(k);
          for (int j = 0; j < n; ++j) {
            s.axis[j] = perm[j];
            k[perm[j]] += 1;
            s.v[j + 1] = grid.flat(k);
            const Vec x = grid.point(k);
            for (int a = 0; a < n; ++a) sum[a] += x[a];
          }
          for (int a = 0; a < n; ++a) s.centroid[a] = sum[a] / (n + 1);
          simplices_.push_back(s);
        } while (std::next_permutation(perm.begin(), perm.begin() + n));
      }
    }
  }
}

Vec SimplexMesh::gradient(const Simplex& s, const std::vector<double>& u) const {
  Vec g{};
  for (int j = 0; j < grid_.dim(); ++j) {
    const int a = s.axis[j];
    g[a] = (u[s.v[j + 1]] - u[s.v[j]]) / grid_.h(a);
  }
  return g;
}

void SimplexMesh::scatter(const Simplex& s, const Vec& flux, double scale,
                          std::vector<double>& out) const {
  for (int j = 0; j < grid_.dim(); ++j) {
    const int a = s.axis[j];
    const double f = scale * flux[a] / grid_.h(a);
    out[s.v[j + 1]] += f;
    out[s.v[j]] -= f;
  }
}

}  // namespace pxl
