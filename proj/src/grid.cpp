#include "pxlap/grid.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace pxl {

Grid::Grid(int dim, std::span<const Interval> bounds, std::span<const int> n_cells)
    : dim_(dim) {
  if (dim < 1 || dim > kMaxDim) throw GridError("grid dimension must be 1, 2 or 3");
  if (bounds.size() != static_cast<std::size_t>(dim) ||
      n_cells.size() != static_cast<std::size_t>(dim)) {
    throw GridError("bounds and n_cells must both have one entry per axis");
  }
  double total = 1.0;
  for (int a = 0; a < dim; ++a) {
    if (!(bounds[a].hi > bounds[a].lo) || !std::isfinite(bounds[a].lo) ||
        !std::isfinite(bounds[a].hi)) {
      throw GridError("degenerate interval on axis " + std::to_string(a));
    }
    if (n_cells[a] < 4) {
      throw GridError("n_cells must be at least 4 on axis " + std::to_string(a));
    }
    lo_[a] = bounds[a].lo;
    hi_[a] = bounds[a].hi;
    n_cells_[a] = n_cells[a];
    h_[a] = (hi_[a] - lo_[a]) / n_cells[a];
    total *= static_cast<double>(n_cells[a] + 1);
  }
  if (total >= 1e8) throw GridError("grid has too many nodes");
  for (int a = dim; a < kMaxDim; ++a) n_cells_[a] = 0;
  std::size_t s = 1;
  for (int a = 0; a < kMaxDim; ++a) {
    stride_[a] = s;
    s *= static_cast<std::size_t>(nodes_along(a));
  }
  count_ = s;
}

double Grid::h_max() const {
  double m = 0.0;
  for (int a = 0; a < dim_; ++a) m = std::max(m, h_[a]);
  return m;
}

std::size_t Grid::flat(const Index& ijk) const {
  std::size_t f = 0;
  for (int a = 0; a < dim_; ++a) f += static_cast<std::size_t>(ijk[a]) * stride_[a];
  return f;
}

Index Grid::unflat(std::size_t flat_index) const {
  Index ijk{};
  for (int a = 0; a < dim_; ++a) {
    ijk[a] = static_cast<int>((flat_index / stride_[a]) % nodes_along(a));
  }
  return ijk;
}

Vec Grid::point(const Index& ijk) const {
  Vec x{};
  for (int a = 0; a < dim_; ++a) x[a] = lo_[a] + ijk[a] * h_[a];
  return x;
}

Vec Grid::point(std::size_t flat_index) const { return point(unflat(flat_index)); }

bool Grid::is_boundary(std::size_t flat_index) const { return !is_interior(flat_index, 1); }

bool Grid::is_interior(std::size_t flat_index, int layers) const {
  const Index ijk = unflat(flat_index);
  for (int a = 0; a < dim_; ++a) {
    if (ijk[a] < layers || ijk[a] > n_cells_[a] - layers) return false;
  }
  return true;
}

double Grid::distance_to_boundary(std::size_t flat_index) const {
  const Vec x = point(flat_index);
  double d = std::numeric_limits<double>::infinity();
  for (int a = 0; a < dim_; ++a) d = std::min({d, x[a] - lo_[a], hi_[a] - x[a]});
  return d;
}

std::size_t Grid::nearest(const Vec& x) const {
  Index ijk{};
  for (int a = 0; a < dim_; ++a) {
    const long k = std::lround((x[a] - lo_[a]) / h_[a]);
    ijk[a] = static_cast<int>(std::clamp<long>(k, 0, n_cells_[a]));
  }
  return flat(ijk);
}

double Grid::cell_volume() const {
  double v = 1.0;
  for (int a = 0; a < dim_; ++a) v *= h_[a];
  return v;
}

double Grid::domain_volume() const {
  double v = 1.0;
  for (int a = 0; a < dim_; ++a) v *= hi_[a] - lo_[a];
  return v;
}

double Grid::diameter() const {
  double s = 0.0;
  for (int a = 0; a < dim_; ++a) s += (hi_[a] - lo_[a]) * (hi_[a] - lo_[a]);
  return std::sqrt(s);
}

bool Grid::operator==(const Grid& o) const {
  if (dim_ != o.dim_) return false;
  for (int a = 0; a < dim_; ++a) {
    if (lo_[a] != o.lo_[a] || hi_[a] != o.hi_[a] || n_cells_[a] != o.n_cells_[a]) return false;
  }
  return true;
}

Grid make_grid(int dim, std::span<const Interval> bounds, std::span<const int> n_cells) {
  return Grid(dim, bounds, n_cells);
}

Grid make_grid(int dim, std::initializer_list<Interval> bounds,
               std::initializer_list<int> n_cells) {
  return Grid(dim, std::span<const Interval>(bounds.begin(), bounds.size()),
              std::span<const int>(n_cells.begin(), n_cells.size()));
}

ScalarField::ScalarField(Grid g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
  if (values.size() != grid.node_count()) throw GridError("field size does not match grid");
}

ScalarField::ScalarField(Grid g, double fill) : grid(std::move(g)), values(grid.node_count(), fill) {}

std::vector<bool> ScalarField::boundary_mask() const {
  std::vector<bool> mask(size());
  for (std::size_t i = 0; i < size(); ++i) mask[i] = grid.is_boundary(i);
  return mask;
}

ScalarField sample(const Grid& grid, const std::function<double(const Vec&)>& f) {
  std::vector<double> v(grid.node_count());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(grid.point(i));
  return ScalarField(grid, std::move(v));
}

namespace {

std::size_t shifted(const Grid& g, std::size_t node, int axis, int step) {
  Index ijk = g.unflat(node);
  ijk[axis] += step;
  return g.flat(ijk);
}

}  // namespace

Vec gradient_fd(const ScalarField& u, std::size_t node) {
  const Grid& g = u.grid;
  if (!g.is_interior(node)) throw GridError("gradient_fd requires an interior node");
  Vec d{};
  for (int a = 0; a < g.dim(); ++a) {
    d[a] = (u[shifted(g, node, a, 1)] - u[shifted(g, node, a, -1)]) / (2.0 * g.h(a));
  }
  return d;
}

Mat hessian_fd(const ScalarField& u, std::size_t node) {
  const Grid& g = u.grid;
  if (!g.is_interior(node)) throw GridError("hessian_fd requires a full stencil");
  Mat m{};
  const int n = g.dim();
  const double c = u[node];
  for (int a = 0; a < n; ++a) {
    m[a][a] = (u[shifted(g, node, a, 1)] - 2.0 * c + u[shifted(g, node, a, -1)]) / (g.h(a) * g.h(a));
    for (int b = a + 1; b < n; ++b) {
      Index ijk = g.unflat(node);
      auto at = [&](int sa, int sb) {
        Index k = ijk;
        k[a] += sa;
        k[b] += sb;
        return u[g.flat(k)];
      };
      const double mixed = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * g.h(a) * g.h(b));
      m[a][b] = mixed;
      m[b][a] = mixed;
    }
  }
  return m;
}

Vec gradient_full(const ScalarField& u, std::size_t node) {
  const Grid& g = u.grid;
  const Index ijk = g.unflat(node);
  Vec d{};
  for (int a = 0; a < g.dim(); ++a) {
    const double h = g.h(a);
    if (ijk[a] == 0) {
      d[a] = (-3.0 * u[node] + 4.0 * u[shifted(g, node, a, 1)] - u[shifted(g, node, a, 2)]) / (2.0 * h);
    } else if (ijk[a] == g.cells(a)) {
      d[a] = (3.0 * u[node] - 4.0 * u[shifted(g, node, a, -1)] + u[shifted(g, node, a, -2)]) / (2.0 * h);
    } else {
      d[a] = (u[shifted(g, node, a, 1)] - u[shifted(g, node, a, -1)]) / (2.0 * h);
    }
  }
  return d;
}

double quadrature_weight(const Grid& grid, std::size_t node) {
  const Index ijk = grid.unflat(node);
  double w = 1.0;
  for (int a = 0; a < grid.dim(); ++a) {
    w *= grid.h(a);
    if (ijk[a] == 0 || ijk[a] == grid.cells(a)) w *= 0.5;
  }
  return w;
}

double integrate(const ScalarField& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += quadrature_weight(f.grid, i) * f[i];
  return s;
}

bool stencil_in_mask(const Grid& g, const std::vector<bool>& mask, std::size_t node) {
  if (!g.is_interior(node)) return false;
  if (mask.empty()) return true;
  const Index ijk = g.unflat(node);
  const int n = g.dim();
  int total = 1;
  for (int a = 0; a < n; ++a) total *= 3;
  for (int c = 0; c < total; ++c) {
    Index k = ijk;
    int code = c;
    for (int a = 0; a < n; ++a) {
      k[a] += code % 3 - 1;
      code /= 3;
    }
    if (!mask[g.flat(k)]) return false;
  }
  return true;
}

double norm(const Vec& v, int dim) { return std::sqrt(dot(v, v, dim)); }

double dot(const Vec& a, const Vec& b, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += a[i] * b[i];
  return s;
}

Vec mat_vec(const Mat& m, const Vec& v, int dim) {
  Vec r{};
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) r[i] += m[i][j] * v[j];
  }
  return r;
}

double trace(const Mat& m, int dim) {
  double t = 0.0;
  for (int i = 0; i < dim; ++i) t += m[i][i];
  return t;
}

double max_eigenvalue(const Mat& m, int dim) {
  if (dim == 1) return m[0][0];
  Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) a(i, j) = m[i][j];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.topLeftCorner(dim, dim),
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double TestFunction::value(const Vec& x) const {
  double r2 = 0.0;
  for (int a = 0; a < dim; ++a) r2 += (x[a] - center[a]) * (x[a] - center[a]);
  const double s2 = r2 / (radius * radius);
  if (s2 >= 1.0) return 0.0;
  return height * std::exp(1.0 - 1.0 / (1.0 - s2));
}

Vec TestFunction::gradient(const Vec& x) const {
  Vec gr{};
  double r2 = 0.0;
  for (int a = 0; a < dim; ++a) r2 += (x[a] - center[a]) * (x[a] - center[a]);
  const double s2 = r2 / (radius * radius);
  if (s2 >= 1.0) return gr;
  const double t = 1.0 - s2;
  // d/dx exp(1 - 1/t) = exp(1 - 1/t) * (-1/t^2) * 2 (x - c) / radius^2
  const double f = height * std::exp(1.0 - 1.0 / t) * (-2.0 / (t * t * radius * radius));
  for (int a = 0; a < dim; ++a) gr[a] = f * (x[a] - center[a]);
  return gr;
}

bool TestFunction::in_support(const Vec& x) const {
  double r2 = 0.0;
  for (int a = 0; a < dim; ++a) r2 += (x[a] - center[a]) * (x[a] - center[a]);
  return r2 < radius * radius;
}

double TestFunction::l1_norm(const Grid& grid) const {
  double s = 0.0;
  for (std::size_t i = 0; i < grid.node_count(); ++i) {
    s += quadrature_weight(grid, i) * value(grid.point(i));
  }
  return s;
}

double TestFunction::gradient_l1_norm(const Grid& grid) const {
  double s = 0.0;
  for (std::size_t i = 0; i < grid.node_count(); ++i) {
    s += quadrature_weight(grid, i) * norm(gradient(grid.point(i)), dim);
  }
  return s;
}

TestFunction make_bump(const Grid& grid, const Vec& center, double radius, double height) {
  if (!(radius > 0.0)) throw GridError("bump radius must be positive");
  if (!(height >= 0.0)) throw GridError("bump height must be nonnegative");
  for (int a = 0; a < grid.dim(); ++a) {
    if (center[a] - radius <= grid.lo(a) || center[a] + radius >= grid.hi(a)) {
      throw GridError("bump support must lie strictly inside the domain");
    }
  }
  TestFunction t;
  t.center = center;
  for (int a = grid.dim(); a < kMaxDim; ++a) t.center[a] = 0.0;
  t.radius = radius;
  t.height = height;
  t.dim = grid.dim();
  return t;
}

}  // namespace pxl
