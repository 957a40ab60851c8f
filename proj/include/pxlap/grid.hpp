// Rectangular lattices over a box domain, node-sampled fields, finite
// differences, trapezoid quadrature and compactly supported bump functions.
#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pxl {

inline constexpr int kMaxDim = 3;

/// A point or vector in R^dim; unused trailing components are zero.
using Vec = std::array<double, kMaxDim>;
/// Symmetric matrix storage; only the leading dim x dim block is meaningful.
using Mat = std::array<Vec, kMaxDim>;
using Index = std::array<int, kMaxDim>;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

class GridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Grid {
 public:
  Grid(int dim, std::span<const Interval> bounds, std::span<const int> n_cells);

  int dim() const { return dim_; }
  double lo(int axis) const { return lo_[axis]; }
  double hi(int axis) const { return hi_[axis]; }
  double h(int axis) const { return h_[axis]; }
  /// Largest spacing over all axes.
  double h_max() const;
  int cells(int axis) const { return n_cells_[axis]; }
  int nodes_along(int axis) const { return axis < dim_ ? n_cells_[axis] + 1 : 1; }
  std::size_t node_count() const { return count_; }

  std::size_t flat(const Index& ijk) const;
  Index unflat(std::size_t flat_index) const;
  Vec point(std::size_t flat_index) const;
  Vec point(const Index& ijk) const;

  bool is_boundary(std::size_t flat_index) const;
  /// Nodes are at least `layers` steps away from every face.
  bool is_interior(std::size_t flat_index, int layers = 1) const;
  /// Euclidean distance from a node to the boundary of the box.
  double distance_to_boundary(std::size_t flat_index) const;
  /// Nearest node to an arbitrary point (clamped to the box).
  std::size_t nearest(const Vec& x) const;

  double cell_volume() const;
  double domain_volume() const;
  double diameter() const;

  bool operator==(const Grid& other) const;

 private:
  int dim_;
  Vec lo_{};
  Vec hi_{};
  Vec h_{};
  Index n_cells_{};
  std::array<std::size_t, kMaxDim> stride_{};
  std::size_t count_ = 0;
};

Grid make_grid(int dim, std::span<const Interval> bounds, std::span<const int> n_cells);
Grid make_grid(int dim, std::initializer_list<Interval> bounds,
               std::initializer_list<int> n_cells);

/// Node-sampled real function on a grid.
struct ScalarField {
  Grid grid;
  std::vector<double> values;

  ScalarField(Grid g, std::vector<double> v);
  ScalarField(Grid g, double fill);

  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  std::size_t size() const { return values.size(); }
  std::vector<bool> boundary_mask() const;
};

ScalarField sample(const Grid& grid, const std::function<double(const Vec&)>& f);

/// Central-difference gradient; throws GridError on boundary nodes.
Vec gradient_fd(const ScalarField& u, std::size_t node);
/// Second differences with mixed central differences off the diagonal.
Mat hessian_fd(const ScalarField& u, std::size_t node);
/// Central differences inside, second-order one-sided differences on faces.
Vec gradient_full(const ScalarField& u, std::size_t node);

/// Composite trapezoid rule, weight 1/2 per axis on boundary nodes.
double integrate(const ScalarField& f);
double quadrature_weight(const Grid& grid, std::size_t node);

/// Node is interior and its whole 3^dim neighbourhood is marked in `mask`
/// (an empty mask marks every node).
bool stencil_in_mask(const Grid& grid, const std::vector<bool>& mask, std::size_t node);

double norm(const Vec& v, int dim);
double dot(const Vec& a, const Vec& b, int dim);
Vec mat_vec(const Mat& m, const Vec& v, int dim);
double trace(const Mat& m, int dim);
/// Largest eigenvalue of the leading dim x dim block of a symmetric matrix.
double max_eigenvalue(const Mat& m, int dim);

/// Smooth nonnegative bump height * exp(1 - 1/(1 - s^2)), s = |x - c| / radius.
struct TestFunction {
  Vec center{};
  double radius = 0.0;
  double height = 0.0;
  int dim = 1;

  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  bool in_support(const Vec& x) const;
  /// Integral of the bump (trapezoid on the given grid).
  double l1_norm(const Grid& grid) const;
  /// Integral of |grad| (trapezoid on the given grid).
  double gradient_l1_norm(const Grid& grid) const;
};

TestFunction make_bump(const Grid& grid, const Vec& center, double radius, double height);

}  // namespace pxl
