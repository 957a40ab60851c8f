// Infimal convolution with the power kernels |x - y|^q / (q w), the sets of
// minimizers, and the semiconcavity / gradient certificates that go with it.
//
// Both kernel families are parameterized by a single weight w:
//   Degenerate: q = 2, w = eps^2
//   Singular:   q > 2, w = eps^{q-1}
// so that the effective radius r = (q w osc)^{1/q} and the semiconcavity
// constant C = 1 / (2 w) take one form for both.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "pxlap/grid.hpp"
#include "pxlap/verdict.hpp"

namespace pxl {

class InfConvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class KernelVariant { Degenerate, Singular };

struct Kernel {
  double q = 2.0;
  double eps = 0.1;
  KernelVariant variant = KernelVariant::Degenerate;
  double w = 0.01;

  /// |d|^q / (q w) given |d|^2.
  double value_sq(double dist2) const;
};

Kernel make_kernel(double q, double eps, KernelVariant variant);
/// Singular kernels additionally need q > p+ / (p+ - 1).
void validate_kernel_for_exponent(const Kernel& k, double p_plus);

double effective_radius(const Kernel& k, double osc);

/// Weight: C = 1 / (2 w). Epsilon: C = 1 / (2 eps), the literal constant
/// that agrees with Weight only when w = eps.
enum class Normalization { Weight, Epsilon };
double semiconcavity_constant(const Kernel& k, Normalization n = Normalization::Weight);

inline constexpr double kTieTolerance = 1e-9;

struct InfConvResult {
  ScalarField u;
  /// Envelope values on the shrunken domain; equal to u elsewhere.
  ScalarField u_eps;
  std::vector<bool> domain;
  Kernel kernel;
  double r_eps = 0.0;
  double C = 0.0;
  /// Minimizing nodes per domain node (ascending flat index).
  std::vector<std::vector<std::size_t>> minimizers;

  bool in_domain(std::size_t node) const { return domain[node]; }
  /// Node and its whole 3^dim neighbourhood lie in the domain.
  bool stencil_in_domain(std::size_t node) const;
  std::size_t domain_size() const;
};

/// u_eps(x) = min over nodes y with |x - y| <= r_eps of u(y) + k(x - y),
/// evaluated where dist(x, boundary) > r_eps.
InfConvResult inf_convolve(const ScalarField& u, const Kernel& k);

/// Same minimum taken over every node of the grid (reference path).
std::vector<double> inf_convolve_unrestricted(const ScalarField& u, const Kernel& k,
                                              const std::vector<bool>& at);

/// Nodes y with u(y) + k(x - y) <= u_eps(x) + tie_tol (absolute), searched
/// within `radius` of x.
std::vector<std::size_t> argmin_set(const ScalarField& u, const Kernel& k, std::size_t x,
                                    double tie_tol, double radius);

struct SemiconcavityCheck {
  double max_eig = 0.0;
  bool holds = false;
  std::size_t worst_node = 0;
  int nodes_tested = 0;
};

/// Largest eigenvalue of the discrete Hessian of u_eps - C|x|^2; holds when
/// it does not exceed 10 h.
SemiconcavityCheck check_semiconcave(const InfConvResult& r);

/// (|x - y| / eps)^{q-1} <= |Du_eps(x)| + 10 h for y in Y(x) at nodes where
/// the gradient is stable and the lattice resolves y to that accuracy, and
/// u_eps = u where |Du_eps| <= h.
Verdict check_gradient_bound(const InfConvResult& r);

/// Discrete closed-graph form of upper semicontinuity of
/// x -> max_{y in Y(x)} |y - x|.
Verdict check_upper_semicontinuity(const InfConvResult& r);

struct MollifiedField {
  ScalarField values;
  std::vector<bool> domain;
  double radius = 0.0;
};

/// (phi * eta_{1/j}) + C|x|^2 * eta_{1/j} with phi = u_eps - C|x|^2, i.e. u_eps * eta.
MollifiedField mollify_concave_part(const InfConvResult& r, int j);

}  // namespace pxl
