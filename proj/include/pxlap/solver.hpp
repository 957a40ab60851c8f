// Dirichlet problem for the homogeneous p(x)-Laplace equation, solved by
// minimizing the P1 energy on the Kuhn triangulation, and an independent 1D
// solution by flux constancy.
#pragma once

#include <utility>
#include <vector>

#include "pxlap/exponent.hpp"
#include "pxlap/grid.hpp"

namespace pxl {

/// Sum over simplices of vol * |G|^p / p with p at the centroid.
double energy(const ScalarField& u, const ExponentField& p);

enum class StepRule {
  /// Newton direction of the floored energy, Armijo backtracking.
  Newton,
  /// Lagged-diffusivity direction (weights frozen at the current iterate).
  LaggedDiffusivity,
};

struct SolveOptions {
  int max_iters = 200;
  /// Sup-norm of the nodal energy gradient divided by the nodal volume.
  double tol = 1e-9;
  StepRule step_rule = StepRule::Newton;
};

struct SolveReport {
  ScalarField u;
  /// (iteration, floored energy); the initial state is iteration 0.
  std::vector<std::pair<int, double>> energy_trace;
  double final_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string diagnostic;
};

/// Interior values of `boundary` are ignored. Where p < 2 and |G| < h the
/// energy density is the C^1 quadratic continuation of |G|^p / p, so the
/// diffusivity there is h^{p-2}. Starts from the p = 2 solution.
SolveReport solve_dirichlet(const ExponentField& p, const ScalarField& boundary,
                            const SolveOptions& opts = {});

/// u(x) = ua + int_a^x sign(c)|c|^{1/(p-1)} with c fixed by u(b) = ub;
/// composite Simpson with one panel per cell.
ScalarField solve_1d_oracle(const ExponentField& p, double a, double b, double ua, double ub,
                            int n);

/// Flux constant c of the 1D oracle.
double oracle_flux(const ExponentField& p, double a, double b, double ua, double ub, int n);

}  // namespace pxl
