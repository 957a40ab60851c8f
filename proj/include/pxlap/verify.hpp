// Supersolution classifiers (weak, viscosity, comparison) and the experiment
// that checks they agree and that the envelope pipeline carries a viscosity
// supersolution to a weak one.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pxlap/exponent.hpp"
#include "pxlap/fixtures.hpp"
#include "pxlap/grid.hpp"
#include "pxlap/infconv.hpp"
#include "pxlap/solver.hpp"
#include "pxlap/verdict.hpp"

namespace pxl {

/// Morphological opening over the closed 1-ring (min filter, then max
/// filter). Dominated by u, idempotent, removes isolated raised nodes.
ScalarField lsc_regularize(const ScalarField& u);

ScalarField truncate_above(const ScalarField& u, double k);
/// Nearest-rank percentile of the nodal values, q in [0, 100].
double percentile(const ScalarField& u, double q);

/// Seeded random bumps whose support keeps a full stencil inside `valid`
/// (every interior node when empty). Radii are 0.15 to 0.5 of the smallest
/// extent of the admissible box.
std::vector<TestFunction> bump_dictionary(const Grid& g, int count, std::uint64_t seed,
                                          const std::vector<bool>& valid = {});

struct WeakTestOptions {
  int n_tests = 50;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  std::vector<bool> valid;
};

/// margin = min over bumps of weak_residual(u, p, psi).
Verdict test_weak_supersolution(const ScalarField& u, const ExponentField& p,
                                const WeakTestOptions& opts = {});

struct Paraboloid {
  std::size_t vertex = 0;
  double value = 0.0;
  Vec slope{};
  Mat curvature{};
};

/// phi < u + 1e-12 (1 + |u(x0)|) at every window node other than the vertex,
/// within Chebyshev radius `window` (clipped to the grid and to `valid`).
bool touches_from_below(const ScalarField& u, const Paraboloid& phi, int window,
                        const std::vector<bool>& valid = {});

struct ViscosityTestOptions {
  /// Number of interior nodes to test; 0 tests all of them.
  int max_nodes = 0;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  int window = 3;
  std::vector<bool> valid;
};

/// At each tested node, for each candidate slope (central, one-sided hulls,
/// small probes) and each curvature family (D2u - tI, D2u - t ss^T, -tI,
/// +tI with t on a dyadic ladder) keeps the extreme touching member and
/// evaluates -Delta_p phi at the vertex. margin = min over kept paraboloids.
Verdict test_viscosity_supersolution(const ScalarField& u, const ExponentField& p,
                                     const ViscosityTestOptions& opts = {});

struct ComparisonTestOptions {
  int n_subdomains = 6;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  SolveOptions solve{};
};

/// margin = min over random boxes D and nodes of D of (u - v), v the solution
/// on D with data u on the boundary of D.
Verdict test_comparison(const ScalarField& u, const ExponentField& p,
                        const ComparisonTestOptions& opts = {});

/// Default tolerances, with scale = 1 + sup|u|:
///   weak        1e-6 scale      (solver noise)
///   viscosity   h scale         (consistency of finite-difference jets)
///   comparison  10 h^2 scale    (P1 interpolation of a non-discrete field)
struct ClassifierTolerances {
  double weak = 0.0;
  double viscosity = 0.0;
  double comparison = 0.0;
};
ClassifierTolerances default_tolerances(const ScalarField& u);

struct Stage {
  std::string name;
  bool passed = false;
  double margin = 0.0;
  std::string detail;
  std::map<std::string, double> constants;
};

struct FixtureOutcome {
  std::string name;
  bool designed_supersolution = false;
  Verdict weak;
  Verdict viscosity;
  Verdict comparison;
  bool agree = false;
  /// Envelope pipeline, run when the viscosity test passes.
  std::vector<Stage> stages;
  bool pipeline_passed = true;
};

struct EquivalenceOptions {
  std::vector<double> eps_schedule{0.1, 0.05};
  /// Singular case only.
  std::vector<double> delta_schedule{1e-2, 1e-4, 1e-6};
  /// Kernel exponent for the singular case (the degenerate kernel has q = 2).
  double q = 4.0;
  std::vector<int> mollifier_j{8, 16};
  int n_bumps = 20;
  int n_subdomains = 4;
  std::uint64_t seed = 0;
};

struct EquivalenceReport {
  CaseTag tag = CaseTag::Degenerate;
  std::vector<FixtureOutcome> fixtures;
  bool all_agree = false;
  bool pipeline_passed = false;
  bool designed_matches = false;
  bool passed() const { return all_agree && pipeline_passed && designed_matches; }
};

/// Throws ExponentError for Mixed exponents.
EquivalenceReport equivalence_experiment(const ExponentField& p,
                                         const std::vector<Fixture>& fixtures,
                                         const EquivalenceOptions& opts = {});

}  // namespace pxl
