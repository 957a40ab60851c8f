// Pointwise and weak-form evaluation of the p(x)-Laplacian
//   -div(|Du|^{p(x)-2} Du)
// together with the lower-bound certificates used for semiconcave envelopes.
#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "pxlap/exponent.hpp"
#include "pxlap/grid.hpp"
#include "pxlap/infconv.hpp"
#include "pxlap/spaces.hpp"

namespace pxl {

/// The nondivergence form is undefined where the gradient vanishes.
class UndefinedAtCriticalPoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// total = -(trace_term + infinity_term + log_term), with
///   trace_term    = |Du|^{p-2} tr D2u
///   infinity_term = (p-2) |Du|^{p-2} <D2u Du/|Du|, Du/|Du|>
///   log_term      = |Du|^{p-2} log|Du| <Dp, Du>
struct OperatorEval {
  double total = 0.0;
  double trace_term = 0.0;
  double infinity_term = 0.0;
  double log_term = 0.0;
  double grad_norm = 0.0;
};

OperatorEval evaluate_jet(const Vec& grad, const Mat& hess, double p, const Vec& dp, int dim);
OperatorEval nondiv_eval(const ScalarField& u, const ExponentField& p, std::size_t node);

/// Consistent: log((|Du|^2 + delta)^{1/2}), which is the exact divergence and
/// tends to the nondivergence form as delta -> 0. Squared: log(|Du|^2 + delta),
/// the literal form in which the singular-case certificate is stated.
enum class LogNormalization { Consistent, Squared };

double regularized_jet(const Vec& grad, const Mat& hess, double p, const Vec& dp, int dim,
                       double delta, LogNormalization log_norm = LogNormalization::Consistent);
double regularized_eval(const ScalarField& u, const ExponentField& p, std::size_t node,
                        double delta, LogNormalization log_norm = LogNormalization::Consistent);

/// Nondivergence value, extended by continuity to Du = 0 when p >= 2 there.
double nondiv_total_or_limit(const ScalarField& u, const ExponentField& p, std::size_t node);

/// Divergence of the flux |Du|^{p-2} Du by differences of staggered fluxes.
/// Needs two layers of interior nodes.
double flux_divergence(const ScalarField& u, const ExponentField& p, std::size_t node);

/// Weak form on the Kuhn triangulation with the P1 interpolant of psi:
/// sum over simplices of vol * <a(|G|) G, D(I psi)>, with G the simplex
/// gradient and p taken at the centroid. a(|G|) = |G|^{p-2}, replaced by
/// max(|G|, h)^{p-2} where p < 2, or by (|G|^2 + delta)^{(p-2)/2} when
/// delta > 0. The nodal vector is assembled once and paired with any psi.
class WeakForm {
 public:
  WeakForm(const ScalarField& u, const ExponentField& p, double delta = 0.0);
  /// `valid` (when non-empty) must contain the 1-ring of every node in supp psi.
  double residual(const TestFunction& psi, const std::vector<bool>& valid = {}) const;
  const std::vector<double>& nodal() const { return nodal_; }

 private:
  Grid grid_;
  std::vector<double> nodal_;
};

double weak_residual(const ScalarField& u, const ExponentField& p, const TestFunction& psi,
                     const std::vector<bool>& valid = {});
double regularized_weak_residual(const ScalarField& u, const ExponentField& p,
                                 const TestFunction& psi, double delta,
                                 const std::vector<bool>& valid = {});
/// Integral of (-Delta_p u) psi with the nondivergence form at nodes.
double strong_residual_integral(const ScalarField& u, const ExponentField& p,
                                const TestFunction& psi, const std::vector<bool>& valid = {});

struct Certificate {
  double bound = 0.0;
  double observed_min = 0.0;
  double slack = 0.0;
  bool holds = false;
  bool precondition_ok = true;
  int nodes = 0;
  std::string diagnostic;
  std::map<std::string, double> constants;
};

/// -C~^{p+ - 2} n (p+ + tau - 1) / scale with tau = scale log(C~) kappa C~.
/// `scale` is eps in the literal statement and w in the weight normalization.
double lower_bound_degenerate(double c_tilde, double kappa, double scale, double p_plus, int n);

struct DegenerateOptions {
  /// <= 0 selects 1.05 * max |Du| over the sweep, clamped below by 1 + 1e-6.
  double c_tilde = 0.0;
  /// <= 0 selects the certified exponent gradient bound, clamped likewise.
  double kappa = 0.0;
  Normalization normalization = Normalization::Weight;
};

/// Sweeps the nondivergence operator of a mollified envelope over supp psi
/// and compares its minimum with lower_bound_degenerate.
Certificate certify_degenerate(const MollifiedField& uj, const Kernel& k, const ExponentField& p,
                               const TestFunction& psi, const DegenerateOptions& opts = {});

/// ((q-1)/eps) |Du|^{(q-2)/(q-1)}: the Hessian bound of singular envelopes.
double singular_hessian_bound(const Kernel& k, double grad_norm);

/// -(n/eps) g^{(p+ + q - 4)/(q-1)} (q - 1 + p+ - 2 + C0 kappa_hat g^{1/(q-1)}),
/// C0 = eps log(g^2 + delta).
double singular_lower_bound(const Kernel& k, double grad_norm, double p_plus, int n, double delta,
                            double kappa_hat);

/// Certificate at a single node of a singular envelope. Where |Du_eps| <= h
/// it checks lambda_max(D2u_eps) <= 10 h instead.
Certificate lower_bound_singular(const InfConvResult& r, const ExponentField& p,
                                 std::size_t node, double delta, double kappa_hat);

}  // namespace pxl
