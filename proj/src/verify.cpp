#include "pxlap/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "pxlap/operator.hpp"

namespace pxl {

namespace {

// Calls f(neighbour) for every node within Chebyshev distance `radius`.
template <typename F>
void for_each_in_box(const Grid& g, std::size_t node, int radius, F&& f) {
  const Index c = g.unflat(node);
  Index lo{};
  Index hi{};
  for (int a = 0; a < kMaxDim; ++a) {
    if (a < g.dim()) {
      lo[a] = std::max(0, c[a] - radius);
      hi[a] = std::min(g.cells(a), c[a] + radius);
    } else {
      lo[a] = hi[a] = 0;
    }
  }
  Index k{};
  for (k[2] = lo[2]; k[2] <= hi[2]; ++k[2]) {
    for (k[1] = lo[1]; k[1] <= hi[1]; ++k[1]) {
      for (k[0] = lo[0]; k[0] <= hi[0]; ++k[0]) f(g.flat(k));
    }
  }
}

std::string point_str(const Vec& x, int n) {
  std::ostringstream os;
  os << "(";
  for (int a = 0; a < n; ++a) os << (a ? ", " : "") << x[a];
  os << ")";
  return os.str();
}

}  // namespace

ScalarField lsc_regularize(const ScalarField& u) {
  const Grid& g = u.grid;
  ScalarField eroded(g, 0.0);
  for (std::size_t i = 0; i < u.size(); ++i) {
    double m = u[i];
    for_each_in_box(g, i, 1, [&](std::size_t j) { m = std::min(m, u[j]); });
    eroded[i] = m;
  }
  ScalarField opened(g, 0.0);
  for (std::size_t i = 0; i < u.size(); ++i) {
    double m = eroded[i];
    for_each_in_box(g, i, 1, [&](std::size_t j) { m = std::max(m, eroded[j]); });
    opened[i] = m;
  }
  return opened;
}

ScalarField truncate_above(const ScalarField& u, double k) {
  ScalarField out = u;
  for (double& v : out.values) v = std::min(v, k);
  return out;
}

double percentile(const ScalarField& u, double q) {
  std::vector<double> v = u.values;
  std::sort(v.begin(), v.end());
  const double rank = std::ceil(q / 100.0 * static_cast<double>(v.size()));
  const std::size_t idx = static_cast<std::size_t>(std::clamp(rank, 1.0, double(v.size()))) - 1;
  return v[idx];
}

std::vector<TestFunction> bump_dictionary(const Grid& g, int count, std::uint64_t seed,
                                          const std::vector<bool>& valid) {
  const int n = g.dim();
  std::vector<bool> admissible(g.node_count(), false);
  Vec lo{};
  Vec hi{};
  for (int a = 0; a < n; ++a) {
    lo[a] = INFINITY;
    hi[a] = -INFINITY;
  }
  bool any = false;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    if (!stencil_in_mask(g, valid, i)) continue;
    admissible[i] = true;
    any = true;
    const Vec x = g.point(i);
    for (int a = 0; a < n; ++a) {
      lo[a] = std::min(lo[a], x[a]);
      hi[a] = std::max(hi[a], x[a]);
    }
  }
  if (!any) throw GridError("no admissible nodes for test functions");
  double extent = INFINITY;
  for (int a = 0; a < n; ++a) extent = std::min(extent, hi[a] - lo[a]);
  if (!(extent > 4.0 * g.h_max())) throw GridError("admissible region too small for test functions");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<TestFunction> out;
  for (int attempt = 0; static_cast<int>(out.size()) < count; ++attempt) {
    if (attempt > 100 * count) throw GridError("could not place test functions");
    const double r = (0.15 + 0.3 * unit(rng)) * extent;
    Vec c{};
    for (int a = 0; a < n; ++a) c[a] = lo[a] + r + (hi[a] - lo[a] - 2.0 * r) * unit(rng);
    const double height = 0.5 + unit(rng);
    TestFunction psi = make_bump(g, c, r, height);
    bool ok = true;
    for (std::size_t i = 0; i < g.node_count() && ok; ++i) {
      if (psi.in_support(g.point(i)) && !admissible[i]) ok = false;
    }
    if (ok) out.push_back(psi);
  }
  return out;
}

Verdict test_weak_supersolution(const ScalarField& u, const ExponentField& p,
                                const WeakTestOptions& opts) {
  if (opts.n_tests < 1) throw GridError("weak test needs n_tests >= 1");
  const int n = u.grid.dim();
  const WeakForm form(u, p);
  Verdict v;
  v.tolerance = opts.tol;
  for (const TestFunction& psi : bump_dictionary(u.grid, opts.n_tests, opts.seed, opts.valid)) {
    const double res = form.residual(psi, opts.valid);
    std::ostringstream w;
    w << "bump center " << point_str(psi.center, n) << " radius " << psi.radius << " height "
      << psi.height << ": residual " << res;
    v.record(res, w.str());
  }
  return v.finalize();
}

bool touches_from_below(const ScalarField& u, const Paraboloid& phi, int window,
                        const std::vector<bool>& valid) {
  const Grid& g = u.grid;
  const int n = g.dim();
  const Vec x0 = g.point(phi.vertex);
  const double slack = 1e-12 * (1.0 + std::abs(u[phi.vertex]));
  bool ok = true;
  for_each_in_box(g, phi.vertex, window, [&](std::size_t j) {
    if (!ok || j == phi.vertex) return;
    if (!valid.empty() && !valid[j]) return;
    const Vec x = g.point(j);
    Vec d{};
    for (int a = 0; a < n; ++a) d[a] = x[a] - x0[a];
    const double val = phi.value + dot(phi.slope, d, n) + 0.5 * dot(mat_vec(phi.curvature, d, n), d, n);
    if (!(val < u[j] + slack)) ok = false;
  });
  return ok;
}

namespace {

std::vector<Vec> candidate_slopes(const ScalarField& u, std::size_t node) {
  const Grid& g = u.grid;
  const int n = g.dim();
  const Index k = g.unflat(node);
  Vec fwd{};
  Vec bwd{};
  for (int a = 0; a < n; ++a) {
    Index kp = k;
    Index km = k;
    kp[a] += 1;
    km[a] -= 1;
    fwd[a] = (u[g.flat(kp)] - u[node]) / g.h(a);
    bwd[a] = (u[node] - u[g.flat(km)]) / g.h(a);
  }
  std::vector<Vec> out;
  out.push_back(gradient_fd(u, node));
  // Per-axis choices from the one-sided hull.
  constexpr double kMix[] = {0.0, 0.25, 0.75, 1.0};
  int combos = 1;
  for (int a = 0; a < n; ++a) combos *= 4;
  for (int c = 0; c < combos; ++c) {
    Vec s{};
    int code = c;
    for (int a = 0; a < n; ++a) {
      const double lam = kMix[code % 4];
      code /= 4;
      s[a] = lam * fwd[a] + (1.0 - lam) * bwd[a];
    }
    out.push_back(s);
  }
  // Small probes around the central slope.
  const Vec central = out.front();
  for (int a = 0; a < n; ++a) {
    for (double sign : {-1.0, 1.0}) {
      Vec s = central;
      s[a] += sign * g.h(a);
      out.push_back(s);
    }
  }
  return out;
}

Mat identity(int n, double scale) {
  Mat m{};
  for (int a = 0; a < n; ++a) m[a][a] = scale;
  return m;
}

}  // namespace

Verdict test_viscosity_supersolution(const ScalarField& u, const ExponentField& p,
                                     const ViscosityTestOptions& opts) {
  const Grid& g = u.grid;
  const int n = g.dim();
  std::vector<std::size_t> nodes;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    if (stencil_in_mask(g, opts.valid, i)) nodes.push_back(i);
  }
  if (opts.max_nodes > 0 && static_cast<int>(nodes.size()) > opts.max_nodes) {
    std::mt19937_64 rng(opts.seed);
    std::shuffle(nodes.begin(), nodes.end(), rng);
    nodes.resize(opts.max_nodes);
    std::sort(nodes.begin(), nodes.end());
  }

  // Dyadic ladder reaching curvatures that dominate any nodal second difference.
  const double h = g.h_max();
  std::vector<double> ladder;
  const int k_max = static_cast<int>(std::ceil(std::log2(64.0 / (h * h))));
  for (int k = -8; k <= k_max; ++k) ladder.push_back(std::ldexp(1.0, k));

  Verdict v;
  v.tolerance = opts.tol;
  for (std::size_t node : nodes) {
    const Vec x0 = g.point(node);
    const double px = p(x0);
    const Vec dp = p.gradient(x0);
    const Mat hess = hessian_fd(u, node);
    Paraboloid phi;
    phi.vertex = node;
    phi.value = u[node];
    auto consider = [&](const Vec& s, const Mat& m, const char* family, double t) {
      phi.slope = s;
      phi.curvature = m;
      if (!touches_from_below(u, phi, opts.window, opts.valid)) return false;
      const double val = evaluate_jet(s, m, px, dp, n).total;
      if (val < v.margin || v.n_tests == 0) {
        std::ostringstream w;
        w << "vertex " << point_str(x0, n) << " slope " << point_str(s, n) << " curvature "
          << family << " t=" << t << ": -Delta_p phi = " << val;
        v.record(val, w.str());
      } else {
        ++v.n_tests;
      }
      return true;
    };
    for (const Vec& s : candidate_slopes(u, node)) {
      const double sn = norm(s, n);
      if (sn == 0.0) continue;
      // Families whose operator value grows with t: keep the smallest touching t.
      Mat rank_one_dir{};
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) rank_one_dir[a][b] = s[a] * s[b] / (sn * sn);
      for (double t : ladder) {
        Mat m = hess;
        for (int a = 0; a < n; ++a) m[a][a] -= t;
        if (consider(s, m, "D2u - tI", t)) break;
      }
      for (double t : ladder) {
        Mat m = hess;
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) m[a][b] -= t * rank_one_dir[a][b];
        if (consider(s, m, "D2u - t ss^T", t)) break;
      }
      for (double t : ladder) {
        if (consider(s, identity(n, -t), "-tI", t)) break;
      }
      // Operator value decreases with t: keep the largest touching t.
      for (auto it = ladder.rbegin(); it != ladder.rend(); ++it) {
        if (consider(s, identity(n, *it), "+tI", *it)) break;
      }
    }
  }
  return v.finalize();
}

Verdict test_comparison(const ScalarField& u, const ExponentField& p,
                        const ComparisonTestOptions& opts) {
  const Grid& g = u.grid;
  const int n = g.dim();
  Verdict v;
  v.tolerance = opts.tol;
  for (int a = 0; a < n; ++a) {
    if (g.cells(a) < 6) throw GridError("comparison test needs at least 6 cells per axis");
  }
  std::mt19937_64 rng(opts.seed);
  for (int s = 0; s < opts.n_subdomains; ++s) {
    std::array<Interval, kMaxDim> bounds{};
    std::array<int, kMaxDim> cells{};
    Index first{};
    for (int a = 0; a < n; ++a) {
      const int max_cells = g.cells(a) - 2;
      const int min_cells = std::min(max_cells, std::max(4, g.cells(a) / 4));
      const int hi_cells = std::max(min_cells, std::min(max_cells, 3 * g.cells(a) / 4));
      cells[a] = std::uniform_int_distribution<int>(min_cells, hi_cells)(rng);
      first[a] = std::uniform_int_distribution<int>(1, g.cells(a) - 1 - cells[a])(rng);
      bounds[a] = {g.lo(a) + first[a] * g.h(a), g.lo(a) + (first[a] + cells[a]) * g.h(a)};
    }
    const Grid sub = make_grid(n, std::span<const Interval>(bounds.data(), n),
                               std::span<const int>(cells.data(), n));
    ScalarField data(sub, 0.0);
    auto parent = [&](std::size_t j) {
      Index k = sub.unflat(j);
      for (int a = 0; a < n; ++a) k[a] += first[a];
      return g.flat(k);
    };
    for (std::size_t j = 0; j < sub.node_count(); ++j) data[j] = u[parent(j)];
    const ExponentField p_sub(p.expression(), sub, p.source());
    const SolveReport r = solve_dirichlet(p_sub, data, opts.solve);
    std::ostringstream box;
    box << "box ";
    for (int a = 0; a < n; ++a) box << (a ? " x " : "") << "[" << bounds[a].lo << ", " << bounds[a].hi << "]";
    if (!r.converged) {
      v.record(-INFINITY, box.str() + ": solver did not converge (" + r.diagnostic + ")");
      continue;
    }
    double worst = INFINITY;
    std::size_t at = 0;
    for (std::size_t j = 0; j < sub.node_count(); ++j) {
      const double d = u[parent(j)] - r.u[j];
      if (d < worst) {
        worst = d;
        at = j;
      }
    }
    v.record(worst, box.str() + ": min(u - v) at " + point_str(sub.point(at), n));
  }
  return v.finalize();
}

ClassifierTolerances default_tolerances(const ScalarField& u) {
  double sup = 0.0;
  for (double x : u.values) sup = std::max(sup, std::abs(x));
  const double scale = 1.0 + sup;
  const double h = u.grid.h_max();
  return {1e-6 * scale, h * scale, 10.0 * h * h * scale};
}

namespace {

double sup_abs(const ScalarField& u) {
  double m = 0.0;
  for (double x : u.values) m = std::max(m, std::abs(x));
  return m;
}

Stage make_stage(std::string name, bool passed, double margin, std::string detail) {
  Stage s;
  s.name = std::move(name);
  s.passed = passed;
  s.margin = margin;
  s.detail = std::move(detail);
  return s;
}

std::string eps_tag(double eps) {
  std::ostringstream os;
  os << "eps=" << eps;
  return os.str();
}

// Envelope stages for one fixture; returns false if any stage fails.
bool run_pipeline(const ScalarField& u, const ExponentField& p, CaseTag tag,
                  const EquivalenceOptions& opts, std::vector<Stage>& stages) {
  const Grid& g = u.grid;
  const int n = g.dim();
  const double h = g.h_max();
  const double scale = 1.0 + sup_abs(u);
  bool ok = true;
  auto push = [&](Stage st) {
    ok = ok && st.passed;
    stages.push_back(std::move(st));
  };

  std::vector<double> eps = opts.eps_schedule;
  std::sort(eps.begin(), eps.end(), std::greater<>());
  const ScalarField* prev = nullptr;
  std::vector<bool> prev_domain;
  double prev_gap = INFINITY;
  std::vector<InfConvResult> envelopes;
  envelopes.reserve(eps.size());

  for (double e : eps) {
    const Kernel k = tag == CaseTag::Degenerate ? make_kernel(2.0, e, KernelVariant::Degenerate)
                                                : make_kernel(opts.q, e, KernelVariant::Singular);
    if (tag == CaseTag::Singular) validate_kernel_for_exponent(k, p.p_plus());
    std::optional<InfConvResult> env;
    try {
      env = inf_convolve(u, k);
    } catch (const InfConvError& err) {
      push(make_stage("envelope " + eps_tag(e), false, -INFINITY, err.what()));
      continue;
    }
    InfConvResult& r = *env;
    const std::string tagstr = " " + eps_tag(e);

    // Monotone approach: u_eps <= u, increasing as eps decreases, gap shrinking.
    double below = INFINITY;
    double mono = INFINITY;
    double gap = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (!r.domain[i]) continue;
      below = std::min(below, u[i] - r.u_eps[i]);
      gap = std::max(gap, u[i] - r.u_eps[i]);
      if (prev != nullptr && prev_domain[i]) mono = std::min(mono, r.u_eps[i] - (*prev)[i]);
    }
    {
      const bool pass = below >= -1e-12 && mono >= -1e-12 && gap <= prev_gap + 1e-12;
      std::ostringstream d;
      d << "min(u - u_eps) = " << below << ", min(u_eps - u_prev) = " << mono
        << ", sup gap = " << gap;
      Stage st = make_stage("monotone approach" + tagstr, pass, std::min(below, mono), d.str());
      st.constants = {{"eps", e}, {"w", k.w}, {"q", k.q}, {"r_eps", r.r_eps}, {"sup_gap", gap}};
      push(std::move(st));
    }
    prev_gap = gap;

    {
      const SemiconcavityCheck sc = check_semiconcave(r);
      std::ostringstream d;
      d << "lambda_max(D2(u_eps - C|x|^2)) = " << sc.max_eig << " over " << sc.nodes_tested
        << " nodes";
      Stage st = make_stage("semiconcavity" + tagstr, sc.holds, 10.0 * h - sc.max_eig, d.str());
      st.constants = {{"C", r.C}, {"h", h}};
      push(std::move(st));
    }

    const std::vector<TestFunction> bumps = bump_dictionary(g, opts.n_bumps, opts.seed, r.domain);

    if (tag == CaseTag::Degenerate) {
      for (int j : opts.mollifier_j) {
        if (1.0 / j < 2.0 * h) continue;
        std::optional<MollifiedField> mollified;
        try {
          mollified = mollify_concave_part(r, j);
        } catch (const InfConvError& err) {
          push(make_stage("mollify j=" + std::to_string(j) + tagstr, false, -INFINITY, err.what()));
          continue;
        }
        const MollifiedField& mj = *mollified;
        const std::string jt = " j=" + std::to_string(j) + tagstr;
        std::vector<TestFunction> mb;
        try {
          mb = bump_dictionary(g, opts.n_bumps, opts.seed + 1, mj.domain);
        } catch (const GridError&) {
          continue;  // mollified domain too small on this grid
        }
        // Certificate: -Delta_p u_{eps,j} >= bound on supp psi.
        double cert_margin = INFINITY;
        bool cert_ok = true;
        Certificate worst;
        for (const TestFunction& psi : mb) {
          const Certificate c = certify_degenerate(mj, k, p, psi);
          const double m = c.observed_min - (c.bound - c.slack);
          cert_ok = cert_ok && c.holds;
          if (m < cert_margin) {
            cert_margin = m;
            worst = c;
          }
        }
        Stage cs = make_stage("degenerate certificate" + jt, cert_ok, cert_margin, worst.diagnostic);
        cs.constants = worst.constants;
        cs.constants["bound"] = worst.bound;
        cs.constants["observed_min"] = worst.observed_min;
        push(std::move(cs));

        // Integration by parts: strong and weak pairings agree to O(h).
        double c_ibp = 0.0;
        for (const TestFunction& psi : mb) {
          const double strong = strong_residual_integral(mj.values, p, psi, mj.domain);
          const double weak = weak_residual(mj.values, p, psi, mj.domain);
          const double norm_psi = psi.l1_norm(g) + psi.gradient_l1_norm(g);
          c_ibp = std::max(c_ibp, std::abs(strong - weak) / (h * norm_psi * scale));
        }
        std::ostringstream d;
        d << "max |strong - weak| / (h ||psi||_{W11} scale) = " << c_ibp;
        Stage is = make_stage("integration by parts" + jt, c_ibp <= 10.0, 10.0 - c_ibp, d.str());
        is.constants = {{"C_ibp", c_ibp}};
        push(std::move(is));
      }
    } else {
      const double kappa_hat = p.certified_bounds().kappa;
      for (double delta : opts.delta_schedule) {
        std::ostringstream dt;
        dt << " delta=" << delta << tagstr;
        double reg_min = INFINITY;
        for (const TestFunction& psi : bumps) {
          reg_min = std::min(reg_min, regularized_weak_residual(r.u_eps, p, psi, delta, r.domain));
        }
        const double reg_tol = 10.0 * h * h * scale;
        Stage rs = make_stage("regularized weak residual" + dt.str(), reg_min >= -reg_tol, reg_min,
                              "min over bumps of the regularized weak residual");
        rs.constants = {{"delta", delta}, {"tolerance", reg_tol}};
        push(std::move(rs));

        int nodes = 0;
        int failed = 0;
        double margin = INFINITY;
        std::string worst;
        for (std::size_t i = 0; i < g.node_count(); ++i) {
          if (!r.stencil_in_domain(i)) continue;
          const Certificate c = lower_bound_singular(r, p, i, delta, kappa_hat);
          ++nodes;
          if (!c.holds) ++failed;
          const double m = c.observed_min - (c.bound - c.slack);
          if (m < margin) {
            margin = m;
            worst = c.diagnostic;
          }
        }
        std::ostringstream d;
        d << failed << " of " << nodes << " nodes fail; worst: " << worst;
        Stage ss = make_stage("singular certificates" + dt.str(), failed == 0, margin, d.str());
        ss.constants = {{"delta", delta}, {"kappa_hat", kappa_hat}, {"eps", e}, {"q", k.q}};
        push(std::move(ss));
      }
    }

    // The envelope itself is a weak supersolution.
    {
      const WeakForm form(r.u_eps, p);
      double m = INFINITY;
      for (const TestFunction& psi : bumps) m = std::min(m, form.residual(psi, r.domain));
      // The envelope is a supersolution only up to P1 interpolation error.
      const double tol = 10.0 * h * h * scale;
      Stage st = make_stage("weak inequality for u_eps" + tagstr, m >= -tol, m,
                            "min over bumps of weak_residual(u_eps)");
      st.constants = {{"tolerance", tol}};
      push(std::move(st));
    }
    envelopes.push_back(std::move(r));
    prev = &envelopes.back().u_eps;
    prev_domain = envelopes.back().domain;
  }
  (void)n;
  return ok;
}

}  // namespace

EquivalenceReport equivalence_experiment(const ExponentField& p,
                                         const std::vector<Fixture>& fixtures,
                                         const EquivalenceOptions& opts) {
  EquivalenceReport rep;
  rep.tag = classify_case(p.p_minus(), p.p_plus());
  if (rep.tag == CaseTag::Mixed) {
    throw ExponentError("equivalence experiment needs p_minus >= 2 or p_plus < 2; got p in [" +
                        std::to_string(p.p_minus()) + ", " + std::to_string(p.p_plus()) + "]");
  }
  rep.all_agree = true;
  rep.pipeline_passed = true;
  rep.designed_matches = true;
  for (const Fixture& f : fixtures) {
    const ExponentField pf(p.expression(), f.u.grid, p.source());
    FixtureOutcome out;
    out.name = f.name;
    out.designed_supersolution = f.supersolution;
    const ClassifierTolerances tol = default_tolerances(f.u);

    WeakTestOptions wo;
    wo.n_tests = opts.n_bumps;
    wo.tol = tol.weak;
    wo.seed = opts.seed;
    out.weak = test_weak_supersolution(f.u, pf, wo);

    ViscosityTestOptions vo;
    vo.tol = tol.viscosity;
    vo.seed = opts.seed;
    out.viscosity = test_viscosity_supersolution(f.u, pf, vo);

    ComparisonTestOptions co;
    co.n_subdomains = opts.n_subdomains;
    co.tol = tol.comparison;
    co.seed = opts.seed;
    out.comparison = test_comparison(f.u, pf, co);

    out.agree = out.weak.passed == out.viscosity.passed &&
                out.comparison.passed == out.viscosity.passed;
    if (out.viscosity.passed) out.pipeline_passed = run_pipeline(f.u, pf, rep.tag, opts, out.stages);

    rep.all_agree = rep.all_agree && out.agree;
    rep.pipeline_passed = rep.pipeline_passed && out.pipeline_passed;
    rep.designed_matches = rep.designed_matches && out.viscosity.passed == f.supersolution &&
                           out.weak.passed == f.supersolution;
    rep.fixtures.push_back(std::move(out));
  }
  return rep;
}

}  // namespace pxl
