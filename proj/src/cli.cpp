#include "pxlap/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pxlap/exponent.hpp"
#include "pxlap/fixtures.hpp"
#include "pxlap/operator.hpp"
#include "pxlap/spaces.hpp"
#include "pxlap/verify.hpp"

namespace pxl {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

ConfigError::ConfigError(const std::string& what, int line, int column)
    : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) + ", column " +
                                        std::to_string(column) + ")"
                                  : what),
      line_(line),
      column_(column) {}

Grid RunConfig::grid() const {
  if (static_cast<int>(bounds.size()) != dim || static_cast<int>(n_cells.size()) != dim) {
    throw ConfigError("domain.bounds and domain.n_cells must have dim entries");
  }
  return make_grid(dim, bounds, n_cells);
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

// ---------------------------------------------------------------- config

std::pair<int, int> line_col(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  int line = 1;
  int col = 1;
  for (std::size_t i = 0; i < offset; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

class ConfigReader {
 public:
  explicit ConfigReader(const std::string& text) : text_(text) {}

  [[noreturn]] void fail(const std::string& msg, const std::string& key) const {
    // Locate the key in the source for a useful position.
    const std::size_t at = key.empty() ? std::string::npos : text_.find("\"" + key + "\"");
    if (at == std::string::npos) throw ConfigError(msg);
    const auto [line, col] = line_col(text_, at);
    throw ConfigError(msg, line, col);
  }

  void check_keys(const json& obj, const std::string& where, std::set<std::string> allowed) const {
    if (!obj.is_object()) fail(where + " must be an object", where);
    for (const auto& [k, v] : obj.items()) {
      (void)v;
      if (!allowed.count(k)) fail("unknown key '" + k + "' in " + where, k);
    }
  }

  double number(const json& v, const std::string& key) const {
    if (!v.is_number()) fail("'" + key + "' must be a number", key);
    return v.get<double>();
  }
  int integer(const json& v, const std::string& key) const {
    if (!v.is_number_integer()) fail("'" + key + "' must be an integer", key);
    return v.get<int>();
  }
  std::string string(const json& v, const std::string& key) const {
    if (!v.is_string()) fail("'" + key + "' must be a string", key);
    return v.get<std::string>();
  }
  std::vector<double> numbers(const json& v, const std::string& key) const {
    if (!v.is_array() || v.empty()) fail("'" + key + "' must be a non-empty array of numbers", key);
    std::vector<double> out;
    for (const json& x : v) out.push_back(number(x, key));
    return out;
  }
  std::vector<int> integers(const json& v, const std::string& key) const {
    if (!v.is_array() || v.empty()) fail("'" + key + "' must be a non-empty array of integers", key);
    std::vector<int> out;
    for (const json& x : v) out.push_back(integer(x, key));
    return out;
  }

 private:
  const std::string& text_;
};

}  // namespace

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
    const auto [line, col] = line_col(text, byte);
    throw ConfigError(std::string("config parse error: ") + e.what(), line, col);
  }
  const ConfigReader rd(text);
  RunConfig cfg;
  rd.check_keys(doc, "config",
                {"domain", "exponent", "fixture", "kernel", "delta", "tolerances", "seed",
                 "output", "n_tests", "n_subdomains", "mollifier_j", "solve"});

  if (doc.contains("domain")) {
    const json& d = doc["domain"];
    rd.check_keys(d, "domain", {"dim", "bounds", "n_cells"});
    if (d.contains("dim")) cfg.dim = rd.integer(d["dim"], "dim");
    if (cfg.dim < 1 || cfg.dim > kMaxDim) rd.fail("dim must be 1, 2 or 3", "dim");
    cfg.bounds.assign(cfg.dim, Interval{0.0, 1.0});
    cfg.n_cells.assign(cfg.dim, 32);
    if (d.contains("bounds")) {
      const json& b = d["bounds"];
      if (!b.is_array() || static_cast<int>(b.size()) != cfg.dim) {
        rd.fail("bounds must list one [lo, hi] pair per dimension", "bounds");
      }
      for (int a = 0; a < cfg.dim; ++a) {
        const std::vector<double> iv = rd.numbers(b[a], "bounds");
        if (iv.size() != 2) rd.fail("each bounds entry must be [lo, hi]", "bounds");
        cfg.bounds[a] = {iv[0], iv[1]};
      }
    }
    if (d.contains("n_cells")) {
      cfg.n_cells = rd.integers(d["n_cells"], "n_cells");
      if (static_cast<int>(cfg.n_cells.size()) != cfg.dim) {
        rd.fail("n_cells must have one entry per dimension", "n_cells");
      }
    }
  }
  if (doc.contains("exponent")) cfg.exponent = rd.string(doc["exponent"], "exponent");
  if (doc.contains("fixture")) {
    const json& f = doc["fixture"];
    if (f.is_string()) {
      cfg.fixture = f.get<std::string>();
    } else {
      rd.check_keys(f, "fixture", {"name", "file"});
      if (f.contains("name")) cfg.fixture = rd.string(f["name"], "name");
      if (f.contains("file")) cfg.fixture_file = rd.string(f["file"], "file");
    }
    if (cfg.fixture_file.empty()) {
      const auto names = fixture_names();
      if (std::find(names.begin(), names.end(), cfg.fixture) == names.end()) {
        rd.fail("unknown fixture '" + cfg.fixture + "'", "fixture");
      }
    }
  }
  if (doc.contains("kernel")) {
    const json& k = doc["kernel"];
    rd.check_keys(k, "kernel", {"q", "eps", "variant"});
    if (k.contains("q")) cfg.q = rd.number(k["q"], "q");
    if (k.contains("eps")) cfg.eps = rd.numbers(k["eps"], "eps");
    if (k.contains("variant")) {
      const std::string v = rd.string(k["variant"], "variant");
      if (v == "degenerate") {
        cfg.variant = KernelVariant::Degenerate;
      } else if (v == "singular") {
        cfg.variant = KernelVariant::Singular;
      } else {
        rd.fail("variant must be 'degenerate' or 'singular'", "variant");
      }
    }
    for (double e : cfg.eps) {
      if (!(e > 0.0)) rd.fail("eps values must be positive", "eps");
    }
  }
  if (doc.contains("delta")) {
    cfg.delta = rd.numbers(doc["delta"], "delta");
    for (double d : cfg.delta) {
      if (!(d > 0.0)) rd.fail("delta values must be positive", "delta");
    }
  }
  if (doc.contains("mollifier_j")) cfg.mollifier_j = rd.integers(doc["mollifier_j"], "mollifier_j");
  if (doc.contains("tolerances")) {
    const json& t = doc["tolerances"];
    rd.check_keys(t, "tolerances", {"norm", "solve", "weak", "viscosity", "comparison"});
    if (t.contains("norm")) cfg.norm_tol = rd.number(t["norm"], "norm");
    if (t.contains("solve")) cfg.solve.tol = rd.number(t["solve"], "solve");
    if (t.contains("weak")) cfg.weak_tol = rd.number(t["weak"], "weak");
    if (t.contains("viscosity")) cfg.viscosity_tol = rd.number(t["viscosity"], "viscosity");
    if (t.contains("comparison")) cfg.comparison_tol = rd.number(t["comparison"], "comparison");
  }
  if (doc.contains("solve")) {
    const json& s = doc["solve"];
    rd.check_keys(s, "solve", {"max_iters", "step_rule"});
    if (s.contains("max_iters")) cfg.solve.max_iters = rd.integer(s["max_iters"], "max_iters");
    if (s.contains("step_rule")) {
      const std::string r = rd.string(s["step_rule"], "step_rule");
      if (r == "newton") {
        cfg.solve.step_rule = StepRule::Newton;
      } else if (r == "lagged_diffusivity") {
        cfg.solve.step_rule = StepRule::LaggedDiffusivity;
      } else {
        rd.fail("step_rule must be 'newton' or 'lagged_diffusivity'", "step_rule");
      }
    }
  }
  if (doc.contains("seed")) {
    const json& s = doc["seed"];
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
      rd.fail("seed must be a non-negative integer", "seed");
    }
    cfg.seed = s.get<std::uint64_t>();
  }
  if (doc.contains("n_tests")) cfg.n_tests = rd.integer(doc["n_tests"], "n_tests");
  if (doc.contains("n_subdomains")) cfg.n_subdomains = rd.integer(doc["n_subdomains"], "n_subdomains");
  if (cfg.n_tests < 1) rd.fail("n_tests must be positive", "n_tests");
  if (cfg.n_subdomains < 1) rd.fail("n_subdomains must be positive", "n_subdomains");
  if (doc.contains("output")) {
    const json& o = doc["output"];
    rd.check_keys(o, "output", {"dir"});
    if (o.contains("dir")) cfg.out_dir = rd.string(o["dir"], "dir");
  }

  // Validate the exponent on the grid now so that p <= 1 is a config error.
  try {
    const Grid g = cfg.grid();
    (void)parse_exponent(cfg.exponent, g);
  } catch (const ParseError& e) {
    rd.fail(std::string("exponent: ") + e.what(), "exponent");
  } catch (const ExponentError& e) {
    rd.fail(std::string("exponent: ") + e.what(), "exponent");
  } catch (const GridError& e) {
    rd.fail(std::string("domain: ") + e.what(), "domain");
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

const std::vector<std::string>& commands() {
  static const std::vector<std::string> names{"norm",   "infconv", "operator",
                                              "solve",  "verify",  "equivalence"};
  return names;
}

// ---------------------------------------------------------------- field files

void write_field(const std::filesystem::path& path, const ScalarField& u) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const Grid& g = u.grid;
  out << "dim " << g.dim() << "\nbounds";
  for (int a = 0; a < g.dim(); ++a) out << ' ' << format_double(g.lo(a)) << ' ' << format_double(g.hi(a));
  out << "\nn_cells";
  for (int a = 0; a < g.dim(); ++a) out << ' ' << g.cells(a);
  out << '\n';
  for (double v : u.values) out << format_double(v) << '\n';
}

ScalarField read_field(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read field file " + path.string());
  std::string tag;
  int dim = 0;
  if (!(in >> tag >> dim) || tag != "dim" || dim < 1 || dim > kMaxDim) {
    throw ConfigError("field file " + path.string() + ": bad 'dim' line");
  }
  std::vector<Interval> bounds(dim);
  if (!(in >> tag) || tag != "bounds") throw ConfigError("field file: missing 'bounds'");
  for (auto& b : bounds) {
    if (!(in >> b.lo >> b.hi)) throw ConfigError("field file: bad bounds");
  }
  std::vector<int> cells(dim);
  if (!(in >> tag) || tag != "n_cells") throw ConfigError("field file: missing 'n_cells'");
  for (int& c : cells) {
    if (!(in >> c)) throw ConfigError("field file: bad n_cells");
  }
  const Grid g = make_grid(dim, bounds, cells);
  std::vector<double> values(g.node_count());
  for (double& v : values) {
    std::string tok;
    if (!(in >> tok)) throw ConfigError("field file: too few values");
    v = std::stod(tok);
  }
  std::string extra;
  if (in >> extra) throw ConfigError("field file: trailing data");
  return ScalarField(g, std::move(values));
}

// ---------------------------------------------------------------- reports

namespace {

ordered_json num(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

ordered_json verdict_json(const Verdict& v) {
  return {{"passed", v.passed},
          {"margin", num(v.margin)},
          {"tolerance", num(v.tolerance)},
          {"n_tests", v.n_tests},
          {"witness", v.witness}};
}

ordered_json constants_json(const std::map<std::string, double>& c) {
  ordered_json o = ordered_json::object();
  for (const auto& [k, v] : c) o[k] = num(v);
  return o;
}

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : header_(std::move(header)) {}
  void row(const std::vector<std::string>& cells) { rows_.push_back(cells); }
  void write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
      out << '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

struct Context {
  const RunConfig& cfg;
  std::filesystem::path dir;
  Grid grid;
  ExponentField p;
  ordered_json report;
  bool ok = true;
};

std::uint64_t require_seed(const Context& ctx, const std::string& what) {
  if (!ctx.cfg.seed) throw ConfigError("a seed is required for " + what + " (config 'seed' or --seed)");
  return *ctx.cfg.seed;
}

bool fixture_is_random(const std::string& name) {
  return name == "min_planes" || name == "max_planes" || name == "random_lipschitz" ||
         name == "solve";
}

ScalarField load_fixture(const Context& ctx) {
  if (!ctx.cfg.fixture_file.empty()) {
    ScalarField u = read_field(ctx.cfg.fixture_file);
    if (!(u.grid == ctx.grid)) throw ConfigError("field file grid differs from the configured domain");
    return u;
  }
  const std::uint64_t seed =
      fixture_is_random(ctx.cfg.fixture) ? require_seed(ctx, "fixture '" + ctx.cfg.fixture + "'")
                                         : ctx.cfg.seed.value_or(0);
  return make_fixture(ctx.cfg.fixture, ctx.grid, ctx.p, seed).u;
}

Kernel kernel_for(const Context& ctx, double eps) {
  KernelVariant variant;
  if (ctx.cfg.variant) {
    variant = *ctx.cfg.variant;
  } else {
    switch (classify_case(ctx.p.p_minus(), ctx.p.p_plus())) {
      case CaseTag::Degenerate: variant = KernelVariant::Degenerate; break;
      case CaseTag::Singular: variant = KernelVariant::Singular; break;
      default:
        throw ConfigError("exponent range [" + format_double(ctx.p.p_minus()) + ", " +
                          format_double(ctx.p.p_plus()) +
                          "] is mixed; set kernel.variant to choose a kernel");
    }
  }
  double q = ctx.cfg.q;
  if (q == 0.0) {
    const double pp = ctx.p.p_plus();
    q = variant == KernelVariant::Degenerate ? 2.0 : std::max(4.0, pp / (pp - 1.0) + 1.0);
  }
  const Kernel k = make_kernel(q, eps, variant);
  if (variant == KernelVariant::Singular) validate_kernel_for_exponent(k, ctx.p.p_plus());
  return k;
}

void cmd_norm(Context& ctx) {
  const ScalarField u = load_fixture(ctx);
  const NormReport nr = luxemburg_norm(u, ctx.p, ctx.cfg.norm_tol);
  const SandwichCheck sc = check_sandwich(u, ctx.p);
  const HolderCheck hc = holder_pairing(u, u, ctx.p);
  ctx.report["norm"] = {{"norm", num(nr.norm)},
                        {"modular", num(nr.modular)},
                        {"bisection_iters", nr.bisection_iters},
                        {"bracket_width", num(nr.bracket_width)},
                        {"tolerance", num(ctx.cfg.norm_tol)}};
  ctx.report["sandwich"] = {{"holds", sc.holds}, {"lhs", num(sc.lhs)}, {"modular", num(sc.mid)},
                            {"rhs", num(sc.rhs)}, {"slack", num(1e-9 * (1.0 + sc.mid))}};
  ctx.report["holder"] = {{"holds", hc.holds()}, {"lhs", num(hc.lhs)}, {"rhs", num(hc.rhs)},
                          {"constant", kHolderConstant}};
  ctx.ok = sc.holds && hc.holds();
  Csv t({"quantity", "value"});
  t.row({"norm", format_double(nr.norm)});
  t.row({"modular", format_double(nr.modular)});
  t.row({"sandwich_lhs", format_double(sc.lhs)});
  t.row({"sandwich_rhs", format_double(sc.rhs)});
  t.row({"holder_lhs", format_double(hc.lhs)});
  t.row({"holder_rhs", format_double(hc.rhs)});
  t.write(ctx.dir / "norm.csv");
}

void cmd_infconv(Context& ctx) {
  const ScalarField u = load_fixture(ctx);
  ordered_json list = ordered_json::array();
  Csv t({"eps", "q", "w", "r_eps", "C", "domain_nodes", "max_eig", "semiconcave",
         "gradient_bound_margin", "gradient_bound", "usc_margin", "usc"});
  for (double eps : ctx.cfg.eps) {
    const Kernel k = kernel_for(ctx, eps);
    const InfConvResult r = inf_convolve(u, k);
    const SemiconcavityCheck sc = check_semiconcave(r);
    const Verdict gb = check_gradient_bound(r);
    const Verdict usc = check_upper_semicontinuity(r);
    ctx.ok = ctx.ok && sc.holds && gb.passed && usc.passed;
    const std::string tag = format_double(eps);
    write_field(ctx.dir / ("envelope_eps" + tag + ".field"), r.u_eps);
    list.push_back({{"eps", num(eps)},
                    {"q", num(k.q)},
                    {"w", num(k.w)},
                    {"variant", k.variant == KernelVariant::Degenerate ? "degenerate" : "singular"},
                    {"r_eps", num(r.r_eps)},
                    {"C", num(r.C)},
                    {"domain_nodes", r.domain_size()},
                    {"semiconcavity", {{"holds", sc.holds}, {"max_eig", num(sc.max_eig)},
                                       {"nodes", sc.nodes_tested}}},
                    {"gradient_bound", verdict_json(gb)},
                    {"upper_semicontinuity", verdict_json(usc)},
                    {"field", "envelope_eps" + tag + ".field"}});
    t.row({tag, format_double(k.q), format_double(k.w), format_double(r.r_eps),
           format_double(r.C), std::to_string(r.domain_size()), format_double(sc.max_eig),
           sc.holds ? "1" : "0", format_double(gb.margin), gb.passed ? "1" : "0",
           format_double(usc.margin), usc.passed ? "1" : "0"});
  }
  ctx.report["envelopes"] = list;
  t.write(ctx.dir / "infconv.csv");
}

void cmd_operator(Context& ctx) {
  const ScalarField u = load_fixture(ctx);
  const int n = ctx.grid.dim();
  std::vector<std::string> header{"node"};
  for (int a = 0; a < n; ++a) header.push_back("x" + std::to_string(a + 1));
  for (const char* h : {"grad_norm", "trace_term", "infinity_term", "log_term", "total",
                        "flux_divergence"}) {
    header.push_back(h);
  }
  for (double d : ctx.cfg.delta) header.push_back("regularized_delta" + format_double(d));
  Csv t(header);
  int evaluated = 0;
  int critical = 0;
  double max_rel = 0.0;
  for (std::size_t i = 0; i < ctx.grid.node_count(); ++i) {
    if (!ctx.grid.is_interior(i)) continue;
    std::vector<std::string> row{std::to_string(i)};
    const Vec x = ctx.grid.point(i);
    for (int a = 0; a < n; ++a) row.push_back(format_double(x[a]));
    const double fd = flux_divergence(u, ctx.p, i);
    try {
      const OperatorEval e = nondiv_eval(u, ctx.p, i);
      for (double v : {e.grad_norm, e.trace_term, e.infinity_term, e.log_term, e.total}) {
        row.push_back(format_double(v));
      }
      ++evaluated;
      if (e.grad_norm >= 0.1) {
        max_rel = std::max(max_rel, std::abs(e.total - fd) / std::max(1.0, std::abs(fd)));
      }
    } catch (const UndefinedAtCriticalPoint&) {
      ++critical;
      row.push_back("0");
      for (int k = 0; k < 4; ++k) row.push_back("nan");
    }
    row.push_back(format_double(fd));
    for (double d : ctx.cfg.delta) row.push_back(format_double(regularized_eval(u, ctx.p, i, d)));
    t.row(row);
  }
  ctx.report["operator"] = {{"interior_nodes", evaluated + critical},
                            {"critical_nodes", critical},
                            {"max_relative_gap_nondiv_vs_flux", num(max_rel)},
                            {"delta", ctx.cfg.delta},
                            {"table", "operator.csv"}};
  t.write(ctx.dir / "operator.csv");
}

void cmd_solve(Context& ctx) {
  const ScalarField boundary = load_fixture(ctx);
  const SolveReport r = solve_dirichlet(ctx.p, boundary, ctx.cfg.solve);
  write_field(ctx.dir / "solution.field", r.u);
  Csv t({"iteration", "energy"});
  for (const auto& [it, e] : r.energy_trace) t.row({std::to_string(it), format_double(e)});
  t.write(ctx.dir / "solve_trace.csv");
  ctx.report["solve"] = {{"converged", r.converged},
                         {"iterations", r.iterations},
                         {"final_residual", num(r.final_residual)},
                         {"tol", num(ctx.cfg.solve.tol)},
                         {"max_iters", ctx.cfg.solve.max_iters},
                         {"step_rule", ctx.cfg.solve.step_rule == StepRule::Newton
                                           ? "newton"
                                           : "lagged_diffusivity"},
                         {"energy", num(energy(r.u, ctx.p))},
                         {"diagnostic", r.diagnostic},
                         {"field", "solution.field"},
                         {"trace", "solve_trace.csv"}};
  ctx.ok = r.converged;
}

ClassifierTolerances tolerances_for(const Context& ctx, const ScalarField& u) {
  ClassifierTolerances t = default_tolerances(u);
  if (ctx.cfg.weak_tol) t.weak = *ctx.cfg.weak_tol;
  if (ctx.cfg.viscosity_tol) t.viscosity = *ctx.cfg.viscosity_tol;
  if (ctx.cfg.comparison_tol) t.comparison = *ctx.cfg.comparison_tol;
  return t;
}

void cmd_verify(Context& ctx) {
  const std::uint64_t seed = require_seed(ctx, "verify");
  const ScalarField u = load_fixture(ctx);
  const ClassifierTolerances tol = tolerances_for(ctx, u);
  WeakTestOptions wo;
  wo.n_tests = ctx.cfg.n_tests;
  wo.tol = tol.weak;
  wo.seed = seed;
  ViscosityTestOptions vo;
  vo.tol = tol.viscosity;
  vo.seed = seed;
  ComparisonTestOptions co;
  co.n_subdomains = ctx.cfg.n_subdomains;
  co.tol = tol.comparison;
  co.seed = seed;
  co.solve = ctx.cfg.solve;
  const Verdict w = test_weak_supersolution(u, ctx.p, wo);
  const Verdict v = test_viscosity_supersolution(u, ctx.p, vo);
  const Verdict c = test_comparison(u, ctx.p, co);
  ctx.report["verdicts"] = {{"weak", verdict_json(w)},
                            {"viscosity", verdict_json(v)},
                            {"comparison", verdict_json(c)}};
  ctx.ok = w.passed && v.passed && c.passed;
  Csv t({"test", "passed", "margin", "tolerance", "n_tests", "witness"});
  for (const auto& [name, vd] : {std::pair<const char*, const Verdict*>{"weak", &w},
                                 {"viscosity", &v},
                                 {"comparison", &c}}) {
    t.row({name, vd->passed ? "1" : "0", format_double(vd->margin), format_double(vd->tolerance),
           std::to_string(vd->n_tests), quoted(vd->witness)});
  }
  t.write(ctx.dir / "verdicts.csv");
}

void cmd_equivalence(Context& ctx) {
  const std::uint64_t seed = require_seed(ctx, "equivalence");
  const CaseTag tag = classify_case(ctx.p.p_minus(), ctx.p.p_plus());
  if (tag == CaseTag::Mixed) {
    throw ConfigError("equivalence needs p- >= 2 or p+ < 2; exponent range [" +
                      format_double(ctx.p.p_minus()) + ", " + format_double(ctx.p.p_plus()) +
                      "] is mixed");
  }
  std::vector<Fixture> fixtures;
  if (!ctx.cfg.fixture_file.empty()) {
    fixtures.push_back({"file", load_fixture(ctx), true});
  } else {
    fixtures = fixture_suite(ctx.grid, ctx.p, seed);
  }
  EquivalenceOptions opts;
  opts.eps_schedule = ctx.cfg.eps;
  opts.delta_schedule = ctx.cfg.delta;
  opts.mollifier_j = ctx.cfg.mollifier_j;
  opts.n_bumps = ctx.cfg.n_tests;
  opts.n_subdomains = ctx.cfg.n_subdomains;
  opts.seed = seed;
  if (ctx.cfg.q > 0.0) {
    opts.q = ctx.cfg.q;
  } else {
    const double pp = ctx.p.p_plus();
    opts.q = std::max(4.0, pp / (pp - 1.0) + 1.0);
  }
  const EquivalenceReport rep = equivalence_experiment(ctx.p, fixtures, opts);

  ordered_json list = ordered_json::array();
  Csv t({"fixture", "designed_supersolution", "weak", "viscosity", "comparison", "agree",
         "pipeline", "weak_margin", "viscosity_margin", "comparison_margin"});
  Csv st({"fixture", "stage", "passed", "margin", "detail"});
  for (const FixtureOutcome& f : rep.fixtures) {
    ordered_json stages = ordered_json::array();
    for (const Stage& s : f.stages) {
      stages.push_back({{"name", s.name},
                        {"passed", s.passed},
                        {"margin", num(s.margin)},
                        {"detail", s.detail},
                        {"constants", constants_json(s.constants)}});
      st.row({f.name, quoted(s.name), s.passed ? "1" : "0", format_double(s.margin),
              quoted(s.detail)});
    }
    list.push_back({{"name", f.name},
                    {"designed_supersolution", f.designed_supersolution},
                    {"weak", verdict_json(f.weak)},
                    {"viscosity", verdict_json(f.viscosity)},
                    {"comparison", verdict_json(f.comparison)},
                    {"agree", f.agree},
                    {"pipeline_passed", f.pipeline_passed},
                    {"stages", stages}});
    t.row({f.name, f.designed_supersolution ? "1" : "0", f.weak.passed ? "1" : "0",
           f.viscosity.passed ? "1" : "0", f.comparison.passed ? "1" : "0", f.agree ? "1" : "0",
           f.pipeline_passed ? "1" : "0", format_double(f.weak.margin),
           format_double(f.viscosity.margin), format_double(f.comparison.margin)});
  }
  ctx.report["equivalence"] = {{"case", to_string(rep.tag)},
                               {"q", num(opts.q)},
                               {"eps", opts.eps_schedule},
                               {"delta", opts.delta_schedule},
                               {"mollifier_j", opts.mollifier_j},
                               {"all_agree", rep.all_agree},
                               {"pipeline_passed", rep.pipeline_passed},
                               {"designed_matches", rep.designed_matches},
                               {"fixtures", list}};
  ctx.ok = rep.passed();
  t.write(ctx.dir / "equivalence.csv");
  st.write(ctx.dir / "equivalence_stages.csv");
}

ordered_json config_json(const RunConfig& cfg) {
  ordered_json bounds = ordered_json::array();
  for (const Interval& b : cfg.bounds) bounds.push_back({num(b.lo), num(b.hi)});
  ordered_json o = {{"domain", {{"dim", cfg.dim}, {"bounds", bounds}, {"n_cells", cfg.n_cells}}},
                    {"exponent", cfg.exponent},
                    {"fixture", cfg.fixture_file.empty() ? cfg.fixture : cfg.fixture_file}};
  o["seed"] = cfg.seed ? ordered_json(*cfg.seed) : ordered_json(nullptr);
  return o;
}

}  // namespace

int run(const std::string& command, const RunConfig& cfg, std::ostream& log) {
  int code = kExitOk;
  ordered_json report;
  report["command"] = command;
  report["config"] = config_json(cfg);
  const std::filesystem::path dir = cfg.out_dir;
  try {
    if (std::find(commands().begin(), commands().end(), command) == commands().end()) {
      throw ConfigError("unknown command '" + command + "'");
    }
    std::filesystem::create_directories(dir);
    const Grid grid = cfg.grid();
    Context ctx{cfg, dir, grid, parse_exponent(cfg.exponent, grid), {}, true};
    ctx.report = std::move(report);
    const ExponentBounds b = ctx.p.bounds();
    ctx.report["exponent"] = {{"source", cfg.exponent},
                              {"p_minus", num(b.p_minus)},
                              {"p_plus", num(b.p_plus)},
                              {"kappa", num(b.kappa)},
                              {"case", to_string(classify_case(b.p_minus, b.p_plus))}};
    if (command == "norm") cmd_norm(ctx);
    if (command == "infconv") cmd_infconv(ctx);
    if (command == "operator") cmd_operator(ctx);
    if (command == "solve") cmd_solve(ctx);
    if (command == "verify") cmd_verify(ctx);
    if (command == "equivalence") cmd_equivalence(ctx);
    report = std::move(ctx.report);
    code = ctx.ok ? kExitOk : kExitPropertyFailed;
  } catch (const ConfigError& e) {
    code = kExitConfigError;
    report["error"] = e.what();
  } catch (const ParseError& e) {
    code = kExitConfigError;
    report["error"] = e.what();
  } catch (const ExponentError& e) {
    code = kExitConfigError;
    report["error"] = e.what();
  } catch (const std::exception& e) {
    code = kExitNumericalFailure;
    report["error"] = e.what();
  }
  report["exit_code"] = code;
  if (report.contains("error")) log << "error: " << report["error"].get<std::string>() << '\n';
  try {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "report.json");
    out << report.dump(2) << '\n';
  } catch (const std::exception& e) {
    log << "error: cannot write report: " << e.what() << '\n';
    if (code == kExitOk) code = kExitNumericalFailure;
  }
  log << command << ": exit " << code << '\n';
  return code;
}

}  // namespace pxl
