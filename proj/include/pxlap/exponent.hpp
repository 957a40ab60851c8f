// The variable exponent p(.): a closed-form expression over coordinates with
// exact gradient, plus its extrema and gradient bound on a grid.
#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

#include "pxlap/grid.hpp"

namespace pxl {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Raised whenever the standing hypothesis 1 < p(.) fails.
class ExponentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Value together with its gradient; forward-mode differentiation.
struct Jet {
  double value = 0.0;
  Vec grad{};
};

class Expression {
 public:
  virtual ~Expression() = default;
  virtual Jet eval(const Vec& x) const = 0;
  virtual std::string str() const = 0;
};

using ExprPtr = std::shared_ptr<const Expression>;

/// expr   := term (('+'|'-') term)*
/// term   := factor (('*'|'/') factor)*
/// factor := number | x1 | x2 | x3 | ('sin'|'cos'|'exp') '(' expr ')' | '(' expr ')' | '-' factor
ExprPtr parse_expression(std::string_view src);

ExprPtr constant_expression(double c);
ExprPtr conjugate_expression(const ExprPtr& p);

struct ExponentBounds {
  double p_minus = 0.0;
  double p_plus = 0.0;
  double kappa = 0.0;
};

enum class CaseTag { Degenerate, Singular, Mixed };

std::string to_string(CaseTag tag);

class ExponentField {
 public:
  ExponentField(ExprPtr expr, const Grid& grid, std::string source = {});

  static ExponentField constant(double p, const Grid& grid);

  /// p(x); throws ExponentError when p(x) <= 1.
  double operator()(const Vec& x) const;
  Vec gradient(const Vec& x) const;

  double p_minus() const { return bounds_.p_minus; }
  double p_plus() const { return bounds_.p_plus; }
  double kappa() const { return bounds_.kappa; }
  const ExponentBounds& bounds() const { return bounds_; }
  /// Node bounds inflated by `factor` to stand in for continuum extrema.
  ExponentBounds certified_bounds(double factor = 1.05) const;
  bool is_constant() const;

  const std::string& source() const { return source_; }
  const ExprPtr& expression() const { return expr_; }

  /// Pointwise conjugate exponent p / (p - 1) on the same grid.
  ExponentField conjugate(const Grid& grid) const;

 private:
  ExprPtr expr_;
  std::string source_;
  ExponentBounds bounds_;
  int dim_;
};

double eval_exponent(const ExponentField& p, const Vec& x);
Vec exponent_gradient(const ExponentField& p, const Vec& x);
/// Min/max of p and max of |Dp| over all grid nodes; throws if p_minus <= 1.
ExponentBounds exponent_bounds(const ExponentField& p, const Grid& grid);
CaseTag classify_case(double p_minus, double p_plus);

/// Parses an exponent and rejects it if it drops below 1 + 1e-9 on the grid.
ExponentField parse_exponent(std::string_view src, const Grid& grid);

}  // namespace pxl
