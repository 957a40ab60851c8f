#include "pxlap/exponent.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

namespace pxl {

namespace {

class Constant final : public Expression {
 public:
  explicit Constant(double c) : c_(c) {}
  Jet eval(const Vec&) const override { return {c_, {}}; }
  std::string str() const override {
    std::ostringstream os;
    os.precision(17);
    os << c_;
    return os.str();
  }

 private:
  double c_;
};

class Coordinate final : public Expression {
 public:
  explicit Coordinate(int axis) : axis_(axis) {}
  Jet eval(const Vec& x) const override {
    Jet j{x[axis_], {}};
    j.grad[axis_] = 1.0;
    return j;
  }
  std::string str() const override { return "x" + std::to_string(axis_ + 1); }

 private:
  int axis_;
};

enum class BinOp { Add, Sub, Mul, Div };

class Binary final : public Expression {
 public:
  Binary(BinOp op, ExprPtr l, ExprPtr r) : op_(op), l_(std::move(l)), r_(std::move(r)) {}
  Jet eval(const Vec& x) const override {
    const Jet a = l_->eval(x);
    const Jet b = r_->eval(x);
    Jet out;
    switch (op_) {
      case BinOp::Add:
        out.value = a.value + b.value;
        for (int i = 0; i < kMaxDim; ++i) out.grad[i] = a.grad[i] + b.grad[i];
        break;
      case BinOp::Sub:
        out.value = a.value - b.value;
        for (int i = 0; i < kMaxDim; ++i) out.grad[i] = a.grad[i] - b.grad[i];
        break;
      case BinOp::Mul:
        out.value = a.value * b.value;
        for (int i = 0; i < kMaxDim; ++i) out.grad[i] = a.grad[i] * b.value + a.value * b.grad[i];
        break;
      case BinOp::Div:
        out.value = a.value / b.value;
        for (int i = 0; i < kMaxDim; ++i) {
          out.grad[i] = (a.grad[i] * b.value - a.value * b.grad[i]) / (b.value * b.value);
        }
        break;
    }
    return out;
  }
  std::string str() const override {
    static constexpr char kSym[] = {'+', '-', '*', '/'};
    return "(" + l_->str() + " " + kSym[static_cast<int>(op_)] + " " + r_->str() + ")";
  }

 private:
  BinOp op_;
  ExprPtr l_;
  ExprPtr r_;
};

enum class Fn { Sin, Cos, Exp, Neg };

class Unary final : public Expression {
 public:
  Unary(Fn fn, ExprPtr arg) : fn_(fn), arg_(std::move(arg)) {}
  Jet eval(const Vec& x) const override {
    const Jet a = arg_->eval(x);
    double v = 0.0;
    double dv = 0.0;
    switch (fn_) {
      case Fn::Sin: v = std::sin(a.value); dv = std::cos(a.value); break;
      case Fn::Cos: v = std::cos(a.value); dv = -std::sin(a.value); break;
      case Fn::Exp: v = std::exp(a.value); dv = v; break;
      case Fn::Neg: v = -a.value; dv = -1.0; break;
    }
    Jet out{v, {}};
    for (int i = 0; i < kMaxDim; ++i) out.grad[i] = dv * a.grad[i];
    return out;
  }
  std::string str() const override {
    switch (fn_) {
      case Fn::Sin: return "sin(" + arg_->str() + ")";
      case Fn::Cos: return "cos(" + arg_->str() + ")";
      case Fn::Exp: return "exp(" + arg_->str() + ")";
      case Fn::Neg: return "(-" + arg_->str() + ")";
    }
    return {};
  }

 private:
  Fn fn_;
  ExprPtr arg_;
};

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  ExprPtr parse() {
    ExprPtr e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg + " at position " + std::to_string(pos_), pos_);
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  ExprPtr expr() {
    ExprPtr lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = std::make_shared<Binary>(BinOp::Add, lhs, term());
      } else if (accept('-')) {
        lhs = std::make_shared<Binary>(BinOp::Sub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  ExprPtr term() {
    ExprPtr lhs = factor();
    for (;;) {
      if (accept('*')) {
        lhs = std::make_shared<Binary>(BinOp::Mul, lhs, factor());
      } else if (accept('/')) {
        lhs = std::make_shared<Binary>(BinOp::Div, lhs, factor());
      } else {
        return lhs;
      }
    }
  }

  ExprPtr factor() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (accept('(')) {
      ExprPtr e = expr();
      expect(')');
      return e;
    }
    if (accept('-')) return std::make_shared<Unary>(Fn::Neg, factor());
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const std::string_view word = s_.substr(start, pos_ - start);
      if (word == "x1" || word == "x2" || word == "x3") {
        return std::make_shared<Coordinate>(word[1] - '1');
      }
      Fn fn;
      if (word == "sin") {
        fn = Fn::Sin;
      } else if (word == "cos") {
        fn = Fn::Cos;
      } else if (word == "exp") {
        fn = Fn::Exp;
      } else {
        pos_ = start;
        fail("unknown identifier '" + std::string(word) + "'");
      }
      expect('(');
      ExprPtr arg = expr();
      expect(')');
      return std::make_shared<Unary>(fn, arg);
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  ExprPtr number() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
            s_[pos_] == 'e' || s_[pos_] == 'E' ||
            ((s_[pos_] == '+' || s_[pos_] == '-') && pos_ > start &&
             (s_[pos_ - 1] == 'e' || s_[pos_ - 1] == 'E')))) {
      ++pos_;
    }
    double v = 0.0;
    const auto res = std::from_chars(s_.data() + start, s_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != s_.data() + pos_) {
      pos_ = start;
      fail("malformed number");
    }
    return std::make_shared<Constant>(v);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

ExprPtr parse_expression(std::string_view src) { return Parser(src).parse(); }

ExprPtr constant_expression(double c) { return std::make_shared<Constant>(c); }

ExprPtr conjugate_expression(const ExprPtr& p) {
  return std::make_shared<Binary>(
      BinOp::Div, p, std::make_shared<Binary>(BinOp::Sub, p, constant_expression(1.0)));
}

std::string to_string(CaseTag tag) {
  switch (tag) {
    case CaseTag::Degenerate: return "degenerate";
    case CaseTag::Singular: return "singular";
    case CaseTag::Mixed: return "mixed";
  }
  return "unknown";
}

ExponentField::ExponentField(ExprPtr expr, const Grid& grid, std::string source)
    : expr_(std::move(expr)), source_(std::move(source)), dim_(grid.dim()) {
  if (source_.empty()) source_ = expr_->str();
  bounds_ = exponent_bounds(*this, grid);
}

ExponentField ExponentField::constant(double p, const Grid& grid) {
  std::ostringstream os;
  os.precision(17);
  os << p;
  return ExponentField(constant_expression(p), grid, os.str());
}

double ExponentField::operator()(const Vec& x) const {
  const double v = expr_->eval(x).value;
  if (!(v > 1.0)) {
    std::ostringstream os;
    os << "exponent p(x) = " << v << " <= 1 at x = (" << x[0] << ", " << x[1] << ", " << x[2]
       << ")";
    throw ExponentError(os.str());
  }
  return v;
}

Vec ExponentField::gradient(const Vec& x) const {
  Vec g = expr_->eval(x).grad;
  for (int a = dim_; a < kMaxDim; ++a) g[a] = 0.0;
  return g;
}

ExponentBounds ExponentField::certified_bounds(double factor) const {
  ExponentBounds b = bounds_;
  b.kappa *= factor;
  return b;
}

bool ExponentField::is_constant() const {
  return bounds_.p_minus == bounds_.p_plus && bounds_.kappa == 0.0;
}

ExponentField ExponentField::conjugate(const Grid& grid) const {
  return ExponentField(conjugate_expression(expr_), grid, "(" + source_ + ")/((" + source_ + ")-1)");
}

double eval_exponent(const ExponentField& p, const Vec& x) { return p(x); }

Vec exponent_gradient(const ExponentField& p, const Vec& x) { return p.gradient(x); }

ExponentBounds exponent_bounds(const ExponentField& p, const Grid& grid) {
  ExponentBounds b{INFINITY, -INFINITY, 0.0};
  for (std::size_t i = 0; i < grid.node_count(); ++i) {
    const Vec x = grid.point(i);
    const Jet j = p.expression()->eval(x);
    if (!std::isfinite(j.value)) throw ExponentError("exponent is not finite on the grid");
    b.p_minus = std::min(b.p_minus, j.value);
    b.p_plus = std::max(b.p_plus, j.value);
    b.kappa = std::max(b.kappa, norm(j.grad, grid.dim()));
  }
  if (!(b.p_minus > 1.0)) {
    throw ExponentError("exponent violates 1 < p(.): minimum over grid is " +
                        std::to_string(b.p_minus));
  }
  return b;
}

CaseTag classify_case(double p_minus, double p_plus) {
  if (p_minus >= 2.0) return CaseTag::Degenerate;
  if (p_plus < 2.0) return CaseTag::Singular;
  return CaseTag::Mixed;
}

ExponentField parse_exponent(std::string_view src, const Grid& grid) {
  ExprPtr e = parse_expression(src);
  for (std::size_t i = 0; i < grid.node_count(); ++i) {
    const double v = e->eval(grid.point(i)).value;
    if (!(v >= 1.0 + 1e-9)) {
      throw ExponentError("exponent '" + std::string(src) + "' falls to " + std::to_string(v) +
                          " (below 1 + 1e-9) on the grid");
    }
  }
  return ExponentField(e, grid, std::string(src));
}

}  // namespace pxl
