#include "martin/expression.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

namespace martin {

enum class Op { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Exp, Log, Sqrt, Sin, Cos, Tanh, Abs, Sign, Step, Min, Max };

struct ExprNode {
  Op op;
  double value = 0;
  int var = 0;
  std::shared_ptr<const ExprNode> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const ExprNode>;

NodePtr make(Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<ExprNode>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

NodePtr constant(double v) {
  auto n = std::make_shared<ExprNode>();
  n->op = Op::Const;
  n->value = v;
  return n;
}

bool is_const(const NodePtr& n, double v) { return n->op == Op::Const && n->value == v; }
bool is_const(const NodePtr& n) { return n->op == Op::Const; }

double eval(const ExprNode& n, const Vec& x);

// Builders fold constants and drop additive zeros and multiplicative ones so
// repeated differentiation keeps trees small.
NodePtr add(NodePtr a, NodePtr b) {
  if (is_const(a, 0)) return b;
  if (is_const(b, 0)) return a;
  if (is_const(a) && is_const(b)) return constant(a->value + b->value);
  return make(Op::Add, a, b);
}
NodePtr sub(NodePtr a, NodePtr b) {
  if (is_const(b, 0)) return a;
  if (is_const(a) && is_const(b)) return constant(a->value - b->value);
  if (is_const(a, 0)) return make(Op::Neg, b);
  return make(Op::Sub, a, b);
}
NodePtr mul(NodePtr a, NodePtr b) {
  if (is_const(a, 0) || is_const(b, 0)) return constant(0);
  if (is_const(a, 1)) return b;
  if (is_const(b, 1)) return a;
  if (is_const(a) && is_const(b)) return constant(a->value * b->value);
  return make(Op::Mul, a, b);
}
NodePtr div(NodePtr a, NodePtr b) {
  if (is_const(a, 0)) return constant(0);
  if (is_const(b, 1)) return a;
  if (is_const(a) && is_const(b)) return constant(a->value / b->value);
  return make(Op::Div, a, b);
}
NodePtr neg(NodePtr a) {
  if (is_const(a)) return constant(-a->value);
  return make(Op::Neg, a);
}
NodePtr unary(Op op, NodePtr a) {
  if (is_const(a)) {
    auto n = make(op, a);
    return constant(eval(*n, Vec()));
  }
  return make(op, a);
}

double eval(const ExprNode& n, const Vec& x) {
  switch (n.op) {
    case Op::Const: return n.value;
    case Op::Var: return x[n.var];
    case Op::Neg: return -eval(*n.a, x);
    case Op::Add: return eval(*n.a, x) + eval(*n.b, x);
    case Op::Sub: return eval(*n.a, x) - eval(*n.b, x);
    case Op::Mul: return eval(*n.a, x) * eval(*n.b, x);
    case Op::Div: return eval(*n.a, x) / eval(*n.b, x);
    case Op::Pow: {
      const double base = eval(*n.a, x);
      if (n.b->op == Op::Const && n.b->value == 2) return base * base;
      return std::pow(base, eval(*n.b, x));
    }
    case Op::Exp: return std::exp(eval(*n.a, x));
    case Op::Log: return std::log(eval(*n.a, x));
    case Op::Sqrt: return std::sqrt(eval(*n.a, x));
    case Op::Sin: return std::sin(eval(*n.a, x));
    case Op::Cos: return std::cos(eval(*n.a, x));
    case Op::Tanh: return std::tanh(eval(*n.a, x));
    case Op::Abs: return std::abs(eval(*n.a, x));
    case Op::Sign: {
      const double v = eval(*n.a, x);
      return v > 0 ? 1.0 : v < 0 ? -1.0 : 0.0;
    }
    case Op::Step: {
      const double v = eval(*n.a, x);
      return v > 0 ? 1.0 : v < 0 ? 0.0 : 0.5;
    }
    case Op::Min: return std::min(eval(*n.a, x), eval(*n.b, x));
    case Op::Max: return std::max(eval(*n.a, x), eval(*n.b, x));
  }
  return 0;
}

NodePtr differentiate(const NodePtr& n, int axis) {
  const auto& a = n->a;
  const auto& b = n->b;
  switch (n->op) {
    case Op::Const: return constant(0);
    case Op::Var: return constant(n->var == axis ? 1 : 0);
    case Op::Neg: return neg(differentiate(a, axis));
    case Op::Add: return add(differentiate(a, axis), differentiate(b, axis));
    case Op::Sub: return sub(differentiate(a, axis), differentiate(b, axis));
    case Op::Mul:
      return add(mul(differentiate(a, axis), b), mul(a, differentiate(b, axis)));
    case Op::Div:
      return div(sub(mul(differentiate(a, axis), b), mul(a, differentiate(b, axis))),
                 mul(b, b));
    case Op::Pow: {
      if (is_const(b)) {
        return mul(mul(constant(b->value), make(Op::Pow, a, constant(b->value - 1))),
                   differentiate(a, axis));
      }
      // d(u^v) = u^v (v' log u + v u'/u)
      return mul(n, add(mul(differentiate(b, axis), unary(Op::Log, a)),
                        div(mul(b, differentiate(a, axis)), a)));
    }
    case Op::Exp: return mul(n, differentiate(a, axis));
    case Op::Log: return div(differentiate(a, axis), a);
    case Op::Sqrt: return div(differentiate(a, axis), mul(constant(2), n));
    case Op::Sin: return mul(unary(Op::Cos, a), differentiate(a, axis));
    case Op::Cos: return neg(mul(unary(Op::Sin, a), differentiate(a, axis)));
    case Op::Tanh: return mul(sub(constant(1), mul(n, n)), differentiate(a, axis));
    case Op::Abs: return mul(unary(Op::Sign, a), differentiate(a, axis));
    case Op::Sign:
    case Op::Step: return constant(0);
    case Op::Min: {
      auto s = unary(Op::Step, sub(b, a));
      return add(mul(s, differentiate(a, axis)),
                 mul(sub(constant(1), s), differentiate(b, axis)));
    }
    case Op::Max: {
      auto s = unary(Op::Step, sub(a, b));
      return add(mul(s, differentiate(a, axis)),
                 mul(sub(constant(1), s), differentiate(b, axis)));
    }
  }
  return constant(0);
}

// d log(f) / dx_axis, split over products, quotients, constant powers and
// exp so that e.g. exp(-1.5*x) gives -1.5 where f'/f would be inf/inf.
NodePtr log_differentiate(const NodePtr& n, int axis) {
  const auto& a = n->a;
  const auto& b = n->b;
  switch (n->op) {
    case Op::Const: return constant(0);
    case Op::Exp: return differentiate(a, axis);
    case Op::Mul: return add(log_differentiate(a, axis), log_differentiate(b, axis));
    case Op::Div: return sub(log_differentiate(a, axis), log_differentiate(b, axis));
    case Op::Sqrt: return mul(constant(0.5), log_differentiate(a, axis));
    case Op::Pow:
      if (is_const(b)) return mul(constant(b->value), log_differentiate(a, axis));
      break;
    default: break;
  }
  return div(differentiate(n, axis), n);
}

void print(const ExprNode& n, std::ostream& os) {
  auto bin = [&](const char* sym) {
    os << '(';
    print(*n.a, os);
    os << sym;
    print(*n.b, os);
    os << ')';
  };
  auto fn = [&](const char* name) {
    os << name << '(';
    print(*n.a, os);
    if (n.b) {
      os << ',';
      print(*n.b, os);
    }
    os << ')';
  };
  switch (n.op) {
    case Op::Const: os << n.value; break;
    case Op::Var: os << 'x' << (n.var + 1); break;
    case Op::Neg: os << "(-"; print(*n.a, os); os << ')'; break;
    case Op::Add: bin("+"); break;
    case Op::Sub: bin("-"); break;
    case Op::Mul: bin("*"); break;
    case Op::Div: bin("/"); break;
    case Op::Pow: bin("^"); break;
    case Op::Exp: fn("exp"); break;
    case Op::Log: fn("log"); break;
    case Op::Sqrt: fn("sqrt"); break;
    case Op::Sin: fn("sin"); break;
    case Op::Cos: fn("cos"); break;
    case Op::Tanh: fn("tanh"); break;
    case Op::Abs: fn("abs"); break;
    case Op::Sign: fn("sign"); break;
    case Op::Step: fn("step"); break;
    case Op::Min: fn("min"); break;
    case Op::Max: fn("max"); break;
  }
}

class Parser {
 public:
  Parser(const std::string& text, int dim) : s_(text), dim_(dim) {}

  NodePtr parse() {
    auto n = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    std::ostringstream os;
    os << "expression '" << s_ << "': " << why << " at position " << pos_;
    throw UsageError(os.str());
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

  NodePtr expr() {
    auto n = term();
    while (true) {
      if (accept('+')) n = add(n, term());
      else if (accept('-')) n = sub(n, term());
      else return n;
    }
  }
  NodePtr term() {
    auto n = factor();
    while (true) {
      if (accept('*')) n = mul(n, factor());
      else if (accept('/')) n = div(n, factor());
      else return n;
    }
  }
  NodePtr factor() {
    if (accept('-')) return neg(factor());
    if (accept('+')) return factor();
    auto base = primary();
    if (accept('^')) {
      auto exponent = factor();
      if (is_const(base) && is_const(exponent))
        return constant(std::pow(base->value, exponent->value));
      return make(Op::Pow, base, exponent);
    }
    return base;
  }
  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (accept('(')) {
      auto n = expr();
      expect(')');
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      return constant(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const std::string name = s_.substr(start, pos_ - start);
      if (name == "pi") return constant(std::numbers::pi);
      if (name == "e") return constant(std::numbers::e);
      if (name == "x") return variable(0, name);
      if (name.size() > 1 && name[0] == 'x' &&
          name.find_first_not_of("0123456789", 1) == std::string::npos)
        return variable(std::stoi(name.substr(1)) - 1, name);
      return call(name);
    }
    fail(std::string("unexpected character '") + c + "'");
  }
  NodePtr variable(int index, const std::string& name) {
    if (index < 0 || index >= dim_) fail("unknown variable '" + name + "'");
    auto n = std::make_shared<ExprNode>();
    n->op = Op::Var;
    n->var = index;
    return n;
  }
  NodePtr call(const std::string& name) {
    static const std::vector<std::pair<std::string, Op>> unary_fns = {
        {"exp", Op::Exp}, {"log", Op::Log},   {"sqrt", Op::Sqrt}, {"sin", Op::Sin},
        {"cos", Op::Cos}, {"tanh", Op::Tanh}, {"abs", Op::Abs}};
    expect('(');
    auto first = expr();
    for (const auto& [fname, op] : unary_fns) {
      if (fname == name) {
        expect(')');
        return unary(op, first);
      }
    }
    if (name == "min" || name == "max") {
      expect(',');
      auto second = expr();
      expect(')');
      return make(name == "min" ? Op::Min : Op::Max, first, second);
    }
    fail("unknown function '" + name + "'");
  }

  std::string s_;
  int dim_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::parse(const std::string& text, int dim) {
  return Expression(Parser(text, dim).parse(), dim);
}

double Expression::operator()(const Vec& x) const { return eval(*root_, x); }

Expression Expression::derivative(int axis) const {
  if (axis < 0 || axis >= dim_) throw UsageError("derivative axis out of range");
  return Expression(differentiate(root_, axis), dim_);
}

std::string Expression::str() const {
  std::ostringstream os;
  print(*root_, os);
  return os.str();
}

Field Expression::to_field() const {
  const int n = dim_;
  std::vector<Expression> grad;
  std::vector<std::vector<Expression>> hess(n);
  for (int i = 0; i < n; ++i) grad.push_back(derivative(i));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) hess[i].push_back(grad[i].derivative(j));
  std::vector<Expression> log_grad;
  for (int i = 0; i < n; ++i) log_grad.push_back(Expression(log_differentiate(root_, i), n));
  const Expression self = *this;
  return Field([self](const Vec& x) { return self(x); },
               [grad](const Vec& x) {
                 Vec g(grad.size());
                 for (std::size_t i = 0; i < grad.size(); ++i) g[i] = grad[i](x);
                 return g;
               },
               [hess](const Vec& x) {
                 const auto m = static_cast<Eigen::Index>(hess.size());
                 Mat h(m, m);
                 for (Eigen::Index i = 0; i < m; ++i)
                   for (Eigen::Index j = 0; j < m; ++j) h(i, j) = hess[i][j](x);
                 return h;
               })
      .with_log_gradient([log_grad](const Vec& x) {
        Vec g(log_grad.size());
        for (std::size_t i = 0; i < log_grad.size(); ++i) g[i] = log_grad[i](x);
        return g;
      });
}

}  // namespace martin
