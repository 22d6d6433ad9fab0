#pragma once

// Small arithmetic expression language for model files.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('+' | '-') unary | power
//   power   := primary ('^' unary)?            right associative
//   primary := number | name | call | '(' expr ')'
//   call    := fn '(' expr (',' expr)? ')'
//
// Names are x1..xN (x is an alias of x1), pi and e. Unary functions: exp, log,
// sqrt, sin, cos, tanh, abs. Binary functions: min, max. Expressions are
// differentiated symbolically, so fields built from them carry exact
// gradients and log-gradients.

#include <memory>
#include <string>

#include "martin/field.hpp"

namespace martin {

struct ExprNode;

class Expression {
 public:
  /// Throws UsageError naming the offending token.
  static Expression parse(const std::string& text, int dim);

  double operator()(const Vec& x) const;
  Expression derivative(int axis) const;
  std::string str() const;
  int dim() const { return dim_; }

  /// Field with a symbolic gradient and Hessian.
  Field to_field() const;

 private:
  Expression(std::shared_ptr<const ExprNode> root, int dim)
      : root_(std::move(root)), dim_(dim) {}

  std::shared_ptr<const ExprNode> root_;
  int dim_ = 1;
};

}  // namespace martin
