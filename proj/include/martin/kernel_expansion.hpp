#pragma once

#include <memory>
#include <variant>
#include <vector>

#include <json.hpp>

#include "martin/field.hpp"

namespace martin {

/// log h, (log h)' and (log h)'' at a point.
struct LogJet {
  double value = 0;
  double slope = 0;
  double curvature = 0;
};

/// How a table continues past its last node.
struct TableEnd {
  enum class Kind { Linear, Dirichlet };
  Kind kind = Kind::Linear;
  /// Finite boundary where h vanishes (Dirichlet only).
  double boundary = 0;
};

/// Positive 1D function stored as log h on a uniform lattice, interpolated by
/// quintic Hermite polynomials through (log h, (log h)', (log h)'').
class LogTable1D {
 public:
  LogTable1D(double x0, double dx, std::vector<double> log_value,
             std::vector<double> log_slope, std::vector<double> log_curvature,
             TableEnd left = {}, TableEnd right = {});

  LogJet jet(double x) const;
  double operator()(double x) const;

  double x0() const { return x0_; }
  double dx() const { return dx_; }
  double x_last() const { return x0_ + dx_ * static_cast<double>(size() - 1); }
  std::size_t size() const { return log_value_.size(); }
  const std::vector<double>& log_value() const { return log_value_; }
  const std::vector<double>& log_slope() const { return log_slope_; }
  const std::vector<double>& log_curvature() const { return log_curvature_; }
  const TableEnd& left_end() const { return left_; }
  const TableEnd& right_end() const { return right_; }

  /// Same table with log h shifted so that h(xi) = 1.
  LogTable1D normalized_at(double xi) const;

  /// exp of the table as a field with exact (table) derivatives.
  Field field() const;

 private:
  double x0_, dx_;
  std::vector<double> log_value_, log_slope_, log_curvature_;
  TableEnd left_, right_;
};

/// exp(alpha . (x - origin)).
struct ExponentialKernel {
  Vec alpha;
  Vec origin;
};

using KernelComponent = std::variant<ExponentialKernel, std::shared_ptr<const LogTable1D>>;

Field kernel_field(const KernelComponent& c);
double kernel_value(const KernelComponent& c, const Vec& x);

/// phi(x) = sum_i weight_i k_i(x): a finite-atom Martin representation.
struct KernelExpansion {
  struct Term {
    double weight;
    KernelComponent kernel;
  };
  std::vector<Term> terms;

  Field field() const;
  nlohmann::json to_json() const;
  static KernelExpansion from_json(const nlohmann::json& j);
};

}  // namespace martin
