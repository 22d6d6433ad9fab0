#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <utility>

#include "martin/errors.hpp"
#include "martin/types.hpp"

namespace martin {

/// Default relative finite-difference step; the step on axis i is
/// `factor * (1 + |x_i|)`.
inline constexpr double kDefaultFdFactor = 1e-4;

/// Real-valued function on R^N with optional analytic first and second
/// derivatives. Missing derivatives fall back to central differences.
template <typename Scalar>
class ScalarField {
 public:
  using State = VectorX<Scalar>;
  using ValueFn = std::function<Scalar(const State&)>;
  using GradientFn = std::function<State(const State&)>;
  using HessianFn = std::function<MatrixX<Scalar>(const State&)>;

  ScalarField() = default;
  explicit ScalarField(ValueFn value, GradientFn gradient = {},
                       HessianFn hessian = {},
                       Scalar fd_factor = Scalar(kDefaultFdFactor))
      : value_(std::move(value)),
        gradient_(std::move(gradient)),
        hessian_(std::move(hessian)),
        fd_factor_(fd_factor) {}

  static ScalarField constant(Scalar c) {
    return ScalarField([c](const State&) { return c; },
                       [](const State& x) { return State::Zero(x.size()); },
                       [](const State& x) {
                         return MatrixX<Scalar>::Zero(x.size(), x.size());
                       });
  }

  /// scale * exp(alpha . (x - origin)), with exact derivatives.
  static ScalarField exponential(Scalar scale, State alpha, State origin) {
    auto v = [=](const State& x) {
      return scale * std::exp(alpha.dot(x - origin));
    };
    auto g = [=](const State& x) -> State { return v(x) * alpha; };
    auto h = [=](const State& x) -> MatrixX<Scalar> {
      return v(x) * alpha * alpha.transpose();
    };
    return ScalarField(v, g, h).with_log_gradient([alpha](const State&) { return alpha; });
  }

  explicit operator bool() const { return static_cast<bool>(value_); }

  Scalar operator()(const State& x) const { return value_(x); }

  /// grad(log f). Defaults to gradient / value; fields that can overflow
  /// supply it in log form.
  State log_gradient(const State& x) const {
    if (log_gradient_) return log_gradient_(x);
    return State(gradient(x) / value_(x));
  }
  ScalarField with_log_gradient(GradientFn fn) const {
    ScalarField out = *this;
    out.log_gradient_ = std::move(fn);
    return out;
  }

  bool has_analytic_gradient() const { return static_cast<bool>(gradient_); }
  bool has_analytic_hessian() const { return static_cast<bool>(hessian_); }
  Scalar fd_factor() const { return fd_factor_; }

  State gradient(const State& x) const {
    if (gradient_) return gradient_(x);
    State g(x.size());
    State xp = x, xm = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const Scalar step = fd_step(x[i]);
      xp[i] = x[i] + step;
      xm[i] = x[i] - step;
      g[i] = (value_(xp) - value_(xm)) / (2 * step);
      xp[i] = xm[i] = x[i];
    }
    return g;
  }

  MatrixX<Scalar> hessian(const State& x) const {
    if (hessian_) return hessian_(x);
    const Eigen::Index n = x.size();
    MatrixX<Scalar> hess(n, n);
    if (gradient_) {
      State xp = x, xm = x;
      for (Eigen::Index j = 0; j < n; ++j) {
        const Scalar step = fd_step(x[j]);
        xp[j] = x[j] + step;
        xm[j] = x[j] - step;
        hess.col(j) = (gradient_(xp) - gradient_(xm)) / (2 * step);
        xp[j] = xm[j] = x[j];
      }
      return Scalar(0.5) * (hess + hess.transpose());
    }
    const Scalar f0 = value_(x);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar hi = fd_step(x[i]);
      State xp = x, xm = x;
      xp[i] += hi;
      xm[i] -= hi;
      hess(i, i) = (value_(xp) - 2 * f0 + value_(xm)) / (hi * hi);
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const Scalar hj = fd_step(x[j]);
        State pp = x, pm = x, mp = x, mm = x;
        pp[i] += hi; pp[j] += hj;
        pm[i] += hi; pm[j] -= hj;
        mp[i] -= hi; mp[j] += hj;
        mm[i] -= hi; mm[j] -= hj;
        hess(i, j) = hess(j, i) =
            (value_(pp) - value_(pm) - value_(mp) + value_(mm)) / (4 * hi * hj);
      }
    }
    return hess;
  }

  /// Field with the analytic derivative slots dropped (forces differencing).
  /// The log-gradient slot is dropped as well.
  ScalarField without_derivatives() const {
    return ScalarField(value_, {}, {}, fd_factor_);
  }

  friend ScalarField operator+(const ScalarField& a, const ScalarField& b) {
    return combine(Scalar(1), a, Scalar(1), b);
  }
  friend ScalarField operator*(Scalar c, const ScalarField& a) {
    return combine(c, a, Scalar(0), ScalarField::constant(Scalar(0)));
  }

  /// ca * a + cb * b; analytic derivatives survive when both sides have them.
  static ScalarField combine(Scalar ca, const ScalarField& a, Scalar cb,
                             const ScalarField& b) {
    auto v = [=](const State& x) { return ca * a(x) + cb * b(x); };
    GradientFn g;
    HessianFn h;
    if (a.has_analytic_gradient() && b.has_analytic_gradient())
      g = [=](const State& x) -> State {
        return ca * a.gradient(x) + cb * b.gradient(x);
      };
    if (a.has_analytic_hessian() && b.has_analytic_hessian())
      h = [=](const State& x) -> MatrixX<Scalar> {
        return ca * a.hessian(x) + cb * b.hessian(x);
      };
    return ScalarField(v, g, h, a.fd_factor_);
  }

 private:
  Scalar fd_step(Scalar xi) const { return fd_factor_ * (1 + std::abs(xi)); }

  ValueFn value_;
  GradientFn gradient_;
  HessianFn hessian_;
  GradientFn log_gradient_;
  Scalar fd_factor_ = Scalar(kDefaultFdFactor);
};

/// R^N -> R^N.
template <typename Scalar>
class VectorField {
 public:
  using State = VectorX<Scalar>;
  using Fn = std::function<State(const State&)>;

  VectorField() = default;
  explicit VectorField(Fn fn) : fn_(std::move(fn)) {}

  static VectorField constant(State c) {
    return VectorField([c](const State&) { return c; });
  }
  /// x -> M x + c.
  static VectorField affine(MatrixX<Scalar> m, State c) {
    return VectorField([m, c](const State& x) -> State { return m * x + c; });
  }

  State operator()(const State& x) const { return fn_(x); }
  explicit operator bool() const { return static_cast<bool>(fn_); }

 private:
  Fn fn_;
};

/// R^N -> R^{N x N}; houses the diffusion matrix sigma.
template <typename Scalar>
class MatrixField {
 public:
  using State = VectorX<Scalar>;
  using Fn = std::function<MatrixX<Scalar>(const State&)>;

  MatrixField() = default;
  explicit MatrixField(Fn fn) : fn_(std::move(fn)) {}

  static MatrixField constant(MatrixX<Scalar> m) {
    return MatrixField([m](const State&) { return m; });
  }

  MatrixX<Scalar> operator()(const State& x) const { return fn_(x); }
  explicit operator bool() const { return static_cast<bool>(fn_); }

 private:
  Fn fn_;
};

using Field = ScalarField<double>;
using VField = VectorField<double>;
using MField = MatrixField<double>;

}  // namespace martin
