#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "martin/errors.hpp"
#include "martin/types.hpp"

namespace martin {

struct QuadratureConfig {
  /// Relative tolerance handed to each adaptive 1D integral.
  double rel_tol = 1e-11;
  /// Bisection depth of the adaptive Gauss-Kronrod rule.
  unsigned max_depth = 18;
};

/// Adaptive 15-point Gauss-Kronrod on [a, b]. Throws QuadratureError (with
/// the partial value) when the error estimate stays above tolerance.
template <typename Scalar, typename F>
Scalar integrate_1d(F&& f, Scalar a, Scalar b, const QuadratureConfig& cfg = {},
                    Scalar* error_out = nullptr) {
  Scalar err = 0, l1 = 0;
  const Scalar v = boost::math::quadrature::gauss_kronrod<Scalar, 15>::integrate(
      f, a, b, cfg.max_depth, static_cast<Scalar>(cfg.rel_tol), &err, &l1);
  if (error_out) *error_out = err;
  if (!std::isfinite(v)) throw QuadratureError("integrate_1d: non-finite value", v);
  if (err > 100 * cfg.rel_tol * std::max(l1, Scalar(1e-300)) && err > 1e-14 * std::abs(v) + 1e-300)
  {
    std::ostringstream os;
    os << "integrate_1d: error estimate " << double(err) << " above tolerance on [" << double(a)
       << ", " << double(b) << "] (value " << double(v) << ", L1 " << double(l1) << ")";
    throw QuadratureError(os.str(), v);
  }
  return v;
}

/// Iterated adaptive integral of f over the box [lo, hi] (one adaptive rule
/// per axis; the innermost axis is the last).
template <typename Scalar>
Scalar integrate_box(const std::function<Scalar(const VectorX<Scalar>&)>& f,
                     const VectorX<Scalar>& lo, const VectorX<Scalar>& hi,
                     const QuadratureConfig& cfg = {}) {
  const Eigen::Index n = lo.size();
  VectorX<Scalar> x(n);
  std::function<Scalar(Eigen::Index)> level = [&](Eigen::Index axis) -> Scalar {
    return integrate_1d<Scalar>(
        [&, axis](Scalar t) {
          x[axis] = t;
          return axis + 1 == n ? f(x) : level(axis + 1);
        },
        lo[axis], hi[axis], cfg);
  };
  return level(0);
}

}  // namespace martin
