#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "martin/errors.hpp"
#include "martin/field.hpp"

namespace martin {

/// One axis of an axis-aligned domain. Infinite ends are +-infinity.
template <typename Scalar>
struct Interval {
  Scalar left = -std::numeric_limits<Scalar>::infinity();
  Scalar right = std::numeric_limits<Scalar>::infinity();
  std::string left_label = "a";
  std::string right_label = "b";

  bool left_finite() const { return std::isfinite(left); }
  bool right_finite() const { return std::isfinite(right); }
  bool interior(Scalar x) const { return x > left && x < right; }

  /// Reference point: midpoint when bounded, 0 on the line, one unit inside
  /// a half-line.
  Scalar reference() const {
    if (left_finite() && right_finite()) return Scalar(0.5) * (left + right);
    if (left_finite()) return left + 1;
    if (right_finite()) return right - 1;
    return Scalar(0);
  }
};

template <typename Scalar>
using Domain = std::vector<Interval<Scalar>>;

/// Constant a = sigma sigma^T, k and r, recorded when the model has them.
template <typename Scalar>
struct ConstantCoefficients {
  MatrixX<Scalar> a;
  VectorX<Scalar> k;
  Scalar r{};
};

/// Risk-neutral dynamics dX = k(X) dt + sigma(X) dW with short rate r(X).
template <typename Scalar>
struct DiffusionModel {
  using State = VectorX<Scalar>;

  int dim = 1;
  VectorField<Scalar> drift;
  MatrixField<Scalar> sigma;
  ScalarField<Scalar> rate;
  Domain<Scalar> domain;
  std::optional<ConstantCoefficients<Scalar>> constant;

  MatrixX<Scalar> diffusion(const State& x) const {
    const MatrixX<Scalar> s = sigma(x);
    return s * s.transpose();
  }

  bool interior(const State& x) const {
    if (x.size() != dim) return false;
    for (int i = 0; i < dim; ++i)
      if (!domain[i].interior(x[i])) return false;
    return true;
  }

  State reference() const {
    State xi(dim);
    for (int i = 0; i < dim; ++i) xi[i] = domain[i].reference();
    return xi;
  }
};

/// Tensor grid around the reference point: on each axis `per_axis` points
/// spanning [xi - half_width, xi + half_width] clipped to the open domain.
template <typename Scalar>
std::vector<VectorX<Scalar>> sample_grid(const DiffusionModel<Scalar>& model,
                                         int per_axis, Scalar half_width = 2) {
  const auto xi = model.reference();
  std::vector<std::vector<Scalar>> axes(model.dim);
  for (int i = 0; i < model.dim; ++i) {
    const auto& iv = model.domain[i];
    Scalar lo = xi[i] - half_width, hi = xi[i] + half_width;
    const Scalar margin = Scalar(1e-3) * half_width;
    if (iv.left_finite()) lo = std::max(lo, iv.left + margin);
    if (iv.right_finite()) hi = std::min(hi, iv.right - margin);
    for (int j = 0; j < per_axis; ++j)
      axes[i].push_back(per_axis == 1 ? xi[i]
                                      : lo + (hi - lo) * Scalar(j) / Scalar(per_axis - 1));
  }
  std::vector<VectorX<Scalar>> grid;
  std::vector<int> idx(model.dim, 0);
  while (true) {
    VectorX<Scalar> x(model.dim);
    for (int i = 0; i < model.dim; ++i) x[i] = axes[i][idx[i]];
    grid.push_back(x);
    int d = 0;
    while (d < model.dim && ++idx[d] == per_axis) idx[d++] = 0;
    if (d == model.dim) break;
  }
  return grid;
}

/// Default validation grid: 101 points in 1D, 21^2 in 2D, 9^N beyond.
template <typename Scalar>
std::vector<VectorX<Scalar>> default_grid(const DiffusionModel<Scalar>& model) {
  const int per_axis = model.dim == 1 ? 101 : model.dim == 2 ? 21 : 9;
  return sample_grid(model, per_axis);
}

/// Rejects models whose diffusion matrix is not positive definite (only
/// when require_elliptic) or whose rate is negative or non-finite at any
/// sample.
template <typename Scalar>
void validate(const DiffusionModel<Scalar>& model,
              const std::vector<VectorX<Scalar>>& samples, bool require_elliptic = true) {
  if (model.dim < 1) throw UsageError("model.dim must be positive");
  if (static_cast<int>(model.domain.size()) != model.dim)
    throw UsageError("model.domain must have one entry per dimension");
  if (!model.drift || !model.sigma || !model.rate)
    throw UsageError("model requires drift, sigma and rate");
  for (const auto& x : samples) {
    const auto k = model.drift(x);
    if (k.size() != model.dim || !k.allFinite())
      throw EvaluationError("drift is not a finite vector of size dim");
    const MatrixX<Scalar> s = model.sigma(x);
    if (s.rows() != model.dim || s.cols() != model.dim || !s.allFinite())
      throw EvaluationError("sigma is not a finite dim x dim matrix");
    if (require_elliptic) {
      // LLT alone accepts rounding-positive pivots of singular matrices.
      Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(s * s.transpose(), Eigen::EigenvaluesOnly);
      const auto& ev = es.eigenvalues();
      if (es.info() != Eigen::Success ||
          !(ev.maxCoeff() > 0 && ev.minCoeff() > Scalar(1e-12) * ev.maxCoeff()))
        throw DomainError("diffusion matrix sigma sigma^T is not positive definite");
    }
    const Scalar r = model.rate(x);
    if (!std::isfinite(r)) throw EvaluationError("rate is not finite");
    if (r < 0) throw DomainError("rate must be nonnegative");
  }
}

template <typename Scalar>
void validate(const DiffusionModel<Scalar>& model, bool require_elliptic = true) {
  validate(model, default_grid(model), require_elliptic);
}

/// Eigenvalue candidate and positive function with L h = -lambda h.
template <typename Scalar>
struct CandidatePair {
  Scalar lambda{};
  ScalarField<Scalar> h;
};

/// L h(x) = 1/2 sum a_ij d_ij h + sum k_i d_i h - r h.
template <typename Scalar>
Scalar apply_generator(const DiffusionModel<Scalar>& model,
                       const ScalarField<Scalar>& h, const VectorX<Scalar>& x) {
  if (!model.interior(x)) throw DomainError("state outside the model domain");
  const MatrixX<Scalar> a = model.diffusion(x);
  const VectorX<Scalar> k = model.drift(x);
  const Scalar value = h(x);
  const VectorX<Scalar> grad = h.gradient(x);
  const MatrixX<Scalar> hess = h.hessian(x);
  const Scalar out = Scalar(0.5) * a.cwiseProduct(hess).sum() + k.dot(grad) -
                     model.rate(x) * value;
  if (!std::isfinite(out)) throw EvaluationError("generator produced a non-finite value");
  return out;
}

/// max over the grid of |L h + lambda h| / max(1, |h|).
template <typename Scalar>
Scalar pde_residual(const DiffusionModel<Scalar>& model,
                    const CandidatePair<Scalar>& pair,
                    const std::vector<VectorX<Scalar>>& grid) {
  if (grid.empty()) throw UsageError("pde_residual: empty grid");
  Scalar worst = 0;
  for (const auto& x : grid) {
    const Scalar hx = pair.h(x);
    const Scalar res = std::abs(apply_generator(model, pair.h, x) + pair.lambda * hx) /
                       std::max(Scalar(1), std::abs(hx));
    worst = std::max(worst, res);
  }
  return worst;
}

/// Dynamics under the measure induced by h: drift k + a grad(h)/h, same sigma,
/// and the market price of risk rho = sigma^T grad(h)/h.
template <typename Scalar>
struct TransformedDynamics {
  DiffusionModel<Scalar> dynamics;
  VectorField<Scalar> rho;
};

template <typename Scalar>
TransformedDynamics<Scalar> h_transform(const DiffusionModel<Scalar>& model,
                                        const ScalarField<Scalar>& h,
                                        const std::vector<VectorX<Scalar>>& samples) {
  for (const auto& x : samples) {
    const Scalar v = h(x);
    if (!(v > 0)) throw PositivityError("h_transform: h is not positive on the domain");
  }
  TransformedDynamics<Scalar> out;
  out.dynamics = model;
  out.dynamics.constant.reset();
  const auto base = model;
  out.dynamics.drift = VectorField<Scalar>([base, h](const VectorX<Scalar>& x) {
    const VectorX<Scalar> log_grad = h.log_gradient(x);
    return VectorX<Scalar>(base.drift(x) + base.diffusion(x) * log_grad);
  });
  out.rho = VectorField<Scalar>([base, h](const VectorX<Scalar>& x) {
    const VectorX<Scalar> log_grad = h.log_gradient(x);
    return VectorX<Scalar>(base.sigma(x).transpose() * log_grad);
  });
  return out;
}

template <typename Scalar>
TransformedDynamics<Scalar> h_transform(const DiffusionModel<Scalar>& model,
                                        const CandidatePair<Scalar>& pair) {
  return h_transform(model, pair.h, default_grid(model));
}

using Model = DiffusionModel<double>;
using Pair = CandidatePair<double>;
using Transformed = TransformedDynamics<double>;

}  // namespace martin
