#pragma once

// Closed-form Martin kernels for scaled Brownian motion, constant-coefficient
// operators and the planar Ornstein-Uhlenbeck operator 1/2 Lap + <Bx, grad>.

#include <complex>
#include <functional>
#include <limits>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "martin/model.hpp"
#include "martin/quadrature.hpp"

namespace martin {

namespace detail {
template <typename Scalar>
void require_unit(const VectorX<Scalar>& gamma, const char* who) {
  if (gamma.size() == 0 || !(std::abs(gamma.norm() - 1) <= Scalar(1e-10)))
    throw UsageError(std::string(who) + ": gamma must be a unit vector");
}
}  // namespace detail

/// A point of the Martin boundary: a side of a 1D domain or a direction on
/// the sphere, with the curve that reaches it.
template <typename Scalar>
struct MartinBoundaryPoint {
  enum class Kind { Side, Direction };
  Kind kind = Kind::Direction;
  int side = 0;
  VectorX<Scalar> gamma;
  std::function<VectorX<Scalar>(Scalar)> curve;

  static MartinBoundaryPoint at_side(int side, Scalar xi = 0) {
    if (side != 1 && side != -1) throw UsageError("side must be -1 or +1");
    MartinBoundaryPoint p;
    p.kind = Kind::Side;
    p.side = side;
    p.gamma = VectorX<Scalar>::Constant(1, Scalar(side));
    p.curve = [side, xi](Scalar t) { return VectorX<Scalar>::Constant(1, xi + side * t); };
    return p;
  }
  /// Direction gamma with the straight curve t -> gamma t.
  static MartinBoundaryPoint direction(VectorX<Scalar> gamma) {
    detail::require_unit(gamma, "MartinBoundaryPoint");
    MartinBoundaryPoint p;
    p.gamma = gamma;
    p.curve = [gamma](Scalar t) { return VectorX<Scalar>(gamma * t); };
    return p;
  }
};

// ---------------------------------------------------------------- Brownian

/// k(x; gamma) = exp(sqrt(-lambda) gamma . x), minimal for Lap + lambda.
/// At lambda = 0 in dimension >= 3 the boundary is a single point and the
/// kernel is the constant 1.
template <typename Scalar>
Scalar bm_minimal(Scalar lambda, const VectorX<Scalar>& gamma, const VectorX<Scalar>& x) {
  detail::require_unit(gamma, "bm_minimal");
  if (gamma.size() != x.size()) throw UsageError("bm_minimal: dimension mismatch");
  if (lambda == 0 && x.size() >= 3) return Scalar(1);
  if (!(lambda < 0)) throw DomainError("bm_minimal: lambda must be negative");
  return std::exp(std::sqrt(-lambda) * gamma.dot(x));
}

template <typename Scalar>
ScalarField<Scalar> bm_minimal_field(Scalar lambda, const VectorX<Scalar>& gamma) {
  detail::require_unit(gamma, "bm_minimal");
  const auto n = gamma.size();
  if (lambda == 0 && n >= 3) return ScalarField<Scalar>::constant(1);
  if (!(lambda < 0)) throw DomainError("bm_minimal: lambda must be negative");
  return ScalarField<Scalar>::exponential(1, std::sqrt(-lambda) * gamma, VectorX<Scalar>::Zero(n));
}

// ------------------------------------------------------ constant coefficients

/// h(x) = exp(c . x) g(S x) turns 1/2 a:D^2 + k.grad - r + beta into
/// Lap + lambda acting on g.
template <typename Scalar>
struct ConstCoefReduction {
  MatrixX<Scalar> S;
  VectorX<Scalar> c;
  Scalar lambda;
};

template <typename Scalar>
ConstCoefReduction<Scalar> constcoef_reduce(const DiffusionModel<Scalar>& model, Scalar beta) {
  if (!model.constant) throw UsageError("constcoef_reduce: model coefficients are not constant");
  const auto& cc = *model.constant;
  // Eigen sorts self-adjoint eigenvalues ascending.
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(cc.a);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0)
    throw DomainError("constcoef_reduce: a is not positive definite");
  const MatrixX<Scalar>& V = es.eigenvectors();
  const VectorX<Scalar> inv_sqrt = es.eigenvalues().cwiseSqrt().cwiseInverse();
  ConstCoefReduction<Scalar> out;
  out.S = std::sqrt(Scalar(2)) * V * inv_sqrt.asDiagonal() * V.transpose();
  const VectorX<Scalar> ainv_k = cc.a.ldlt().solve(cc.k);
  out.c = -ainv_k;
  out.lambda = beta - cc.r - Scalar(0.5) * cc.k.dot(ainv_k);
  return out;
}

/// Exponent alpha of the minimal function exp(alpha . x) in direction gamma
/// (reduced coordinates), or c alone when lambda = 0 and N >= 3.
template <typename Scalar>
VectorX<Scalar> constcoef_exponent(const ConstCoefReduction<Scalar>& red,
                                   const VectorX<Scalar>& gamma) {
  const auto n = red.c.size();
  if (red.lambda == 0 && n >= 3) return red.c;
  if (!(red.lambda < 0)) throw DomainError("constant-coefficient kernel needs lambda < 0");
  detail::require_unit(gamma, "constcoef_exponent");
  return VectorX<Scalar>(std::sqrt(-red.lambda) * red.S.transpose() * gamma + red.c);
}

// ------------------------------------------------------- Ornstein-Uhlenbeck

/// Planar OU drift matrix with its eigenvalues. In the mixed-sign case the
/// kernel is built in rotated coordinates y = Q^T x from B-hat.
template <typename Scalar>
struct OUSpec {
  MatrixX<Scalar> B;
  std::complex<Scalar> z1, z2;
  bool mixed = false;
  /// Rotation to the subtriangular form (identity unless mixed).
  MatrixX<Scalar> Q;
  /// Matrix whose covariance and curves define the kernel (B or B-hat).
  MatrixX<Scalar> kernel_B;
  /// Drift matrix of the operator that the kernel is harmonic for, in the
  /// original coordinates: B, or Q B-hat Q^T in the mixed case.
  MatrixX<Scalar> harmonic_B;
};

template <typename Scalar>
OUSpec<Scalar> make_ou_spec(const MatrixX<Scalar>& B) {
  if (B.rows() != 2 || B.cols() != 2) throw UsageError("OUSpec: B must be 2x2");
  const Scalar det = B.determinant();
  if (!(std::abs(det) > 1e-14 * std::max(Scalar(1), B.squaredNorm())))
    throw UsageError("OUSpec: B must be nonsingular");
  OUSpec<Scalar> s;
  s.B = B;
  const Scalar tr = B.trace();
  const std::complex<Scalar> disc = std::sqrt(std::complex<Scalar>(tr * tr - 4 * det));
  s.z1 = (tr + disc) / Scalar(2);
  s.z2 = (tr - disc) / Scalar(2);
  s.Q = MatrixX<Scalar>::Identity(2, 2);
  s.kernel_B = B;
  s.harmonic_B = B;
  if (det < 0) {
    // Real eigenvalues z2 < 0 < z1. The first axis is the left eigenvector
    // for z2, so Q^T B Q = [[z2, 0], [b, z1]].
    s.mixed = true;
    const Scalar z2 = s.z2.real(), z1 = s.z1.real();
    MatrixX<Scalar> M = B.transpose() - z2 * MatrixX<Scalar>::Identity(2, 2);
    VectorX<Scalar> q1(2);
    // Null vector of M from its larger row.
    const Eigen::Index r = M.row(0).norm() >= M.row(1).norm() ? 0 : 1;
    q1 << -M(r, 1), M(r, 0);
    q1.normalize();
    if (q1[0] < 0 || (q1[0] == 0 && q1[1] < 0)) q1 = -q1;
    s.Q.col(0) = q1;
    s.Q(0, 1) = -q1[1];
    s.Q(1, 1) = q1[0];
    const MatrixX<Scalar> T = s.Q.transpose() * B * s.Q;
    MatrixX<Scalar> hat(2, 2);
    hat << -z2, 0, T(1, 0), z1;
    s.kernel_B = hat;
    s.harmonic_B = s.Q * hat * s.Q.transpose();
  }
  return s;
}

/// C_B = int_0^inf e^{-Bs} e^{-B^T s} ds, the solution of B C + C B^T = I.
template <typename Scalar>
MatrixX<Scalar> ou_covariance(const MatrixX<Scalar>& B) {
  Eigen::EigenSolver<MatrixX<Scalar>> es(B);
  if (es.eigenvalues().real().minCoeff() <= 0)
    throw DivergentIntegralError("ou_covariance: B needs eigenvalues with positive real part");
  const auto n = B.rows();
  const MatrixX<Scalar> I = MatrixX<Scalar>::Identity(n, n);
  const MatrixX<Scalar> K =
      Eigen::kroneckerProduct(I, B).eval() + Eigen::kroneckerProduct(B, I).eval();
  const VectorX<Scalar> vecI = Eigen::Map<const VectorX<Scalar>>(I.data(), n * n);
  const VectorX<Scalar> vecC = K.fullPivLu().solve(vecI);
  MatrixX<Scalar> C = Eigen::Map<const MatrixX<Scalar>>(vecC.data(), n, n);
  return Scalar(0.5) * (C + C.transpose());
}

template <typename Scalar>
MatrixX<Scalar> ou_covariance(const OUSpec<Scalar>& spec) {
  return ou_covariance(spec.kernel_B);
}

/// K_B(x, t; gamma) = e^{(z1+z2) t} exp(-1/2 (e^{Bt} gamma - x)^T C^{-1}
/// (e^{Bt} gamma - x) - gamma^T C^{-1} gamma), both inverses read as C_B^{-1}.
/// Uses spec.kernel_B; x and gamma are in the kernel's coordinates.
template <typename Scalar>
Scalar ou_kernel_density(const OUSpec<Scalar>& spec, const MatrixX<Scalar>& C,
                         const VectorX<Scalar>& x, Scalar t, const VectorX<Scalar>& gamma) {
  Eigen::LDLT<MatrixX<Scalar>> ldlt(C);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0))
    throw EvaluationError("ou_kernel_density: C_B is singular");
  const MatrixX<Scalar>& Bk = spec.kernel_B;
  const VectorX<Scalar> d = (Bk * t).exp() * gamma - x;
  const Scalar q = d.dot(ldlt.solve(d));
  const Scalar g = gamma.dot(ldlt.solve(gamma));
  return std::exp(Bk.trace() * t - Scalar(0.5) * q - g);
}

struct OUKernelConfig {
  /// Initial symmetric truncation |s| <= start, doubled until the tail is
  /// below tail_tol relative.
  double start = 10;
  double tail_tol = 1e-10;
  int max_doublings = 8;
  QuadratureConfig quad{1e-12, 20};
};

namespace detail {

/// Integrand in the exponent form: log K_B with C^{-1} precomputed.
template <typename Scalar>
struct OUIntegrand {
  MatrixX<Scalar> Bk;
  MatrixX<Scalar> A;  // C_B^{-1}
  Scalar trace;
  VectorX<Scalar> x, gamma;
  Scalar g;

  Scalar operator()(Scalar s) const {
    const VectorX<Scalar> d = (Bk * s).exp() * gamma - x;
    return std::exp(trace * s - Scalar(0.5) * d.dot(A * d) - g);
  }
};

template <typename Scalar>
Scalar ou_integral(const OUIntegrand<Scalar>& f, const OUKernelConfig& cfg) {
  Scalar S = cfg.start;
  Scalar prev = integrate_1d<Scalar>(f, -S, S, cfg.quad);
  for (int i = 0; i < cfg.max_doublings; ++i) {
    S *= 2;
    const Scalar left = integrate_1d<Scalar>(f, -S, -S / 2, cfg.quad);
    const Scalar right = integrate_1d<Scalar>(f, S / 2, S, cfg.quad);
    const Scalar cur = prev + left + right;
    if (std::abs(left + right) <= cfg.tail_tol * std::abs(cur)) return cur;
    prev = cur;
  }
  throw QuadratureError("ou_martin_kernel: tail did not settle", prev);
}

}  // namespace detail

/// k_B(x; gamma) = int K_B(x, s; gamma) ds / int K_B(0, s; gamma) ds, with x
/// and gamma in original coordinates.
template <typename Scalar>
class OUMartinKernel {
 public:
  OUMartinKernel(const OUSpec<Scalar>& spec, VectorX<Scalar> gamma, OUKernelConfig cfg = {})
      : spec_(spec), cfg_(cfg) {
    detail::require_unit(gamma, "ou_martin_kernel");
    f_.Bk = spec.kernel_B;
    f_.A = ou_covariance(spec).inverse();
    f_.trace = spec.kernel_B.trace();
    f_.gamma = spec.Q.transpose() * gamma;
    f_.g = f_.gamma.dot(f_.A * f_.gamma);
    f_.x = VectorX<Scalar>::Zero(2);
    c_gamma_ = detail::ou_integral(f_, cfg_);
  }

  Scalar operator()(const VectorX<Scalar>& x) const {
    detail::OUIntegrand<Scalar> f = f_;
    f.x = spec_.Q.transpose() * x;
    return detail::ou_integral(f, cfg_) / c_gamma_;
  }

  Scalar normalizer() const { return c_gamma_; }

  ScalarField<Scalar> field() const {
    const OUMartinKernel self = *this;
    return ScalarField<Scalar>([self](const VectorX<Scalar>& x) { return self(x); });
  }

 private:
  OUSpec<Scalar> spec_;
  OUKernelConfig cfg_;
  detail::OUIntegrand<Scalar> f_;
  Scalar c_gamma_;
};

template <typename Scalar>
Scalar ou_martin_kernel(const OUSpec<Scalar>& spec, const VectorX<Scalar>& x,
                        const VectorX<Scalar>& gamma, const OUKernelConfig& cfg = {}) {
  return OUMartinKernel<Scalar>(spec, gamma, cfg)(x);
}

/// Martin curve t -> Q e^{B t} Q^T gamma (B-hat in the mixed case).
template <typename Scalar>
MartinBoundaryPoint<Scalar> ou_boundary_point(const OUSpec<Scalar>& spec, VectorX<Scalar> gamma) {
  auto p = MartinBoundaryPoint<Scalar>::direction(gamma);
  const MatrixX<Scalar> Q = spec.Q, Bk = spec.kernel_B;
  p.curve = [Q, Bk, gamma](Scalar t) {
    return VectorX<Scalar>(Q * (Bk * t).exp() * Q.transpose() * gamma);
  };
  return p;
}

// ------------------------------------------------------------ Martin metric

/// rho(z1, z2) = int_U |k1 - k2| / (1 + |k1 - k2|) dx over the box U.
/// Iterated adaptive quadrature; along the innermost axis the zeros of
/// k1 - k2 are located first so each piece is smooth.
template <typename Scalar>
Scalar martin_metric(const std::function<Scalar(const VectorX<Scalar>&)>& k1,
                     const std::function<Scalar(const VectorX<Scalar>&)>& k2,
                     const VectorX<Scalar>& lo, const VectorX<Scalar>& hi,
                     const QuadratureConfig& cfg = {1e-10, 18}, int scan = 64) {
  if (lo.size() != hi.size() || lo.size() == 0) throw UsageError("martin_metric: bad box");
  for (Eigen::Index i = 0; i < lo.size(); ++i)
    if (!(std::isfinite(lo[i]) && std::isfinite(hi[i]) && lo[i] < hi[i]))
      throw UsageError("martin_metric: U must be a bounded box");
  const Eigen::Index n = lo.size();
  VectorX<Scalar> x(n);
  auto diff = [&](Scalar t) {
    x[n - 1] = t;
    return k1(x) - k2(x);
  };
  auto innermost = [&]() {
    std::vector<Scalar> cuts{lo[n - 1]};
    Scalar t0 = lo[n - 1], d0 = diff(t0);
    for (int i = 1; i <= scan; ++i) {
      const Scalar t1 = lo[n - 1] + (hi[n - 1] - lo[n - 1]) * Scalar(i) / Scalar(scan);
      const Scalar d1 = diff(t1);
      if ((d0 < 0 && d1 > 0) || (d0 > 0 && d1 < 0)) {
        Scalar a = t0, b = t1, da = d0;
        for (int it = 0; it < 200 && b - a > 4 * std::numeric_limits<Scalar>::epsilon() * (1 + std::abs(a)); ++it) {
          const Scalar m = Scalar(0.5) * (a + b), dm = diff(m);
          if (dm == 0) {
            // An exact zero; stopping here keeps the cut independent of the
            // kernel order.
            a = b = m;
            break;
          }
          if ((dm < 0) == (da < 0)) {
            a = m;
            da = dm;
          } else {
            b = m;
          }
        }
        cuts.push_back(Scalar(0.5) * (a + b));
      }
      t0 = t1;
      d0 = d1;
    }
    cuts.push_back(hi[n - 1]);
    auto g = [&](Scalar t) {
      const Scalar d = std::abs(diff(t));
      return d / (1 + d);
    };
    // Tolerances are relative to the whole line integral: a sliver next to
    // a zero of k1 - k2 is all rounding noise relative to itself.
    // Pieces whose single-panel estimate already meets that budget keep it;
    // deeper recursion only inflates Boost's error floor on them.
    std::vector<Scalar> rough(cuts.size() - 1), rough_err(cuts.size() - 1);
    Scalar sum = 0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      rough[i] = boost::math::quadrature::gauss_kronrod<Scalar, 15>::integrate(
          g, cuts[i], cuts[i + 1], 0, Scalar(0), &rough_err[i]);
      sum += std::abs(rough[i]);
    }
    Scalar total = 0;
    const Scalar budget = Scalar(1e-3 * cfg.rel_tol) * sum;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      if (std::abs(rough[i]) <= budget || rough_err[i] <= budget) {
        total += rough[i];
        continue;
      }
      QuadratureConfig piece = cfg;
      if (std::abs(rough[i]) < sum)
        piece.rel_tol = std::min(1e-3, cfg.rel_tol * double(sum / std::max(std::abs(rough[i]),
                                                                         Scalar(1e-300))));
      total += integrate_1d<Scalar>(g, cuts[i], cuts[i + 1], piece);
    }
    return total;
  };
  std::function<Scalar(Eigen::Index)> level = [&](Eigen::Index axis) -> Scalar {
    if (axis + 1 == n) return innermost();
    return integrate_1d<Scalar>(
        [&, axis](Scalar t) {
          x[axis] = t;
          return level(axis + 1);
        },
        lo[axis], hi[axis], cfg);
  };
  return level(0);
}

}  // namespace martin
