#pragma once

// Recovery: a directive (beta plus a boundary measure, or recurrence) gives
// the principal function phi and the objective-measure dynamics.

#include <optional>
#include <string>
#include <vector>

#include "martin/admissibility.hpp"
#include "martin/kernel_expansion.hpp"
#include "martin/martin_nd.hpp"
#include "martin/simulate.hpp"
#include "martin/sturm1d.hpp"

namespace martin {

using BoundaryPoint = MartinBoundaryPoint<double>;

struct BoundaryAtom {
  BoundaryPoint point;
  double weight;
  /// k(.; point), normalized to 1 at the reference point.
  KernelComponent kernel;
};

struct BoundaryMeasure {
  std::vector<BoundaryAtom> atoms;
  double total() const;
};

enum class RecoveryMode { TransientSide, Mixture, Recurrent, DirectionND, RatioND, MeasureND };
std::string to_string(RecoveryMode m);
RecoveryMode recovery_mode_from_string(const std::string& s);

struct RecoveryDirective {
  double beta = 0;
  RecoveryMode mode = RecoveryMode::TransientSide;
  int side = 1;
  /// Mixture weights mu(-1) = p, mu(+1) = q.
  double p = 0.5, q = 0.5;
  Vec gamma;
  Vec ratio;
  /// MeasureND: density over the sphere (expression in x1..xN read as the
  /// coordinates of gamma) and the number of quadrature atoms per angle.
  std::string density = "1";
  int atoms = 64;
  std::string model_ref;
};

struct RecoveryOptions {
  sturm1d::Config sturm;
  CertifyConfig certify;
  /// Bisection tolerance for the critical value in recurrent mode.
  double beta_tol = 1e-9;
  /// Residual bound on the default grid.
  double residual_tol = 1e-6;
};

struct RecoveredMeasure {
  RecoveryMode mode = RecoveryMode::TransientSide;
  double beta = 0;
  Vec xi;
  /// phi as a sum of kernels; empty weights are never stored.
  KernelExpansion expansion;
  Pair principal;
  Model dynamics;
  VField rho;
  BoundaryMeasure mu;
  AdmissibilityCertificate certificate;
  std::optional<sturm1d::CriticalityReport> criticality;
  double residual = 0;
  std::vector<std::string> notes;
};

RecoveredMeasure recover_1d(const Model& model, double beta, int side,
                            const RecoveryOptions& opt = {});
/// phi = p k(.; -1) + q k(.; +1) with p + q = 1. A zero weight drops its atom.
RecoveredMeasure recover_mixture_1d(const Model& model, double beta, double p, double q,
                                    const RecoveryOptions& opt = {});
RecoveredMeasure recover_recurrent_1d(const Model& model, const RecoveryOptions& opt = {});
/// Constant coefficients: phi(x) = exp((sqrt(-lambda) S^T gamma + c) . x).
RecoveredMeasure recover_direction_nd(const Model& model, double beta, const Vec& gamma,
                                      const RecoveryOptions& opt = {});
/// Long-run ratio p (positive entries on a prefix of axes, unit norm).
RecoveredMeasure recover_ratio_nd(const Model& model, double beta, const Vec& ratio,
                                  const RecoveryOptions& opt = {});
/// Continuous measure on the sphere with the given density, as quadrature
/// atoms (trapezoid on S^1, Gauss-Legendre x trapezoid on S^2).
RecoveredMeasure recover_measure_nd(const Model& model, double beta, const std::string& density,
                                    int atoms, const RecoveryOptions& opt = {});

RecoveredMeasure recover(const Model& model, const RecoveryDirective& d,
                         const RecoveryOptions& opt = {});

/// Fills xi, principal, dynamics and rho from beta and the expansion. Used by
/// the recover_* functions and when a recovered measure is read back.
void attach_dynamics(const Model& model, RecoveredMeasure& rec);

/// A subset of boundary atoms: everything, a set of 1D sides, or an arc of
/// directions on S^1 (angles in radians, counterclockwise, [theta0, theta1)).
struct BoundarySet {
  enum class Kind { All, Sides, Arc };
  Kind kind = Kind::All;
  std::vector<int> sides;
  double theta0 = 0, theta1 = 0;

  static BoundarySet all() { return {}; }
  static BoundarySet of_sides(std::vector<int> s) { return {Kind::Sides, std::move(s), 0, 0}; }
  static BoundarySet arc(double t0, double t1) { return {Kind::Arc, {}, t0, t1}; }
  bool contains(const BoundaryPoint& p) const;
};

/// P(Lim X_t in A | X_0 = x) = phi(x)^-1 sum_{atoms in A} weight k(x; atom).
double limiting_distribution(const RecoveredMeasure& rec, const Vec& x, const BoundarySet& A);

struct CashflowResult {
  CashflowCurve curve;
  /// sum over atoms of weight k(x; atom) lim (f / phi) along the atom's curve.
  double reference = 0;
  std::vector<double> boundary_values;
  bool boundary_settled = true;
};

CashflowResult cashflow_rate(const Model& model, const Field& f, const RecoveredMeasure& rec,
                             const Vec& x0, const std::vector<double>& T_grid,
                             const SimConfig& sim);

/// Limit of g along a Martin curve: g(curve(t)) for t = 1, 2, 4, ... up to
/// t_max, stopping when consecutive values agree to tol.
double curve_limit(const std::function<double(const Vec&)>& g,
                   const std::function<Vec(double)>& curve, double t_max, bool* settled,
                   double tol = 1e-6);

}  // namespace martin
