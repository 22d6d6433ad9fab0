#pragma once

// One-dimensional analysis of 1/2 a h'' + k h' + (lambda - r) h = 0:
// shooting, minimal boundary solutions, Green's function, Martin kernels,
// criticality and the critical value of lambda.

#include <memory>
#include <string>
#include <vector>

#include "martin/kernel_expansion.hpp"
#include "martin/model.hpp"

namespace martin::sturm1d {

struct Config {
  /// Distance from the reference point at which infinite ends are truncated.
  double cutoff = 25;
  /// Shots toward the reference point start at cutoff * refine for the
  /// second truncation level.
  double refine = 1.5;
  /// Spacing of the stored lattice (nodes at xi + j * grid_step).
  double grid_step = 0.01;
  /// Relative local error per adaptive step.
  double ode_tol = 1e-10;
  /// Normalized Wronskian below which the two boundary solutions count as
  /// proportional.
  double wronskian_tol = 1e-8;
  /// |h| / (|h| + |h'|) below which a near-zero triggers one refinement.
  double grazing_tol = 1e-8;
  /// When positive, lambda is reported critical if lambda + resolution is
  /// supercritical.
  double lambda_resolution = 0;
  int max_doublings = 40;
  /// boundary_solutions returns proportional (critical) solutions instead of
  /// throwing.
  bool allow_proportional = false;
};

enum class Direction { Left, Right };

/// Nodes of an integrated solution in increasing x.
struct OdeSolution {
  std::vector<double> grid;
  std::vector<double> values;
  std::vector<double> derivs;
  double lambda = 0;
  /// Furthest point reached (the cutoff unless overflow stopped the run).
  double reached = 0;
  bool overflow = false;
};

/// Integrates from the anchor toward one boundary (truncated at the cutoff,
/// or the boundary itself when finite). Stops with `overflow` set when |h|
/// exceeds 1e300.
OdeSolution integrate_ode(const Model& model, double lambda, double anchor, double value,
                          double slope, Direction direction, const Config& cfg = {});

/// Positive solutions minimal at the left and right boundaries, normalized to
/// 1 at xi.
struct BoundarySolutions {
  LogTable1D left;
  LogTable1D right;
  double xi;
  double lambda;
  /// (log u_right)' - (log u_left)' at xi; zero when proportional.
  double log_wronskian;
  /// Change of the log-slopes at xi between the two truncation levels.
  double truncation_error;
};

BoundarySolutions boundary_solutions(const Model& model, double lambda, const Config& cfg = {});
BoundarySolutions boundary_solutions(const Model& model, double lambda, double xi,
                                     const Config& cfg);

/// G(x, y) = u_left(min) u_right(max) / (-a(y) W(y) / 2).
class GreensFunction1D {
 public:
  GreensFunction1D(const Model& model, double lambda, const Config& cfg = {});
  double operator()(double x, double y) const;
  /// G(x, y) / G(xi, y).
  double ratio(double x, double y) const;
  const BoundarySolutions& solutions() const { return sol_; }

 private:
  double log_green(double x, double y) const;
  Model model_;
  BoundarySolutions sol_;
};

double greens_function_1d(const Model& model, double lambda, double x, double y, double xi,
                          const Config& cfg = {});

/// k(.; side): the limit of G(., y) / G(xi, y) as y runs to the boundary on
/// `side` (+1 right, -1 left).
struct MartinKernel1D {
  int side;
  std::shared_ptr<const LogTable1D> kernel;
  /// Transformed drift near the truncation on `side`.
  double tail_drift;
  /// False when that drift does not point toward the boundary.
  bool drift_settled;

  double operator()(double x) const { return (*kernel)(x); }
};

MartinKernel1D martin_kernel_1d(const Model& model, double lambda, int side,
                                const Config& cfg = {});
MartinKernel1D martin_kernel_1d(const BoundarySolutions& sol, const Model& model, int side,
                                const Config& cfg = {});
double martin_kernel_1d(const Model& model, double lambda, double x, int side, double xi,
                        const Config& cfg = {});

enum class Criticality { Subcritical, Critical, Supercritical };
std::string to_string(Criticality c);

struct CriticalityReport {
  double lambda;
  Criticality cls;
  std::string witness;
  double log_wronskian = 0;
};

CriticalityReport classify_criticality(const Model& model, double lambda, const Config& cfg = {});

/// Bisection on classify_criticality over [0, hi] with hi doubled until
/// supercritical. Returns the largest bracket point that is not supercritical.
double critical_beta(const Model& model, double tol, const Config& cfg = {});

}  // namespace martin::sturm1d
