#pragma once

// Euler-Maruyama ensembles and the estimators built on them.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "martin/model.hpp"

namespace martin {

struct SimConfig {
  double T = 1;
  /// Step; 0 means T / 2^10.
  double dt = 0;
  int n_paths = 10000;
  std::uint64_t seed = 1;
  /// Paths 2i and 2i+1 use opposite increments.
  bool antithetic = true;
  /// Times at which states are kept (multiples of dt in (0, T]); empty means
  /// {T}.
  std::vector<double> observe;
  /// 1D absorbing thresholds. A path that crosses one stops and records the
  /// side and time.
  std::optional<double> absorb_lo, absorb_hi;
  int workers = 0;
};

/// States and accumulators at the observation times. Paths absorbed or
/// flagged before an observation keep their last state there.
struct PathEnsemble {
  int dim = 1;
  int n_paths = 0;
  double dt = 0, T = 0;
  std::uint64_t seed = 0;
  bool antithetic = true;
  std::vector<double> times;
  /// states[(obs * n_paths + path) * dim + axis]
  std::vector<double> states;
  /// int_0^t r(X_s) ds by the trapezoid rule, per (obs, path).
  std::vector<double> int_rate;
  /// -1 / +1 when absorbed at the lower / upper threshold, else 0.
  std::vector<int> hit;
  std::vector<double> hit_time;
  /// Path left the domain or produced a non-finite value.
  std::vector<char> flagged;

  std::size_t steps() const;
  Vec state(std::size_t obs, int path) const;
  double integrated_rate(std::size_t obs, int path) const {
    return int_rate[obs * static_cast<std::size_t>(n_paths) + static_cast<std::size_t>(path)];
  }
  int flagged_count() const;
};

PathEnsemble simulate_paths(const Model& dynamics, const Vec& x0, const SimConfig& cfg);

/// Mean and standard error; with antithetic pairs the error is taken from
/// the pair means.
struct Estimate {
  double mean = 0;
  double se = 0;
};

Estimate estimate(const std::vector<double>& per_path, bool antithetic);

/// Ratio estimate sum(num) / sum(den) with a delta-method error over pairs.
Estimate ratio_estimate(const std::vector<double>& num, const std::vector<double>& den,
                        bool antithetic);

struct EscapeStatistics {
  int n_paths = 0;
  int decided = 0;
  std::vector<std::string> labels;
  /// Frequencies among decided paths.
  std::vector<Estimate> frequency;
  bool low_power = false;
  std::string warning;
};

/// 1D: shares of paths absorbed at the lower / upper threshold (labels
/// "left", "right").
EscapeStatistics escape_statistics(const PathEnsemble& ens);

/// N-D: terminal direction X_T / |X_T| assigned to the nearest of the given
/// unit directions. Paths with |X_T| below min_radius are undecided.
EscapeStatistics escape_statistics(const PathEnsemble& ens, const std::vector<Vec>& directions,
                                   double min_radius = 0);

struct YieldRow {
  double T;
  double price, price_se;
  double yield, yield_se;
};

struct YieldCurve {
  std::vector<YieldRow> rows;
  /// Least-squares slope of -log P against T over the last half of the grid.
  double tail_yield = 0;
  double tail_intercept = 0;
};

/// Bond prices E^Q[exp(-int_0^T r)] at each horizon, yields -log(P)/T and the
/// tail fit.
YieldCurve long_term_yield(const Model& model, const Vec& x0, const std::vector<double>& T_grid,
                           const SimConfig& base);

struct CashflowRow {
  double t;
  /// e^{beta t} p_t with p_t = E^Q[exp(-int_0^t r) f(X_t)].
  double value, se;
  /// max over paths of |f / phi| at time t (only when phi is given).
  double max_ratio;
};

struct CashflowCurve {
  std::vector<CashflowRow> rows;
  double tail_average = 0, tail_average_se = 0;
  /// Least-squares slope of the curve over the last half of the grid.
  double tail_slope = 0;
  /// False when the last step |v_n - v_{n-1}| exceeds
  /// slope_tol * max(|v_n|, peak / 100) + 3 se.
  bool converged = true;
  bool ratio_growth = false;
  std::string diagnostics;
};

CashflowCurve cashflow_curve(const Model& model, const Field& f, double beta, const Vec& x0,
                             const std::vector<double>& T_grid, const SimConfig& base,
                             const std::optional<Field>& phi = std::nullopt,
                             double slope_tol = 0.05);

}  // namespace martin
