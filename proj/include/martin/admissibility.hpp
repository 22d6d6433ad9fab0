#pragma once

// Is a candidate pair an admissible principal pair? The 1D explosion test
// on the h-transformed diffusion, and a Monte Carlo check of E^Q[M_T] = 1.

#include <string>
#include <vector>

#include "martin/model.hpp"
#include "martin/model_io.hpp"
#include "martin/simulate.hpp"

namespace martin {

enum class Verdict { Admissible, NotAdmissible, Inconclusive };
enum class Method { None, ExplosionTest, MonteCarlo, Both };
std::string to_string(Verdict v);
std::string to_string(Method m);

struct AdmissibilityCertificate {
  Verdict verdict = Verdict::Inconclusive;
  Method method = Method::None;
  /// MC mean and standard error of M_T (NaN when not run).
  double mean;
  double std_error;
  double residual;
  std::vector<std::string> notes;

  AdmissibilityCertificate();
  Json to_json() const;
  static AdmissibilityCertificate from_json(const Json& j);
};

/// M_t = exp(lambda t - int_0^t r) h(X_t) / h(X_0).
struct DensityProcess {
  Pair pair;
  double value(double t, double int_rate, const Vec& x_t, const Vec& x_0) const {
    return std::exp(pair.lambda * t - int_rate) * pair.h(x_t) / pair.h(x_0);
  }
};

struct ExplosionConfig {
  double threshold = 1e6;
  /// Minimum relative growth per refinement for "diverges".
  double growth = 0.1;
  /// Relative growth below which the integral counts as settled.
  double stall = 1e-6;
  /// Truncation levels: 2^j away from xi on infinite sides, a fraction
  /// 1 - 2^-j of the distance on finite sides.
  int levels = 40;
  /// Step as a fraction of the distance travelled (or remaining).
  double step_fraction = 1e-3;
};

/// Per-side result of the explosion integral v(x) = int_xi^x int_xi^y
/// 2/a(z) exp(-int_z^y 2b/a) dz dy.
struct ExplosionSide {
  enum class Outcome { Diverges, Converges, Undecided };
  Outcome outcome = Outcome::Undecided;
  double last_value = 0;
  double reached = 0;
};

AdmissibilityCertificate explosion_test_1d(const Model& transformed,
                                           const ExplosionConfig& cfg = {});

struct MartingaleCheck {
  double mean = 0;
  double std_error = 0;
  int flagged = 0;
  int n_paths = 0;
};

/// Simulates X under the risk-neutral model from x0 (default: the reference
/// point) and averages M_T.
MartingaleCheck martingale_check_mc(const Model& model, const Pair& pair, double T, int n_paths,
                                    std::uint64_t seed, const SimConfig& extra = {},
                                    const std::optional<Vec>& x0 = std::nullopt);

struct CertifyConfig {
  double residual_tol = 1e-6;
  double T = 1;
  int n_paths = 20000;
  std::uint64_t seed = 1;
  double dt = 0;
  /// MC passes when |mean - 1| <= se_multiple * se + mc_abs_tol. The
  /// absolute slack covers deterministic M_T, where se is pure rounding.
  double se_multiple = 4;
  double mc_abs_tol = 1e-12;
  ExplosionConfig explosion;
};

AdmissibilityCertificate certify(const Model& model, const Pair& pair,
                                 const CertifyConfig& cfg = {});

}  // namespace martin
