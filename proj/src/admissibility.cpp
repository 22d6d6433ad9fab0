#include "martin/admissibility.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace martin {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

double null_or_number(const Json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return kNaN;
  return j[key].get<double>();
}

ExplosionSide integrate_side(const Model& m, double xi, int d, const ExplosionConfig& cfg,
                             std::string& note) {
  const auto& iv = m.domain[0];
  const bool finite = d > 0 ? iv.right_finite() : iv.left_finite();
  const double D = finite ? std::abs((d > 0 ? iv.right : iv.left) - xi) : 0.0;
  ExplosionSide out;
  double u = 0, J = 0, v = 0, v_prev = 0;
  int stalled = 0;
  Vec x(1);
  const int first = finite ? 1 : 0;
  for (int j = first; j <= cfg.levels; ++j) {
    const double target = finite ? D * (1 - std::ldexp(1.0, -j)) : std::ldexp(1.0, j);
    while (u < target) {
      double h = finite ? cfg.step_fraction * (D - u) : cfg.step_fraction * std::max(u, 1.0);
      h = std::min(h, target - u);
      if (!(h > 0)) break;
      x[0] = xi + d * (u + 0.5 * h);
      const double a = m.diffusion(x)(0, 0);
      const double b = m.drift(x)[0];
      if (!std::isfinite(a) || !std::isfinite(b) || !(a > 0)) {
        std::ostringstream os;
        os << "coefficients not finite at x=" << x[0];
        note = os.str();
        out.last_value = v;
        out.reached = x[0];
        return out;
      }
      const double c = 2 * d * b / a;
      if (std::abs(c * h) < 1e-8) {
        const double Jn = J + 2 / a * (1 - d * b * J) * h;
        v += 0.5 * h * (J + Jn);
        J = Jn;
      } else {
        const double Js = 1 / (d * b);
        const double e = std::exp(-c * h);
        v += Js * h + (J - Js) * (1 - e) / c;
        J = Js + (J - Js) * e;
      }
      u += h;
      if (!std::isfinite(v) || !std::isfinite(J)) {
        out.outcome = ExplosionSide::Outcome::Diverges;
        out.last_value = std::numeric_limits<double>::infinity();
        out.reached = xi + d * u;
        note = "integral overflowed";
        return out;
      }
    }
    out.last_value = v;
    out.reached = xi + d * u;
    if (j > first && v_prev > 0) {
      const double growth = (v - v_prev) / v_prev;
      if (v > cfg.threshold && growth >= cfg.growth) {
        out.outcome = ExplosionSide::Outcome::Diverges;
        return out;
      }
      stalled = growth < cfg.stall ? stalled + 1 : 0;
      if (stalled >= 3) {
        out.outcome = ExplosionSide::Outcome::Converges;
        return out;
      }
    }
    v_prev = v;
  }
  return out;
}

const char* side_word(ExplosionSide::Outcome o) {
  switch (o) {
    case ExplosionSide::Outcome::Diverges: return "diverges";
    case ExplosionSide::Outcome::Converges: return "converges";
    case ExplosionSide::Outcome::Undecided: return "undecided";
  }
  return "?";
}

}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Admissible: return "admissible";
    case Verdict::NotAdmissible: return "not_admissible";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

std::string to_string(Method m) {
  switch (m) {
    case Method::None: return "none";
    case Method::ExplosionTest: return "explosion_test";
    case Method::MonteCarlo: return "monte_carlo";
    case Method::Both: return "both";
  }
  return "?";
}

AdmissibilityCertificate::AdmissibilityCertificate()
    : mean(kNaN), std_error(kNaN), residual(kNaN) {}

Json AdmissibilityCertificate::to_json() const {
  return {{"verdict", to_string(verdict)},
          {"method", to_string(method)},
          {"mean", number_or_null(mean)},
          {"std_error", number_or_null(std_error)},
          {"residual", number_or_null(residual)},
          {"notes", notes}};
}

AdmissibilityCertificate AdmissibilityCertificate::from_json(const Json& j) {
  AdmissibilityCertificate c;
  const auto v = j.at("verdict").get<std::string>();
  c.verdict = v == "admissible"       ? Verdict::Admissible
              : v == "not_admissible" ? Verdict::NotAdmissible
                                      : Verdict::Inconclusive;
  const auto m = j.at("method").get<std::string>();
  c.method = m == "explosion_test" ? Method::ExplosionTest
             : m == "monte_carlo"  ? Method::MonteCarlo
             : m == "both"         ? Method::Both
                                   : Method::None;
  c.mean = null_or_number(j, "mean");
  c.std_error = null_or_number(j, "std_error");
  c.residual = null_or_number(j, "residual");
  if (j.contains("notes")) c.notes = j["notes"].get<std::vector<std::string>>();
  return c;
}

AdmissibilityCertificate explosion_test_1d(const Model& transformed, const ExplosionConfig& cfg) {
  if (transformed.dim != 1) throw UsageError("explosion_test_1d: dynamics must be one-dimensional");
  const double xi = transformed.domain[0].reference();
  AdmissibilityCertificate cert;
  cert.method = Method::ExplosionTest;
  std::string note_l, note_r;
  const ExplosionSide left = integrate_side(transformed, xi, -1, cfg, note_l);
  const ExplosionSide right = integrate_side(transformed, xi, +1, cfg, note_r);
  for (const auto& [name, s, note] :
       {std::tuple{"left", left, note_l}, std::tuple{"right", right, note_r}}) {
    std::ostringstream os;
    os << name << " explosion integral " << side_word(s.outcome) << " (value " << s.last_value
       << " at x=" << s.reached << ")";
    if (!note.empty()) os << ": " << note;
    cert.notes.push_back(os.str());
  }
  using O = ExplosionSide::Outcome;
  if (left.outcome == O::Converges || right.outcome == O::Converges)
    cert.verdict = Verdict::NotAdmissible;
  else if (left.outcome == O::Diverges && right.outcome == O::Diverges)
    cert.verdict = Verdict::Admissible;
  else
    cert.verdict = Verdict::Inconclusive;
  return cert;
}

MartingaleCheck martingale_check_mc(const Model& model, const Pair& pair, double T, int n_paths,
                                    std::uint64_t seed, const SimConfig& extra,
                                    const std::optional<Vec>& x0_opt) {
  if (!(T > 0)) throw UsageError("martingale_check_mc: T must be positive");
  if (n_paths < 1000) throw UsageError("martingale_check_mc: n_paths must be at least 1000");
  SimConfig cfg = extra;
  cfg.T = T;
  cfg.n_paths = n_paths;
  cfg.seed = seed;
  cfg.observe = {T};
  cfg.absorb_lo.reset();
  cfg.absorb_hi.reset();
  const Vec x0 = x0_opt ? *x0_opt : model.reference();
  const PathEnsemble ens = simulate_paths(model, x0, cfg);
  const DensityProcess M{pair};
  std::vector<double> values(static_cast<std::size_t>(n_paths));
  for (int p = 0; p < n_paths; ++p) {
    if (ens.flagged[static_cast<std::size_t>(p)]) {
      values[static_cast<std::size_t>(p)] = 0;
      continue;
    }
    values[static_cast<std::size_t>(p)] =
        M.value(T, ens.integrated_rate(0, p), ens.state(0, p), x0);
  }
  const Estimate e = estimate(values, ens.antithetic);
  return {e.mean, e.se, ens.flagged_count(), n_paths};
}

AdmissibilityCertificate certify(const Model& model, const Pair& pair, const CertifyConfig& cfg) {
  AdmissibilityCertificate cert;
  const auto grid = default_grid(model);
  try {
    cert.residual = pde_residual(model, pair, grid);
  } catch (const Error& e) {
    cert.verdict = Verdict::NotAdmissible;
    cert.notes.push_back(std::string("not a solution: ") + e.what());
    return cert;
  }
  if (!(cert.residual <= cfg.residual_tol)) {
    cert.verdict = Verdict::NotAdmissible;
    std::ostringstream os;
    os << "not a solution: pde residual " << cert.residual << " exceeds " << cfg.residual_tol;
    cert.notes.push_back(os.str());
    return cert;
  }
  Transformed tr;
  try {
    tr = h_transform(model, pair.h, grid);
  } catch (const PositivityError& e) {
    cert.verdict = Verdict::NotAdmissible;
    cert.notes.push_back(e.what());
    return cert;
  }

  Verdict explosion = Verdict::Admissible;
  if (model.dim == 1) {
    const auto ex = explosion_test_1d(tr.dynamics, cfg.explosion);
    explosion = ex.verdict;
    cert.notes.insert(cert.notes.end(), ex.notes.begin(), ex.notes.end());
    cert.method = Method::Both;
  } else {
    cert.method = Method::MonteCarlo;
    cert.notes.push_back("dimension >= 2: admissibility evidenced by Monte Carlo only");
  }

  SimConfig sim;
  sim.dt = cfg.dt;
  const MartingaleCheck mc = martingale_check_mc(model, pair, cfg.T, cfg.n_paths, cfg.seed, sim);
  cert.mean = mc.mean;
  cert.std_error = mc.std_error;
  const bool mc_pass = std::abs(mc.mean - 1) <= cfg.se_multiple * mc.std_error + cfg.mc_abs_tol;
  {
    std::ostringstream os;
    os << "E[M_T] at T=" << cfg.T << ": " << mc.mean << " +- " << mc.std_error << " ("
       << mc.n_paths << " paths, " << mc.flagged << " flagged) "
       << (mc_pass ? "consistent with 1" : "inconsistent with 1");
    cert.notes.push_back(os.str());
  }
  if (explosion == Verdict::NotAdmissible || !mc_pass)
    cert.verdict = Verdict::NotAdmissible;
  else if (explosion == Verdict::Inconclusive)
    cert.verdict = Verdict::Inconclusive;
  else
    cert.verdict = Verdict::Admissible;
  return cert;
}

}  // namespace martin
