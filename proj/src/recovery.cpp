#include "martin/recovery.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "martin/expression.hpp"

namespace martin {

double BoundaryMeasure::total() const {
  double s = 0;
  for (const auto& a : atoms) s += a.weight;
  return s;
}

std::string to_string(RecoveryMode m) {
  switch (m) {
    case RecoveryMode::TransientSide: return "transient_side";
    case RecoveryMode::Mixture: return "mixture";
    case RecoveryMode::Recurrent: return "recurrent";
    case RecoveryMode::DirectionND: return "direction_nd";
    case RecoveryMode::RatioND: return "ratio_nd";
    case RecoveryMode::MeasureND: return "measure_nd";
  }
  return "?";
}

RecoveryMode recovery_mode_from_string(const std::string& s) {
  for (auto m : {RecoveryMode::TransientSide, RecoveryMode::Mixture, RecoveryMode::Recurrent,
                 RecoveryMode::DirectionND, RecoveryMode::RatioND, RecoveryMode::MeasureND})
    if (to_string(m) == s) return m;
  throw UsageError("directive.mode: unknown mode '" + s + "'");
}

namespace {

void require_dim(const Model& m, bool one_d, const char* who) {
  if (one_d && m.dim != 1) throw UsageError(std::string(who) + ": model must be one-dimensional");
  if (!one_d && m.dim < 2) throw UsageError(std::string(who) + ": model must be multi-dimensional");
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : "; ") + s;
  return out;
}

/// Principal pair, dynamics, residual and certificate. Throws InfeasibleError
/// unless the certificate says admissible.
void finish(const Model& model, RecoveredMeasure& rec, const RecoveryOptions& opt) {
  attach_dynamics(model, rec);
  rec.residual = pde_residual(model, rec.principal, default_grid(model));
  if (!(rec.residual <= opt.residual_tol)) {
    std::ostringstream os;
    os << "principal function residual " << rec.residual << " exceeds " << opt.residual_tol;
    throw InfeasibleError(os.str());
  }
  rec.certificate = certify(model, rec.principal, opt.certify);
  if (rec.certificate.verdict != Verdict::Admissible)
    throw InfeasibleError("principal function is " + to_string(rec.certificate.verdict) + ": " +
                          join(rec.certificate.notes));
}

sturm1d::BoundarySolutions subcritical_solutions(const Model& model, double beta,
                                                 const RecoveryOptions& opt,
                                                 sturm1d::CriticalityReport& rep) {
  rep = sturm1d::classify_criticality(model, beta, opt.sturm);
  if (rep.cls != sturm1d::Criticality::Subcritical) {
    std::ostringstream os;
    os << "L + beta is " << to_string(rep.cls) << " at beta = " << beta << " (" << rep.witness
       << ")";
    throw CriticalityError(os.str());
  }
  return sturm1d::boundary_solutions(model, beta, model.reference()[0], opt.sturm);
}

void note_drift(const sturm1d::MartinKernel1D& k, RecoveredMeasure& rec) {
  if (!k.drift_settled) {
    std::ostringstream os;
    os << "transformed drift near the " << (k.side > 0 ? "right" : "left")
       << " truncation is " << k.tail_drift
       << ", not toward that boundary; side identification is ambiguous";
    rec.notes.push_back(os.str());
  }
}

/// Gauss-Legendre nodes and weights on [-1, 1] (Golub-Welsch).
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  Mat J = Mat::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = i / std::sqrt(4.0 * i * i - 1);
    J(i, i - 1) = J(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(J);
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    x[i] = es.eigenvalues()[i];
    const double v = es.eigenvectors()(0, i);
    w[i] = 2 * v * v;
  }
}

}  // namespace

void attach_dynamics(const Model& model, RecoveredMeasure& rec) {
  rec.xi = model.reference();
  rec.principal = Pair{rec.beta, rec.expansion.field()};
  const auto* single = rec.expansion.terms.size() == 1
                           ? std::get_if<ExponentialKernel>(&rec.expansion.terms[0].kernel)
                           : nullptr;
  if (single && model.constant) {
    // Constant coefficients stay constant under an exponential h-transform.
    const auto& cc = *model.constant;
    const Vec drift = cc.k + cc.a * single->alpha;
    rec.dynamics = model;
    rec.dynamics.drift = VField::constant(drift);
    rec.dynamics.constant = ConstantCoefficients<double>{cc.a, drift, cc.r};
    rec.rho = VField::constant(Vec(model.sigma(rec.xi).transpose() * single->alpha));
    return;
  }
  Transformed tr = h_transform(model, rec.principal.h, default_grid(model));
  rec.dynamics = std::move(tr.dynamics);
  rec.rho = std::move(tr.rho);
}

RecoveredMeasure recover_1d(const Model& model, double beta, int side, const RecoveryOptions& opt) {
  require_dim(model, true, "recover_1d");
  if (side != 1 && side != -1) throw UsageError("recover_1d: side must be -1 or +1");
  RecoveredMeasure rec;
  rec.mode = RecoveryMode::TransientSide;
  rec.beta = beta;
  sturm1d::CriticalityReport rep;
  const auto sol = subcritical_solutions(model, beta, opt, rep);
  rec.criticality = rep;
  const auto k = sturm1d::martin_kernel_1d(sol, model, side, opt.sturm);
  note_drift(k, rec);
  rec.expansion.terms.push_back({1.0, k.kernel});
  rec.mu.atoms.push_back({BoundaryPoint::at_side(side, sol.xi), 1.0, k.kernel});
  try {
    finish(model, rec, opt);
  } catch (const InfeasibleError& e) {
    throw InfeasibleError(std::string("k(x;") + (side > 0 ? "+1" : "-1") +
                          ") is not admissible (only one of k(x;1) and k(x;-1) may be): " +
                          e.what());
  }
  return rec;
}

RecoveredMeasure recover_mixture_1d(const Model& model, double beta, double p, double q,
                                    const RecoveryOptions& opt) {
  require_dim(model, true, "recover_mixture_1d");
  if (!(p >= 0) || !(q >= 0) || !(p + q > 0) || std::abs(p + q - 1) > 1e-12)
    throw UsageError("recover_mixture_1d: weights must be nonnegative with p + q = 1");
  RecoveredMeasure rec;
  rec.mode = RecoveryMode::Mixture;
  rec.beta = beta;
  sturm1d::CriticalityReport rep;
  const auto sol = subcritical_solutions(model, beta, opt, rep);
  rec.criticality = rep;
  for (const auto& [side, w] : {std::pair{-1, p}, std::pair{1, q}}) {
    if (w == 0) continue;
    const auto k = sturm1d::martin_kernel_1d(sol, model, side, opt.sturm);
    note_drift(k, rec);
    rec.expansion.terms.push_back({w, k.kernel});
    rec.mu.atoms.push_back({BoundaryPoint::at_side(side, sol.xi), w, k.kernel});
  }
  finish(model, rec, opt);
  return rec;
}

RecoveredMeasure recover_recurrent_1d(const Model& model, const RecoveryOptions& opt) {
  require_dim(model, true, "recover_recurrent_1d");
  RecoveredMeasure rec;
  rec.mode = RecoveryMode::Recurrent;
  try {
    rec.beta = sturm1d::critical_beta(model, opt.beta_tol, opt.sturm);
  } catch (const SearchError& e) {
    throw InfeasibleError(std::string("critical value not found: ") + e.what());
  }
  sturm1d::Config cfg = opt.sturm;
  cfg.allow_proportional = true;
  sturm1d::BoundarySolutions sol = [&] {
    try {
      return sturm1d::boundary_solutions(model, rec.beta, model.reference()[0], cfg);
    } catch (const CriticalityError& e) {
      throw InfeasibleError(std::string("no positive solution at the critical value: ") + e.what());
    }
  }();
  // Within the bisection tolerance of the critical value the two boundary
  // solutions nearly coincide; their average is an exact solution that sits
  // between them.
  rec.expansion.terms.push_back({0.5, std::make_shared<const LogTable1D>(sol.left)});
  rec.expansion.terms.push_back({0.5, std::make_shared<const LogTable1D>(sol.right)});
  sturm1d::Config probe = opt.sturm;
  probe.lambda_resolution = 2 * opt.beta_tol;
  rec.criticality = sturm1d::classify_criticality(model, rec.beta, probe);
  rec.notes.push_back("recurrent recovery: no limiting boundary measure");
  finish(model, rec, opt);
  return rec;
}

namespace {

RecoveredMeasure direction_impl(const Model& model, double beta, const Vec& gamma,
                                RecoveryMode mode, const RecoveryOptions& opt) {
  require_dim(model, false, "recover_direction_nd");
  if (!model.constant) throw UsageError("recover_direction_nd: model must have constant coefficients");
  if (gamma.size() != model.dim) throw UsageError("directive.gamma: wrong dimension");
  const auto red = constcoef_reduce(model, beta);
  RecoveredMeasure rec;
  rec.mode = mode;
  rec.beta = beta;
  const bool one_point = red.lambda == 0 && model.dim >= 3;
  if (!one_point && !(red.lambda < 0)) {
    std::ostringstream os;
    os << "no directional escape: reduced lambda = " << red.lambda << " is not negative";
    throw InfeasibleError(os.str());
  }
  const Vec alpha = constcoef_exponent(red, gamma);
  const Vec xi = model.reference();
  auto kernel = KernelComponent(ExponentialKernel{alpha, xi});
  rec.expansion.terms.push_back({1.0, kernel});
  BoundaryPoint pt = BoundaryPoint::direction(gamma);
  const Mat Sinv = red.S.inverse();
  pt.curve = [Sinv, gamma, xi](double t) { return Vec(xi + Sinv * gamma * t); };
  rec.mu.atoms.push_back({pt, 1.0, kernel});
  if (one_point) rec.notes.push_back("lambda = 0 in dimension >= 3: one-point Martin boundary");

  finish(model, rec, opt);
  return rec;
}

}  // namespace

RecoveredMeasure recover_direction_nd(const Model& model, double beta, const Vec& gamma,
                                      const RecoveryOptions& opt) {
  return direction_impl(model, beta, gamma, RecoveryMode::DirectionND, opt);
}

RecoveredMeasure recover_ratio_nd(const Model& model, double beta, const Vec& ratio,
                                  const RecoveryOptions& opt) {
  if (ratio.size() != model.dim) throw UsageError("directive.ratio: wrong dimension");
  bool zero_seen = false;
  for (Eigen::Index i = 0; i < ratio.size(); ++i) {
    if (ratio[i] < 0) throw UsageError("directive.ratio: entries must be nonnegative");
    if (ratio[i] == 0) zero_seen = true;
    else if (zero_seen) throw UsageError("directive.ratio: positive entries must come first");
  }
  if (!(ratio[0] > 0) || std::abs(ratio.norm() - 1) > 1e-10)
    throw UsageError("directive.ratio: must have unit norm with a positive first entry");
  return direction_impl(model, beta, ratio, RecoveryMode::RatioND, opt);
}

RecoveredMeasure recover_measure_nd(const Model& model, double beta, const std::string& density,
                                    int atoms, const RecoveryOptions& opt) {
  require_dim(model, false, "recover_measure_nd");
  if (!model.constant) throw UsageError("recover_measure_nd: model must have constant coefficients");
  if (model.dim > 3) throw UsageError("recover_measure_nd: sphere quadrature for N <= 3 only");
  if (atoms < 4) throw UsageError("directive.atoms: need at least 4");
  const auto red = constcoef_reduce(model, beta);
  if (!(red.lambda < 0)) {
    std::ostringstream os;
    os << "no directional escape: reduced lambda = " << red.lambda << " is not negative";
    throw InfeasibleError(os.str());
  }
  const Expression dens = Expression::parse(density, model.dim);
  std::vector<std::pair<Vec, double>> nodes;
  if (model.dim == 2) {
    for (int j = 0; j < atoms; ++j) {
      const double th = 2 * std::numbers::pi * j / atoms;
      Vec g(2);
      g << std::cos(th), std::sin(th);
      nodes.push_back({g, 2 * std::numbers::pi / atoms});
    }
  } else {
    std::vector<double> ct, wt;
    gauss_legendre(std::max(2, atoms / 2), ct, wt);
    for (std::size_t i = 0; i < ct.size(); ++i) {
      const double st = std::sqrt(std::max(0.0, 1 - ct[i] * ct[i]));
      for (int j = 0; j < atoms; ++j) {
        const double ph = 2 * std::numbers::pi * j / atoms;
        Vec g(3);
        g << st * std::cos(ph), st * std::sin(ph), ct[i];
        nodes.push_back({g.normalized(), wt[i] * 2 * std::numbers::pi / atoms});
      }
    }
  }
  double total = 0;
  std::vector<double> w;
  for (const auto& [g, qw] : nodes) {
    const double d = dens(g);
    if (!(d >= 0) || !std::isfinite(d)) throw UsageError("directive.density: must be finite and nonnegative");
    w.push_back(d * qw);
    total += d * qw;
  }
  if (!(total > 0)) throw UsageError("directive.density: zero total mass");
  RecoveredMeasure rec;
  rec.mode = RecoveryMode::MeasureND;
  rec.beta = beta;
  const Vec xi = model.reference();
  const Mat Sinv = red.S.inverse();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (w[i] == 0) continue;
    const Vec g = nodes[i].first;
    auto kernel = KernelComponent(ExponentialKernel{constcoef_exponent(red, g), xi});
    BoundaryPoint pt = BoundaryPoint::direction(g);
    pt.curve = [Sinv, g, xi](double t) { return Vec(xi + Sinv * g * t); };
    rec.expansion.terms.push_back({w[i] / total, kernel});
    rec.mu.atoms.push_back({pt, w[i] / total, kernel});
  }
  finish(model, rec, opt);
  return rec;
}

RecoveredMeasure recover(const Model& model, const RecoveryDirective& d, const RecoveryOptions& opt) {
  switch (d.mode) {
    case RecoveryMode::TransientSide: return recover_1d(model, d.beta, d.side, opt);
    case RecoveryMode::Mixture: return recover_mixture_1d(model, d.beta, d.p, d.q, opt);
    case RecoveryMode::Recurrent: return recover_recurrent_1d(model, opt);
    case RecoveryMode::DirectionND: return recover_direction_nd(model, d.beta, d.gamma, opt);
    case RecoveryMode::RatioND: return recover_ratio_nd(model, d.beta, d.ratio, opt);
    case RecoveryMode::MeasureND: return recover_measure_nd(model, d.beta, d.density, d.atoms, opt);
  }
  throw UsageError("directive.mode: unknown");
}

bool BoundarySet::contains(const BoundaryPoint& p) const {
  switch (kind) {
    case Kind::All: return true;
    case Kind::Sides:
      if (p.kind != BoundaryPoint::Kind::Side) throw UsageError("boundary set: sides need a 1D boundary");
      for (int s : sides)
        if (s == p.side) return true;
      return false;
    case Kind::Arc: {
      if (p.kind != BoundaryPoint::Kind::Direction || p.gamma.size() != 2)
        throw UsageError("boundary set: arcs need a planar direction boundary");
      const Vec dir = p.curve(1.0) - p.curve(0.0);
      const double two_pi = 2 * std::numbers::pi;
      double th = std::atan2(dir[1], dir[0]);
      double span = std::fmod(theta1 - theta0, two_pi);
      if (span < 0) span += two_pi;
      if (span == 0 && theta1 != theta0) span = two_pi;
      double off = std::fmod(th - theta0, two_pi);
      if (off < 0) off += two_pi;
      // Half-open [theta0, theta1) so complementary arcs split the mass;
      // atoms within eps of an end snap to it.
      constexpr double eps = 1e-12;
      if (off > two_pi - eps) off = 0;
      return off < span - eps || (off < eps && span > 0);
    }
  }
  return false;
}

double limiting_distribution(const RecoveredMeasure& rec, const Vec& x, const BoundarySet& A) {
  if (rec.mu.atoms.empty())
    throw UsageError("limiting_distribution: recovered measure has no boundary measure");
  double num = 0, den = 0;
  for (const auto& atom : rec.mu.atoms) {
    const double term = atom.weight * kernel_value(atom.kernel, x);
    den += term;
    if (A.contains(atom.point)) num += term;
  }
  return num / den;
}

double curve_limit(const std::function<double(const Vec&)>& g,
                   const std::function<Vec(double)>& curve, double t_max, bool* settled,
                   double tol) {
  double prev = g(curve(1.0));
  bool ok = false;
  for (double t = 2; ; t *= 2) {
    const double tt = std::min(t, t_max);
    const double cur = g(curve(tt));
    ok = std::abs(cur - prev) <= tol * std::max(1.0, std::abs(cur));
    prev = cur;
    if (ok || tt >= t_max) break;
  }
  if (settled) *settled = ok;
  return prev;
}

CashflowResult cashflow_rate(const Model& model, const Field& f, const RecoveredMeasure& rec,
                             const Vec& x0, const std::vector<double>& T_grid,
                             const SimConfig& sim) {
  if (rec.mu.atoms.empty())
    throw UsageError("cashflow_rate: recovered measure has no boundary measure");
  CashflowResult out;
  out.curve = cashflow_curve(model, f, rec.beta, x0, T_grid, sim, rec.principal.h);
  const Field phi = rec.principal.h;
  auto ratio = [&](const Vec& y) { return f(y) / phi(y); };
  for (const auto& atom : rec.mu.atoms) {
    double t_max = 64;
    if (atom.point.kind == BoundaryPoint::Kind::Side) {
      const auto& iv = model.domain[0];
      const bool finite = atom.point.side > 0 ? iv.right_finite() : iv.left_finite();
      const double edge = atom.point.side > 0 ? iv.right : iv.left;
      t_max = 0.99 * (finite ? std::abs(edge - rec.xi[0]) : sturm1d::Config{}.cutoff);
    }
    bool settled = false;
    const double lim = curve_limit(ratio, atom.point.curve, t_max, &settled);
    out.boundary_settled = out.boundary_settled && settled;
    out.boundary_values.push_back(lim);
    out.reference += atom.weight * kernel_value(atom.kernel, x0) * lim;
  }
  return out;
}

}  // namespace martin
