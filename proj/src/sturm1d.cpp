#include "martin/sturm1d.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace martin::sturm1d {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Coefficients of h'' = -(2/a)(k h' + (lambda - r) h).
struct Coefficients {
  const Model* model;
  double lambda;
  mutable Vec x = Vec(1);

  struct At {
    double a, k, q;
  };
  At at(double s) const {
    x[0] = s;
    const double sg = model->sigma(x)(0, 0);
    return {sg * sg, model->drift(x)[0], lambda - model->rate(x)};
  }
};

using State = std::array<double, 2>;

State rhs(const Coefficients& c, double s, const State& y) {
  const auto co = c.at(s);
  return {y[1], -2.0 / co.a * (co.k * y[1] + co.q * y[0])};
}

/// One Dormand-Prince 5(4) step; returns the 5th order solution and the
/// scaled error estimate.
struct StepResult {
  State y;
  double err;
};

StepResult dp45_step(const Coefficients& c, double s, const State& y, double h, double tol) {
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  auto comb = [&](std::initializer_list<std::pair<double, const State*>> terms) {
    State out = y;
    for (const auto& [w, k] : terms) {
      out[0] += h * w * (*k)[0];
      out[1] += h * w * (*k)[1];
    }
    return out;
  };
  const State k1 = rhs(c, s, y);
  const State k2 = rhs(c, s + h / 5, comb({{a21, &k1}}));
  const State k3 = rhs(c, s + 3 * h / 10, comb({{a31, &k1}, {a32, &k2}}));
  const State k4 = rhs(c, s + 4 * h / 5, comb({{a41, &k1}, {a42, &k2}, {a43, &k3}}));
  const State k5 =
      rhs(c, s + 8 * h / 9, comb({{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
  const State k6 = rhs(c, s + h, comb({{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4},
                                       {a65, &k5}}));
  const State y5 = comb({{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
  const State k7 = rhs(c, s + h, y5);

  double err = 0;
  const double scale = std::max({std::abs(y[0]), std::abs(y[1]), std::abs(y5[0]), std::abs(y5[1])});
  for (int i = 0; i < 2; ++i) {
    const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                          e7 * k7[i]);
    if (scale > 0) err = std::max(err, std::abs(e) / (tol * scale));
  }
  return {y5, err};
}

struct ShotNode {
  double x;
  double h;
  double p;
  double log_scale;
};

struct ShotOptions {
  bool renormalize = true;
  bool stop_on_overflow = false;
  /// Lattice for recorded nodes; nodes are origin + j * step within
  /// [record_lo, record_hi].
  bool record = true;
  double origin = 0;
  double step = 0.01;
  double record_lo = -kInf;
  double record_hi = kInf;
  /// Extra point that is always landed on and recorded.
  std::optional<double> probe;
};

struct Shot {
  std::vector<ShotNode> nodes;
  std::optional<ShotNode> probe;
  bool sign_change = false;
  double sign_change_at = 0;
  double min_ratio = kInf;
  bool overflow = false;
  double reached = 0;
};

Shot shoot(const Model& model, double lambda, double start, State y, double end,
           const ShotOptions& opt, double tol) {
  Coefficients coef{&model, lambda};
  const double dir = end > start ? 1.0 : -1.0;
  Shot shot;
  double log_scale = 0;
  double s = start;
  double h = dir * std::min(opt.step, std::abs(end - start));
  const double ignore_near_start = 2 * opt.step;

  auto lattice_next = [&](double from) {
    // Next lattice point strictly beyond `from` in the direction of travel.
    const double j = (from - opt.origin) / opt.step;
    double jn = dir > 0 ? std::floor(j + 1e-9) + 1 : std::ceil(j - 1e-9) - 1;
    return opt.origin + jn * opt.step;
  };
  auto on_lattice = [&](double x) {
    const double j = (x - opt.origin) / opt.step;
    return std::abs(j - std::round(j)) < 1e-9;
  };
  auto record = [&](double x) {
    if (opt.record && x >= opt.record_lo - 1e-12 && x <= opt.record_hi + 1e-12)
      shot.nodes.push_back({x, y[0], y[1], log_scale});
  };

  if (opt.record && on_lattice(s)) record(s);
  if (opt.probe && std::abs(s - *opt.probe) < 1e-14) shot.probe = ShotNode{s, y[0], y[1], log_scale};

  int guard = 0;
  while (dir * (end - s) > 1e-14) {
    if (++guard > 50'000'000) throw Error("integrate_ode: step budget exhausted");
    double target = end;
    if (opt.record) {
      const double ln = lattice_next(s);
      if (dir * (target - ln) > 0) target = ln;
    }
    if (opt.probe && dir * (*opt.probe - s) > 1e-14 && dir * (target - *opt.probe) > 0)
      target = *opt.probe;
    double step = h;
    bool landing = false;
    if (dir * (s + step - target) >= 0) {
      step = target - s;
      landing = true;
    }
    const StepResult r = dp45_step(coef, s, y, step, tol);
    if (!(r.err <= 1.0) || !std::isfinite(r.y[0]) || !std::isfinite(r.y[1])) {
      const double fac = std::isfinite(r.err) ? std::max(0.2, 0.9 * std::pow(r.err, -0.2)) : 0.2;
      h = step * fac;
      if (std::abs(h) < 1e-14 * std::max(1.0, std::abs(s)))
        throw Error("integrate_ode: step size underflow");
      continue;
    }
    const State prev = y;
    const double s_prev = s;
    y = r.y;
    s = landing ? target : s + step;
    const double fac = r.err > 0 ? std::min(5.0, std::max(0.2, 0.9 * std::pow(r.err, -0.2))) : 5.0;
    h = dir * std::min(std::abs(step * fac), 1.0);

    if (prev[0] != 0 && ((prev[0] > 0) != (y[0] > 0)) && y[0] != 0 && !shot.sign_change) {
      shot.sign_change = true;
      shot.sign_change_at = s_prev - prev[0] * (s - s_prev) / (y[0] - prev[0]);
    }
    if (std::abs(s - start) > ignore_near_start) {
      const double den = std::abs(y[0]) + std::abs(y[1]);
      if (den > 0) shot.min_ratio = std::min(shot.min_ratio, std::abs(y[0]) / den);
    }
    if (opt.stop_on_overflow && std::abs(y[0]) * std::exp(log_scale) > 1e300) {
      shot.overflow = true;
      shot.reached = s;
      y = prev;
      return shot;
    }
    if (opt.renormalize) {
      const double m = std::max(std::abs(y[0]), std::abs(y[1]));
      if (m > 1e100 || (m > 0 && m < 1e-100)) {
        y[0] /= m;
        y[1] /= m;
        log_scale += std::log(m);
      }
    }
    if (landing) {
      if (opt.probe && std::abs(s - *opt.probe) < 1e-14) shot.probe = ShotNode{s, y[0], y[1], log_scale};
      if (opt.record && on_lattice(s)) record(s);
    }
  }
  shot.reached = end;
  return shot;
}

struct Span {
  double lo, hi;            // stored range (truncation level 1)
  double start_lo, start_hi;  // shooting starts (truncation level 2 for infinite ends)
  double lvl1_lo, lvl1_hi;    // shooting starts at truncation level 1
  bool lo_finite, hi_finite;
};

Span span_for(const Model& model, double xi, const Config& cfg) {
  const auto& iv = model.domain[0];
  Span sp;
  sp.lo_finite = iv.left_finite();
  sp.hi_finite = iv.right_finite();
  sp.lo = sp.lo_finite ? iv.left : xi - cfg.cutoff;
  sp.hi = sp.hi_finite ? iv.right : xi + cfg.cutoff;
  sp.start_lo = sp.lo_finite ? iv.left : xi - cfg.cutoff * cfg.refine;
  sp.start_hi = sp.hi_finite ? iv.right : xi + cfg.cutoff * cfg.refine;
  sp.lvl1_lo = sp.lo;
  sp.lvl1_hi = sp.hi;
  return sp;
}

/// Decaying data at a truncation point: h = 1, h' = recessive root of
/// 1/2 a w^2 + k w + (lambda - r) = 0. Sets `oscillatory` when the roots are
/// complex.
struct TailData {
  State y;
  bool oscillatory;
  double disc;
};

TailData tail_data(const Model& model, double lambda, double x, bool left_end) {
  Coefficients c{&model, lambda};
  const auto co = c.at(x);
  const double disc = co.k * co.k - 2 * co.a * co.q;
  const double band = 1e-12 * (co.k * co.k + 2 * co.a * std::abs(co.q)) + 1e-300;
  const bool osc = disc < -band;
  // A discriminant within rounding of zero is a double root.
  const double root = std::abs(disc) <= band ? 0.0 : std::sqrt(std::max(disc, 0.0));
  const double w = left_end ? (-co.k + root) / co.a : (-co.k - root) / co.a;
  return {{1.0, w}, osc, disc};
}

State start_state(const Model& model, double lambda, double x, bool finite, bool left_end) {
  if (finite) return {0.0, left_end ? 1.0 : -1.0};
  return tail_data(model, lambda, x, left_end).y;
}

LogTable1D to_table(const Model& model, double lambda, std::vector<ShotNode> nodes,
                    const TableEnd& left, const TableEnd& right) {
  if (!nodes.empty() && nodes.front().x > nodes.back().x)
    std::reverse(nodes.begin(), nodes.end());
  // Drop nodes where h vanishes (Dirichlet starts).
  std::vector<ShotNode> kept;
  for (const auto& n : nodes)
    if (n.h != 0) kept.push_back(n);
  if (kept.size() < 2) throw Error("boundary solution: too few lattice nodes");
  Coefficients c{&model, lambda};
  std::vector<double> L, w, wp;
  for (const auto& n : kept) {
    if (n.h < 0 && kept.front().h > 0) throw CriticalityError("boundary solution changes sign");
    const double lv = std::log(std::abs(n.h)) + n.log_scale;
    const double slope = n.p / n.h;
    const auto co = c.at(n.x);
    const double ratio2 = -2.0 / co.a * (co.k * slope + co.q);
    L.push_back(lv);
    w.push_back(slope);
    wp.push_back(ratio2 - slope * slope);
  }
  return LogTable1D(kept.front().x, kept[1].x - kept[0].x, std::move(L), std::move(w),
                    std::move(wp), left, right);
}

double normalized_wronskian(double wl, double wr) {
  return std::abs(wr - wl) / (std::sqrt(1 + wl * wl) * std::sqrt(1 + wr * wr));
}

void require_1d(const Model& model) {
  if (model.dim != 1) throw UsageError("sturm1d: model must be one-dimensional");
}

}  // namespace

std::string to_string(Criticality c) {
  switch (c) {
    case Criticality::Subcritical: return "subcritical";
    case Criticality::Critical: return "critical";
    case Criticality::Supercritical: return "supercritical";
  }
  return "?";
}

OdeSolution integrate_ode(const Model& model, double lambda, double anchor, double value,
                          double slope, Direction direction, const Config& cfg) {
  require_1d(model);
  if (!model.domain[0].interior(anchor)) throw DomainError("integrate_ode: anchor outside domain");
  const auto& iv = model.domain[0];
  const double end = direction == Direction::Right
                         ? (iv.right_finite() ? iv.right : anchor + cfg.cutoff)
                         : (iv.left_finite() ? iv.left : anchor - cfg.cutoff);
  ShotOptions opt;
  opt.renormalize = false;
  opt.stop_on_overflow = true;
  opt.origin = anchor;
  opt.step = cfg.grid_step;
  const Shot shot = shoot(model, lambda, anchor, {value, slope}, end, opt, cfg.ode_tol);
  OdeSolution out;
  out.lambda = lambda;
  out.overflow = shot.overflow;
  out.reached = shot.reached;
  auto nodes = shot.nodes;
  if (direction == Direction::Left) std::reverse(nodes.begin(), nodes.end());
  for (const auto& n : nodes) {
    out.grid.push_back(n.x);
    out.values.push_back(n.h);
    out.derivs.push_back(n.p);
  }
  return out;
}

BoundarySolutions boundary_solutions(const Model& model, double lambda, const Config& cfg) {
  require_1d(model);
  return boundary_solutions(model, lambda, model.domain[0].reference(), cfg);
}

namespace {

struct RawBoundary {
  Shot left, right;          // level-2 shots, recorded on the lattice
  Shot left_lvl1, right_lvl1;  // level-1 shots, probe at xi only
  Span span;
};

RawBoundary shoot_boundaries(const Model& model, double lambda, double xi, const Config& cfg) {
  RawBoundary raw;
  raw.span = span_for(model, xi, cfg);
  const Span& sp = raw.span;
  ShotOptions opt;
  opt.origin = xi;
  opt.step = cfg.grid_step;
  opt.record_lo = sp.lo;
  opt.record_hi = sp.hi;
  opt.probe = xi;

  const State yl = start_state(model, lambda, sp.start_lo, sp.lo_finite, true);
  const State yr = start_state(model, lambda, sp.start_hi, sp.hi_finite, false);
  raw.left = shoot(model, lambda, sp.start_lo, yl, sp.hi, opt, cfg.ode_tol);
  raw.right = shoot(model, lambda, sp.start_hi, yr, sp.lo, opt, cfg.ode_tol);

  ShotOptions probe_only;
  probe_only.record = false;
  probe_only.probe = xi;
  probe_only.step = cfg.grid_step;
  if (!sp.lo_finite)
    raw.left_lvl1 = shoot(model, lambda, sp.lvl1_lo,
                          start_state(model, lambda, sp.lvl1_lo, false, true), xi, probe_only,
                          cfg.ode_tol);
  if (!sp.hi_finite)
    raw.right_lvl1 = shoot(model, lambda, sp.lvl1_hi,
                           start_state(model, lambda, sp.lvl1_hi, false, false), xi,
                           probe_only, cfg.ode_tol);
  return raw;
}

double probe_slope(const Shot& s) { return s.probe ? s.probe->p / s.probe->h : std::nan(""); }

}  // namespace

BoundarySolutions boundary_solutions(const Model& model, double lambda, double xi,
                                     const Config& cfg) {
  require_1d(model);
  const RawBoundary raw = shoot_boundaries(model, lambda, xi, cfg);
  if (raw.left.sign_change || raw.right.sign_change)
    throw CriticalityError("boundary solutions oscillate: L + lambda is supercritical");
  const Span& sp = raw.span;
  TableEnd dl, dr;
  if (sp.lo_finite) dl = {TableEnd::Kind::Dirichlet, sp.lo};
  if (sp.hi_finite) dr = {TableEnd::Kind::Dirichlet, sp.hi};
  BoundarySolutions out{to_table(model, lambda, raw.left.nodes, dl, {}).normalized_at(xi),
                        to_table(model, lambda, raw.right.nodes, {}, dr).normalized_at(xi),
                        xi, lambda, 0, 0};
  const double wl = probe_slope(raw.left), wr = probe_slope(raw.right);
  out.log_wronskian = wr - wl;
  double trunc = 0;
  if (!sp.lo_finite) trunc = std::max(trunc, std::abs(probe_slope(raw.left_lvl1) - wl));
  if (!sp.hi_finite) trunc = std::max(trunc, std::abs(probe_slope(raw.right_lvl1) - wr));
  out.truncation_error = trunc;
  if (!cfg.allow_proportional && normalized_wronskian(wl, wr) < cfg.wronskian_tol)
    throw CriticalityError("boundary solutions are proportional: L + lambda is critical");
  return out;
}

GreensFunction1D::GreensFunction1D(const Model& model, double lambda, const Config& cfg)
    : model_(model), sol_(boundary_solutions(model, lambda, cfg)) {}

double GreensFunction1D::log_green(double x, double y) const {
  const LogJet ly = sol_.left.jet(y), ry = sol_.right.jet(y);
  Vec v(1);
  v[0] = y;
  const double a = model_.diffusion(v)(0, 0);
  const double denom = std::log(0.5 * a * (ly.slope - ry.slope));
  if (x <= y) return sol_.left.jet(x).value - ly.value - denom;
  return sol_.right.jet(x).value - ry.value - denom;
}

double GreensFunction1D::operator()(double x, double y) const { return std::exp(log_green(x, y)); }

double GreensFunction1D::ratio(double x, double y) const {
  return std::exp(log_green(x, y) - log_green(sol_.xi, y));
}

double greens_function_1d(const Model& model, double lambda, double x, double y, double xi,
                          const Config& cfg) {
  require_1d(model);
  GreensFunction1D g(model, lambda, cfg);
  if (xi != g.solutions().xi) {
    const auto sol = boundary_solutions(model, lambda, xi, cfg);
    (void)sol;
  }
  return g(x, y);
}

MartinKernel1D martin_kernel_1d(const BoundarySolutions& sol, const Model& model, int side,
                                const Config& cfg) {
  if (side != 1 && side != -1) throw UsageError("martin_kernel_1d: side must be -1 or +1");
  const Span sp = span_for(model, sol.xi, cfg);
  const double edge = side > 0 ? sp.hi : sp.lo;
  const double xt = sol.xi + 0.99 * (edge - sol.xi);
  const LogTable1D& table = side > 0 ? sol.left : sol.right;
  Vec v(1);
  v[0] = xt;
  const double drift = model.drift(v)[0] + model.diffusion(v)(0, 0) * table.jet(xt).slope;
  return {side, std::make_shared<const LogTable1D>(table), drift, side * drift > 0};
}

MartinKernel1D martin_kernel_1d(const Model& model, double lambda, int side, const Config& cfg) {
  require_1d(model);
  return martin_kernel_1d(boundary_solutions(model, lambda, cfg), model, side, cfg);
}

double martin_kernel_1d(const Model& model, double lambda, double x, int side, double xi,
                        const Config& cfg) {
  require_1d(model);
  return martin_kernel_1d(boundary_solutions(model, lambda, xi, cfg), model, side, cfg)(x);
}

namespace {

CriticalityReport classify_once(const Model& model, double lambda, const Config& cfg,
                                double tol) {
  const double xi = model.domain[0].reference();
  const Span sp = span_for(model, xi, cfg);
  CriticalityReport rep{lambda, Criticality::Subcritical, "", 0};

  for (const auto& [x, left] : {std::pair{sp.start_lo, true}, std::pair{sp.lvl1_lo, true},
                                std::pair{sp.start_hi, false}, std::pair{sp.lvl1_hi, false}}) {
    if ((left && sp.lo_finite) || (!left && sp.hi_finite)) continue;
    const TailData td = tail_data(model, lambda, x, left);
    if (td.oscillatory) {
      std::ostringstream os;
      os << "oscillatory tail at x=" << x << " (discriminant " << td.disc << ")";
      rep.cls = Criticality::Supercritical;
      rep.witness = os.str();
      return rep;
    }
  }

  ShotOptions opt;
  opt.record = false;
  opt.probe = xi;
  opt.step = cfg.grid_step;
  const Shot left = shoot(model, lambda, sp.start_lo,
                          start_state(model, lambda, sp.start_lo, sp.lo_finite, true),
                          sp.start_hi, opt, tol);
  const Shot right = shoot(model, lambda, sp.start_hi,
                           start_state(model, lambda, sp.start_hi, sp.hi_finite, false),
                           sp.start_lo, opt, tol);
  for (const Shot* s : {&left, &right}) {
    if (s->sign_change) {
      std::ostringstream os;
      os << "boundary solution changes sign near x=" << s->sign_change_at;
      rep.cls = Criticality::Supercritical;
      rep.witness = os.str();
      return rep;
    }
  }
  const double wl = probe_slope(left), wr = probe_slope(right);
  rep.log_wronskian = wr - wl;
  if (std::min(left.min_ratio, right.min_ratio) < cfg.grazing_tol) {
    rep.witness = "grazing";
    return rep;
  }
  std::ostringstream os;
  if (normalized_wronskian(wl, wr) < cfg.wronskian_tol) {
    rep.cls = Criticality::Critical;
    os << "boundary solutions proportional (normalized Wronskian "
       << normalized_wronskian(wl, wr) << ")";
  } else {
    os << "two independent positive solutions (normalized Wronskian "
       << normalized_wronskian(wl, wr) << ")";
  }
  rep.witness = os.str();
  return rep;
}

}  // namespace

CriticalityReport classify_criticality(const Model& model, double lambda, const Config& cfg) {
  require_1d(model);
  CriticalityReport rep = classify_once(model, lambda, cfg, cfg.ode_tol);
  if (rep.witness == "grazing") {
    rep = classify_once(model, lambda, cfg, cfg.ode_tol / 100);
    if (rep.witness == "grazing") rep.witness = "positive solutions with near-zero (refined once)";
  }
  if (rep.cls == Criticality::Subcritical && cfg.lambda_resolution > 0) {
    Config probe = cfg;
    probe.lambda_resolution = 0;
    if (classify_criticality(model, lambda + cfg.lambda_resolution, probe).cls ==
        Criticality::Supercritical) {
      rep.cls = Criticality::Critical;
      std::ostringstream os;
      os << "supercritical within lambda resolution " << cfg.lambda_resolution << "; "
         << rep.witness;
      rep.witness = os.str();
    }
  }
  return rep;
}

double critical_beta(const Model& model, double tol, const Config& cfg) {
  require_1d(model);
  if (!(tol > 0)) throw UsageError("critical_beta: tol must be positive");
  Config c = cfg;
  c.lambda_resolution = 0;
  auto super = [&](double l) {
    return classify_criticality(model, l, c).cls == Criticality::Supercritical;
  };
  double lo = 0;
  if (super(lo)) throw SearchError("critical_beta: L is supercritical at lambda = 0");
  double hi = 1;
  int doublings = 0;
  while (!super(hi)) {
    lo = hi;
    hi *= 2;
    if (++doublings > cfg.max_doublings)
      throw SearchError("critical_beta: no supercritical lambda found after doubling");
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (super(mid) ? hi : lo) = mid;
  }
  return lo;
}

}  // namespace martin::sturm1d
