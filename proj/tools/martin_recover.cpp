// martin_recover: command-line front end.
//
//   martin_recover <command> --model m.json [flags]
//
// Commands: classify, kernels, certify, recover, simulate, yield, cashflow,
// verify. Results go to stdout, or to files in --out <dir> when given.
// Exit status: 0 success, 2 infeasible directive (or failed verify), 1 usage
// or numerical error.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "martin/admissibility.hpp"
#include "martin/expression.hpp"
#include "martin/martin_nd.hpp"
#include "martin/model_io.hpp"
#include "martin/parallel.hpp"
#include "martin/recovery.hpp"
#include "martin/serialize.hpp"
#include "martin/simulate.hpp"
#include "martin/sturm1d.hpp"

namespace fs = std::filesystem;
using namespace martin;

namespace {

struct Flags {
  std::string command;
  std::string model, out, directive, recovered, h_expr, payoff, mode, density;
  std::string side, weights, gamma, ratio, x0, horizons, grid, absorb;
  std::uint64_t seed = 1;
  int paths = 0;
  double dt = 0, T = 0, beta = std::nan(""), tol = 0;
  double span = 5;
  int points = 101;
  int atoms = 64;
  int threads = 0;
  std::string antithetic = "on";
};

/// %.17g keeps doubles exact and the output byte-stable.
std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(flag + ": '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw UsageError(flag + ": empty list");
  return out;
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

Vec parse_vec(const std::string& text, const std::string& flag, int dim) {
  const auto v = parse_list(text, flag);
  if (static_cast<int>(v.size()) != dim)
    throw UsageError(flag + ": expected " + std::to_string(dim) + " components");
  return to_vec(v);
}

/// Writes an artifact to --out/<name> or to stdout.
class Output {
 public:
  explicit Output(std::string dir) : dir_(std::move(dir)) {
    if (!dir_.empty()) fs::create_directories(dir_);
  }
  void emit(const std::string& name, const std::string& content, bool primary = true) const {
    if (dir_.empty()) {
      (primary ? std::cout : std::cerr) << content;
      return;
    }
    std::ofstream f(fs::path(dir_) / name, std::ios::binary);
    if (!f) throw UsageError("--out: cannot write '" + (fs::path(dir_) / name).string() + "'");
    f << content;
  }
  void emit_json(const std::string& name, const Json& j, bool primary = true) const {
    emit(name, j.dump(2) + "\n", primary);
  }

 private:
  std::string dir_;
};

Json model_source(const Flags& f) {
  if (f.model.empty()) throw UsageError("--model: required for '" + f.command + "'");
  return read_json_file(f.model);
}

double require_beta(const Flags& f) {
  if (std::isnan(f.beta)) throw UsageError("--beta: required for '" + f.command + "'");
  return f.beta;
}

Vec start_point(const Flags& f, const Model& m) {
  return f.x0.empty() ? m.reference() : parse_vec(f.x0, "--x0", m.dim);
}

RecoveryOptions recovery_options(const Flags& f) {
  RecoveryOptions opt;
  if (f.tol > 0) opt.beta_tol = f.tol;
  if (f.paths > 0) opt.certify.n_paths = f.paths;
  if (f.T > 0) opt.certify.T = f.T;
  opt.certify.seed = f.seed;
  opt.certify.dt = f.dt;
  return opt;
}

double critical_value_constant(const Model& m) { return -constcoef_reduce(m, 0.0).lambda; }

// ------------------------------------------------------------------ classify

int cmd_classify(const Flags& f, const Output& out) {
  const Json src = model_source(f);
  const Model m = parse_model(src);
  const double tol = f.tol > 0 ? f.tol : 1e-9;
  Json j;
  j["command"] = "classify";
  j["dim"] = m.dim;
  double beta_bar;
  std::function<Json(double)> classify;
  if (m.dim == 1) {
    beta_bar = sturm1d::critical_beta(m, tol);
    classify = [&](double lam) { return criticality_to_json(sturm1d::classify_criticality(m, lam)); };
  } else if (m.constant) {
    beta_bar = critical_value_constant(m);
    classify = [&](double lam) {
      const double l = constcoef_reduce(m, lam).lambda;
      const char* cls = l < 0 ? "subcritical"
                        : l == 0 ? (m.dim >= 3 ? "subcritical" : "critical")
                                 : "supercritical";
      std::ostringstream os;
      os << "reduced lambda " << num(l);
      return Json{{"lambda", lam}, {"class", cls}, {"witness", os.str()}};
    };
  } else {
    throw UsageError("classify: multi-dimensional models need constant coefficients");
  }
  j["beta_bar"] = beta_bar;
  j["tol"] = m.dim == 1 ? tol : 0.0;
  std::vector<double> g = {0, beta_bar > 0 ? 2 * beta_bar : 1, 11};
  if (!f.grid.empty()) {
    g = parse_list(f.grid, "--grid");
    if (g.size() != 3 || g[2] < 1 || g[2] != std::floor(g[2]))
      throw UsageError("--grid: expected lo,hi,n");
  }
  Json rows = Json::array();
  const int n = static_cast<int>(g[2]);
  for (int i = 0; i < n; ++i) {
    const double lam = n == 1 ? g[0] : g[0] + (g[1] - g[0]) * i / (n - 1);
    rows.push_back(classify(lam));
  }
  j["grid"] = rows;
  if (!std::isnan(f.beta)) j["at_beta"] = classify(f.beta);
  out.emit_json("classify.json", j);
  return 0;
}

// ------------------------------------------------------------------- kernels

bool is_ou(const Json& src, Mat& B) {
  if (src.value("dim", 0) != 2) return false;
  const auto& d = src["drift"];
  if (d.value("kind", "") != "linear") return false;
  const Model m = parse_model(src);
  const Vec x0 = Vec::Zero(2);
  if (m.rate(x0) != 0) return false;
  const Mat s = m.sigma(x0);
  if (!(s - Mat::Identity(2, 2)).isZero(0)) return false;
  B.resize(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k) B(i, k) = d.at("matrix")[i][k].get<double>();
  if (d.contains("offset"))
    for (const auto& o : d["offset"])
      if (o.get<double>() != 0) return false;
  return true;
}

int cmd_kernels(const Flags& f, const Output& out) {
  const Json src = model_source(f);
  const Model m = parse_model(src);
  std::ostringstream csv;
  Mat B;
  if (m.dim == 1) {
    const double beta = require_beta(f);
    const auto sol = sturm1d::boundary_solutions(m, beta);
    const auto kl = sturm1d::martin_kernel_1d(sol, m, -1);
    const auto kr = sturm1d::martin_kernel_1d(sol, m, 1);
    const auto& iv = m.domain[0];
    double lo = sol.xi - f.span, hi = sol.xi + f.span;
    if (iv.left_finite()) lo = std::max(lo, iv.left + 1e-3 * f.span);
    if (iv.right_finite()) hi = std::min(hi, iv.right - 1e-3 * f.span);
    csv << "x,k_left,k_right\n";
    for (int i = 0; i < f.points; ++i) {
      const double x = f.points == 1 ? sol.xi : lo + (hi - lo) * i / (f.points - 1);
      csv << num(x) << ',' << num(kl(x)) << ',' << num(kr(x)) << '\n';
    }
  } else if (is_ou(src, B)) {
    if (f.gamma.empty()) throw UsageError("--gamma: required for OU kernels");
    const Vec gamma = parse_vec(f.gamma, "--gamma", 2);
    const auto spec = make_ou_spec(B);
    const OUMartinKernel<double> k(spec, gamma);
    csv << "x1,x2,k\n";
    for (const auto& x : sample_grid(m, 11, f.span))
      csv << num(x[0]) << ',' << num(x[1]) << ',' << num(k(x)) << '\n';
  } else if (m.constant) {
    const double beta = require_beta(f);
    Vec gamma = Vec::Zero(m.dim);
    gamma[0] = 1;
    if (!f.gamma.empty()) gamma = parse_vec(f.gamma, "--gamma", m.dim);
    const auto red = constcoef_reduce(m, beta);
    if (!(red.lambda < 0) && !(red.lambda == 0 && m.dim >= 3))
      throw InfeasibleError("kernels: reduced lambda is not negative; no directional kernels");
    const Vec alpha = constcoef_exponent(red, gamma);
    for (int i = 0; i < m.dim; ++i) csv << 'x' << i + 1 << ',';
    csv << "k\n";
    for (const auto& x : sample_grid(m, m.dim == 2 ? 11 : 5, f.span)) {
      for (int i = 0; i < m.dim; ++i) csv << num(x[i]) << ',';
      csv << num(std::exp(alpha.dot(x - m.reference()))) << '\n';
    }
  } else {
    throw UsageError("kernels: multi-dimensional models need constant coefficients or OU form");
  }
  out.emit("kernels.csv", csv.str());
  return 0;
}

// ------------------------------------------------------------------- certify

int cmd_certify(const Flags& f, const Output& out) {
  Model m;
  Pair pair;
  if (!f.recovered.empty()) {
    LoadedRecovery lr = recovered_from_json(read_json_file(f.recovered));
    m = lr.model;
    pair = lr.rec.principal;
  } else {
    m = parse_model(model_source(f));
    if (f.h_expr.empty()) throw UsageError("--candidate: candidate function required (or --recovered)");
    pair = Pair{require_beta(f), Expression::parse(f.h_expr, m.dim).to_field()};
  }
  const auto opt = recovery_options(f);
  const auto cert = certify(m, pair, opt.certify);
  Json j = cert.to_json();
  j["lambda"] = pair.lambda;
  out.emit_json("certificate.json", j);
  return 0;
}

// ------------------------------------------------------------------- recover

RecoveryDirective directive_from_flags(const Flags& f, int dim) {
  RecoveryDirective d;
  std::string mode = f.mode;
  if (mode.empty()) {
    if (!f.weights.empty()) mode = "mixture";
    else if (!f.side.empty()) mode = "transient_side";
    else if (!f.ratio.empty()) mode = "ratio_nd";
    else if (!f.gamma.empty()) mode = "direction_nd";
    else throw UsageError("recover: give --directive, --mode, --side, --weights, --gamma or --ratio");
  }
  d.mode = recovery_mode_from_string(mode);
  if (d.mode != RecoveryMode::Recurrent) d.beta = require_beta(f);
  switch (d.mode) {
    case RecoveryMode::TransientSide:
      if (f.side == "left") d.side = -1;
      else if (f.side == "right") d.side = 1;
      else throw UsageError("--side: expected left or right");
      break;
    case RecoveryMode::Mixture: {
      const auto w = parse_list(f.weights, "--weights");
      if (w.size() != 2) throw UsageError("--weights: expected p,q");
      d.p = w[0];
      d.q = w[1];
      break;
    }
    case RecoveryMode::Recurrent: break;
    case RecoveryMode::DirectionND: d.gamma = parse_vec(f.gamma, "--gamma", dim); break;
    case RecoveryMode::RatioND: d.ratio = parse_vec(f.ratio, "--ratio", dim); break;
    case RecoveryMode::MeasureND:
      d.density = f.density.empty() ? "1" : f.density;
      d.atoms = f.atoms;
      break;
  }
  d.model_ref = f.model;
  return d;
}

int cmd_recover(const Flags& f, const Output& out) {
  RecoveryDirective d;
  Json src;
  if (!f.directive.empty()) {
    d = directive_from_json(read_json_file(f.directive));
    std::string path = f.model;
    if (path.empty()) {
      if (d.model_ref.empty()) throw UsageError("directive.model_ref: missing (or pass --model)");
      path = (fs::path(f.directive).parent_path() / d.model_ref).string();
    }
    src = read_json_file(path);
  } else {
    src = model_source(f);
  }
  const Model m = parse_model(src);
  if (f.directive.empty()) d = directive_from_flags(f, m.dim);
  const RecoveredMeasure rec = recover(m, d, recovery_options(f));
  out.emit_json("recovered.json", recovered_to_json(rec, src, d));
  return 0;
}

// ------------------------------------------------------------------ simulate

int cmd_simulate(const Flags& f, const Output& out) {
  Model dyn;
  std::optional<LoadedRecovery> lr;
  if (!f.recovered.empty()) {
    lr = recovered_from_json(read_json_file(f.recovered));
    dyn = lr->rec.dynamics;
  } else {
    dyn = parse_model(model_source(f), true);
  }
  SimConfig cfg;
  cfg.T = f.T > 0 ? f.T : 1;
  cfg.dt = f.dt;
  cfg.n_paths = f.paths > 0 ? f.paths : 10000;
  cfg.seed = f.seed;
  cfg.antithetic = f.antithetic == "on";
  const Vec x0 = start_point(f, dyn);
  if (dyn.dim == 1) {
    if (!f.absorb.empty()) {
      const auto a = parse_list(f.absorb, "--absorb");
      if (a.size() != 2 || !(a[0] < a[1])) throw UsageError("--absorb: expected lo,hi with lo < hi");
      cfg.absorb_lo = a[0];
      cfg.absorb_hi = a[1];
    } else if (lr) {
      // Boundary hits at 99% of the truncated domain.
      const auto& iv = dyn.domain[0];
      const double xi = iv.reference(), cut = sturm1d::Config{}.cutoff;
      cfg.absorb_lo = xi - 0.99 * (iv.left_finite() ? xi - iv.left : cut);
      cfg.absorb_hi = xi + 0.99 * (iv.right_finite() ? iv.right - xi : cut);
    }
  }
  const PathEnsemble ens = simulate_paths(dyn, x0, cfg);
  std::ostringstream csv;
  csv << "quantity,label,value,se\n";
  const std::size_t np = static_cast<std::size_t>(ens.n_paths);
  for (int d = 0; d < dyn.dim; ++d) {
    std::vector<double> v, v2;
    double mn = INFINITY, mx = -INFINITY;
    for (std::size_t p = 0; p < np; ++p) {
      const double x = ens.state(0, static_cast<int>(p))[d];
      v.push_back(x);
      mn = std::min(mn, x);
      mx = std::max(mx, x);
    }
    const Estimate e = estimate(v, ens.antithetic);
    for (double x : v) v2.push_back((x - e.mean) * (x - e.mean));
    const Estimate var = estimate(v2, false);
    const std::string lab = "x" + std::to_string(d + 1);
    csv << "terminal_mean," << lab << ',' << num(e.mean) << ',' << num(e.se) << '\n';
    csv << "terminal_variance," << lab << ',' << num(var.mean * np / std::max<double>(1, np - 1))
        << ',' << num(var.se) << '\n';
    csv << "terminal_min," << lab << ',' << num(mn) << ",\n";
    csv << "terminal_max," << lab << ',' << num(mx) << ",\n";
  }
  std::optional<EscapeStatistics> st;
  if (dyn.dim == 1 && (cfg.absorb_lo || cfg.absorb_hi)) {
    st = escape_statistics(ens);
  } else if (lr && dyn.dim > 1 && !lr->rec.mu.atoms.empty()) {
    std::vector<Vec> dirs;
    for (const auto& a : lr->rec.mu.atoms) {
      const Vec dv = a.point.curve(1.0) - a.point.curve(0.0);
      if (dv.norm() > 0) dirs.push_back(dv.normalized());
    }
    if (!dirs.empty()) st = escape_statistics(ens, dirs);
  }
  if (st) {
    for (std::size_t i = 0; i < st->labels.size(); ++i)
      csv << "escape," << st->labels[i] << ',' << num(st->frequency[i].mean) << ','
          << num(st->frequency[i].se) << '\n';
    csv << "decided,all," << st->decided << ",\n";
    if (st->low_power) std::cerr << "warning: " << st->warning << '\n';
  }
  csv << "flagged,all," << ens.flagged_count() << ",\n";
  out.emit("simulate.csv", csv.str());
  return 0;
}

// --------------------------------------------------------------------- yield

std::vector<double> horizons(const Flags& f) {
  const auto h = parse_list(f.horizons.empty() ? "1,2,5,10,20" : f.horizons, "--horizons");
  for (std::size_t i = 0; i < h.size(); ++i)
    if (!(h[i] > 0) || (i > 0 && !(h[i] > h[i - 1])))
      throw UsageError("--horizons: must be positive and increasing");
  return h;
}

int cmd_yield(const Flags& f, const Output& out) {
  const Model m = parse_model(model_source(f));
  SimConfig cfg;
  cfg.dt = f.dt > 0 ? f.dt : 1.0 / 256;
  cfg.n_paths = f.paths > 0 ? f.paths : 10000;
  cfg.seed = f.seed;
  cfg.antithetic = f.antithetic == "on";
  const YieldCurve yc = long_term_yield(m, start_point(f, m), horizons(f), cfg);
  std::ostringstream csv;
  csv << "t,price,price_se,yield,se\n";
  for (const auto& r : yc.rows)
    csv << num(r.T) << ',' << num(r.price) << ',' << num(r.price_se) << ',' << num(r.yield) << ','
        << num(r.yield_se) << '\n';
  out.emit("yield.csv", csv.str());
  out.emit_json("yield_fit.json", {{"tail_yield", yc.tail_yield}, {"tail_intercept", yc.tail_intercept}},
                false);
  return 0;
}

// ------------------------------------------------------------------ cashflow

int cmd_cashflow(const Flags& f, const Output& out) {
  if (f.recovered.empty()) throw UsageError("--recovered: required for 'cashflow'");
  const LoadedRecovery lr = recovered_from_json(read_json_file(f.recovered));
  const Field payoff = f.payoff.empty() || f.payoff == "phi"
                           ? lr.rec.principal.h
                           : Expression::parse(f.payoff, lr.model.dim).to_field();
  SimConfig cfg;
  cfg.dt = f.dt > 0 ? f.dt : 1.0 / 128;
  cfg.n_paths = f.paths > 0 ? f.paths : 10000;
  cfg.seed = f.seed;
  cfg.antithetic = f.antithetic == "on";
  const auto T_grid = horizons(f);
  const Vec x0 = start_point(f, lr.model);
  const CashflowResult res = cashflow_rate(lr.model, payoff, lr.rec, x0, T_grid, cfg);
  std::ostringstream csv;
  csv << "t,value,se,max_ratio\n";
  for (const auto& r : res.curve.rows)
    csv << num(r.t) << ',' << num(r.value) << ',' << num(r.se) << ',' << num(r.max_ratio) << '\n';
  out.emit("cashflow.csv", csv.str());
  Json s{{"reference", res.reference},
         {"boundary_values", res.boundary_values},
         {"boundary_settled", res.boundary_settled},
         {"tail_average", res.curve.tail_average},
         {"tail_average_se", res.curve.tail_average_se},
         {"tail_slope", res.curve.tail_slope},
         {"converged", res.curve.converged},
         {"ratio_growth", res.curve.ratio_growth},
         {"diagnostics", res.curve.diagnostics}};
  out.emit_json("cashflow.json", s, false);
  return 0;
}

// -------------------------------------------------------------------- verify

struct Checks {
  Json list = Json::array();
  bool all = true;
  void add(const std::string& name, bool pass, const std::string& detail) {
    list.push_back({{"name", name}, {"pass", pass}, {"detail", detail}});
    all = all && pass;
  }
  template <typename F>
  void run(const std::string& name, F&& body) {
    try {
      std::string detail;
      const bool pass = body(detail);
      add(name, pass, detail);
    } catch (const std::exception& e) {
      add(name, false, std::string("error: ") + e.what());
    }
  }
};

void verify_recovered(Checks& c, const std::string& tag, const Model& m, const Json& src,
                      const RecoveryDirective& d, const RecoveryOptions& opt) {
  std::optional<RecoveredMeasure> rec;
  c.run(tag + ": recover", [&](std::string& detail) {
    rec = recover(m, d, opt);
    detail = "certificate " + to_string(rec->certificate.verdict) + ", residual " + num(rec->residual);
    return rec->residual <= 1e-6 && rec->certificate.verdict == Verdict::Admissible;
  });
  if (!rec) return;
  if (!rec->mu.atoms.empty()) {
    c.run(tag + ": limiting distribution of the whole boundary", [&](std::string& detail) {
      double worst = 0;
      for (const auto& x : default_grid(m))
        worst = std::max(worst, std::abs(limiting_distribution(*rec, x, BoundarySet::all()) - 1));
      detail = "max |P - 1| = " + num(worst);
      return worst <= 1e-14;
    });
  }
  c.run(tag + ": JSON round trip", [&](std::string& detail) {
    const Json j = recovered_to_json(*rec, src, d);
    const LoadedRecovery lr = recovered_from_json(Json::parse(j.dump()));
    double worst = 0;
    for (const auto& [x, k] : lr.drift_samples)
      worst = std::max(worst, (lr.rec.dynamics.drift(x) - k).cwiseAbs().maxCoeff());
    detail = "max drift difference " + num(worst);
    return worst <= 1e-12;
  });
}

int cmd_verify(const Flags& f, const Output& out) {
  const Json src = model_source(f);
  const Model m = parse_model(src);
  const auto opt = recovery_options(f);
  Checks c;
  c.add("model validates", true, "diffusion positive definite and rate nonnegative on the grid");
  if (m.dim == 1) {
    double beta_bar = std::nan("");
    c.run("critical value", [&](std::string& detail) {
      beta_bar = sturm1d::critical_beta(m, opt.beta_tol);
      sturm1d::Config probe;
      probe.lambda_resolution = 2 * opt.beta_tol;
      const auto rep = sturm1d::classify_criticality(m, beta_bar, probe);
      detail = "beta_bar " + num(beta_bar) + " classified " + sturm1d::to_string(rep.cls);
      return rep.cls == sturm1d::Criticality::Critical;
    });
    if (!std::isnan(f.beta)) {
      const double beta = f.beta;
      c.run("kernel residuals", [&](std::string& detail) {
        const auto sol = sturm1d::boundary_solutions(m, beta);
        double worst = 0;
        for (int side : {-1, 1}) {
          const auto k = sturm1d::martin_kernel_1d(sol, m, side);
          worst = std::max(worst, pde_residual(m, Pair{beta, k.kernel->field()}, default_grid(m)));
        }
        detail = "max residual " + num(worst);
        return worst <= 1e-8;
      });
      int admissible = 0;
      for (int side : {-1, 1}) {
        RecoveryDirective d;
        d.beta = beta;
        d.side = side;
        d.model_ref = f.model;
        try {
          recover(m, d, opt);
          ++admissible;
          verify_recovered(c, side > 0 ? "side right" : "side left", m, src, d, opt);
        } catch (const InfeasibleError& e) {
          c.add(side > 0 ? "side right: inadmissible" : "side left: inadmissible", true, e.what());
        }
      }
      c.add("at least one minimal function admissible", admissible > 0,
            std::to_string(admissible) + " admissible sides");
    }
    RecoveryDirective rd;
    rd.mode = RecoveryMode::Recurrent;
    rd.model_ref = f.model;
    try {
      verify_recovered(c, "recurrent", m, src, rd, opt);
    } catch (const InfeasibleError& e) {
      c.add("recurrent: infeasible", true, e.what());
    }
  } else if (m.constant) {
    const double beta = std::isnan(f.beta) ? 0.0 : f.beta;
    RecoveryDirective d;
    d.mode = RecoveryMode::DirectionND;
    d.beta = beta;
    d.gamma = Vec::Zero(m.dim);
    d.gamma[0] = 1;
    d.model_ref = f.model;
    verify_recovered(c, "direction e1", m, src, d, opt);
    c.run("direction e1: drift equals k + a grad(phi)/phi", [&](std::string& detail) {
      const auto rec = recover(m, d, opt);
      double worst = 0;
      for (const auto& x : default_grid(m)) {
        const Vec g = rec.principal.h.gradient(x) / rec.principal.h(x);
        worst = std::max(worst, (rec.dynamics.drift(x) - m.drift(x) - m.diffusion(x) * g).cwiseAbs().maxCoeff());
      }
      detail = "max difference " + num(worst);
      return worst <= 1e-10;
    });
  } else {
    throw UsageError("verify: multi-dimensional models need constant coefficients");
  }
  c.run("simulation reproducible across worker counts", [&](std::string& detail) {
    SimConfig cfg;
    cfg.n_paths = 2000;
    cfg.seed = f.seed;
    cfg.workers = 1;
    const auto a = simulate_paths(m, m.reference(), cfg);
    cfg.workers = 3;
    const auto b = simulate_paths(m, m.reference(), cfg);
    const bool same = a.states == b.states && a.int_rate == b.int_rate;
    detail = same ? "identical ensembles" : "ensembles differ";
    return same;
  });
  out.emit_json("verify.json", {{"command", "verify"}, {"checks", c.list}, {"all_pass", c.all}});
  return c.all ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Martin-boundary recovery toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--model", f.model, "model JSON file");
  app.add_option("--out", f.out, "output directory (default: stdout)");
  app.add_option("--seed", f.seed, "RNG seed");
  app.add_option("--paths", f.paths, "number of paths")->check(CLI::PositiveNumber);
  app.add_option("--dt", f.dt, "Euler step (must divide T)")->check(CLI::PositiveNumber);
  app.add_option("--T", f.T, "horizon")->check(CLI::PositiveNumber);
  app.add_option("--beta", f.beta, "principal eigenvalue beta");
  app.add_option("--side", f.side, "left or right")->check(CLI::IsMember({"left", "right"}));
  app.add_option("--weights", f.weights, "mixture weights p,q");
  app.add_option("--gamma", f.gamma, "unit direction x,y[,z]");
  app.add_option("--ratio", f.ratio, "long-run ratio vector");
  app.add_option("--mode", f.mode, "recovery mode");
  app.add_option("--density", f.density, "sphere density expression (measure_nd)");
  app.add_option("--atoms", f.atoms, "quadrature atoms per angle (measure_nd)");
  app.add_option("--tol", f.tol, "tolerance for the critical-value search")->check(CLI::PositiveNumber);
  app.add_option("--directive", f.directive, "recovery directive JSON");
  app.add_option("--recovered", f.recovered, "recovered-measure JSON from 'recover'");
  app.add_option("--candidate", f.h_expr, "candidate function expression (certify)");
  app.add_option("--payoff", f.payoff, "payoff expression or 'phi' (cashflow)");
  app.add_option("--x0", f.x0, "start state");
  app.add_option("--horizons", f.horizons, "increasing horizons t1,t2,...");
  app.add_option("--grid", f.grid, "lambda grid lo,hi,n (classify)");
  app.add_option("--span", f.span, "half width of kernel tables")->check(CLI::PositiveNumber);
  app.add_option("--points", f.points, "points in 1D kernel tables")->check(CLI::PositiveNumber);
  app.add_option("--absorb", f.absorb, "1D absorbing thresholds lo,hi (simulate)");
  app.add_option("--antithetic", f.antithetic, "antithetic pairs on/off (simulate, yield, cashflow)")
      ->check(CLI::IsMember({"on", "off"}));
  app.add_option("--threads", f.threads, "worker threads (default: hardware, capped by MARTIN_RECOVER_THREADS)");

  const std::vector<std::pair<std::string, int (*)(const Flags&, const Output&)>> commands = {
      {"classify", cmd_classify}, {"kernels", cmd_kernels},   {"certify", cmd_certify},
      {"recover", cmd_recover},   {"simulate", cmd_simulate}, {"yield", cmd_yield},
      {"cashflow", cmd_cashflow}, {"verify", cmd_verify}};
  for (const auto& [name, fn] : commands) app.add_subcommand(name, name + " command");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (f.threads > 0) set_worker_count(f.threads);
    for (const auto& [name, fn] : commands) {
      if (app.got_subcommand(name)) {
        f.command = name;
        const Output out(f.out);
        return fn(f, out);
      }
    }
    return 1;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return 2;
  } catch (const CriticalityError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
