#include "martin/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "martin/parallel.hpp"
#include "martin/rng.hpp"

namespace martin {

namespace {

std::size_t step_count(double T, double dt) {
  if (!(T > 0) || !(dt > 0)) throw UsageError("simulate: T and dt must be positive");
  const double n = std::round(T / dt);
  if (n < 1 || std::abs(n * dt - T) > 1e-9 * T) throw UsageError("simulate: dt must divide T");
  return static_cast<std::size_t>(n);
}

std::vector<std::size_t> observation_steps(const std::vector<double>& times, double dt,
                                           std::size_t steps) {
  std::vector<std::size_t> out;
  for (double t : times) {
    const double n = std::round(t / dt);
    if (!(t > 0) || std::abs(n * dt - t) > 1e-9 * std::max(1.0, t))
      throw UsageError("simulate: observation times must be positive multiples of dt");
    const auto s = static_cast<std::size_t>(n);
    if (s > steps) throw UsageError("simulate: observation time beyond T");
    if (!out.empty() && s <= out.back())
      throw UsageError("simulate: observation times must increase");
    out.push_back(s);
  }
  return out;
}

/// Least squares y = a + b t; returns (a, b).
std::pair<double, double> line_fit(const std::vector<double>& t, const std::vector<double>& y) {
  const double n = static_cast<double>(t.size());
  if (t.size() == 1) return {0.0, y[0] / t[0]};
  double st = 0, sy = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    st += t[i];
    sy += y[i];
  }
  const double mt = st / n, my = sy / n;
  double num = 0, den = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    num += (t[i] - mt) * (y[i] - my);
    den += (t[i] - mt) * (t[i] - mt);
  }
  const double b = den > 0 ? num / den : 0;
  return {my - b * mt, b};
}

}  // namespace

std::size_t PathEnsemble::steps() const { return static_cast<std::size_t>(std::llround(T / dt)); }

Vec PathEnsemble::state(std::size_t obs, int path) const {
  const std::size_t base =
      (obs * static_cast<std::size_t>(n_paths) + static_cast<std::size_t>(path)) *
      static_cast<std::size_t>(dim);
  return Eigen::Map<const Vec>(states.data() + base, dim);
}

int PathEnsemble::flagged_count() const {
  return static_cast<int>(std::count(flagged.begin(), flagged.end(), char(1)));
}

PathEnsemble simulate_paths(const Model& dyn, const Vec& x0, const SimConfig& cfg) {
  if (cfg.n_paths < 1) throw UsageError("simulate: n_paths must be at least 1");
  if (x0.size() != dyn.dim) throw UsageError("simulate: x0 has the wrong dimension");
  if (!dyn.interior(x0)) throw DomainError("simulate: x0 outside the domain");
  if ((cfg.absorb_lo || cfg.absorb_hi) && dyn.dim != 1)
    throw UsageError("simulate: absorbing thresholds are one-dimensional");
  const double dt = cfg.dt > 0 ? cfg.dt : cfg.T / 1024.0;
  const std::size_t steps = step_count(cfg.T, dt);
  const std::vector<double> times = cfg.observe.empty() ? std::vector<double>{cfg.T} : cfg.observe;
  const auto obs_steps = observation_steps(times, dt, steps);

  PathEnsemble ens;
  ens.dim = dyn.dim;
  ens.n_paths = cfg.n_paths;
  ens.dt = dt;
  ens.T = cfg.T;
  ens.seed = cfg.seed;
  ens.antithetic = cfg.antithetic;
  ens.times = times;
  const std::size_t np = static_cast<std::size_t>(cfg.n_paths);
  const std::size_t n = static_cast<std::size_t>(dyn.dim);
  ens.states.assign(times.size() * np * n, 0.0);
  ens.int_rate.assign(times.size() * np, 0.0);
  ens.hit.assign(np, 0);
  ens.hit_time.assign(np, 0.0);
  ens.flagged.assign(np, 0);

  // Constant coefficients are read once.
  const bool constant = dyn.constant.has_value();
  const Vec k0 = constant ? Vec(dyn.drift(x0)) : Vec();
  const Mat s0 = constant ? Mat(dyn.sigma(x0)) : Mat();
  const double r0 = constant ? dyn.rate(x0) : 0.0;
  const double sq = std::sqrt(dt);
  const double lo = cfg.absorb_lo.value_or(-std::numeric_limits<double>::infinity());
  const double hi = cfg.absorb_hi.value_or(std::numeric_limits<double>::infinity());

  std::vector<double> dom_lo(n), dom_hi(n), kc(n, 0.0), sc(n * n, 0.0);
  for (std::size_t d = 0; d < n; ++d) {
    dom_lo[d] = dyn.domain[d].left;
    dom_hi[d] = dyn.domain[d].right;
    if (constant) {
      kc[d] = k0[static_cast<Eigen::Index>(d)] * dt;
      for (std::size_t e = 0; e < n; ++e)
        sc[d * n + e] = s0(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(e)) * sq;
    }
  }

  parallel_for(
      np,
      [&](std::size_t begin, std::size_t end) {
        Vec x(n);
        std::vector<double> z(n), xs(n);
        for (std::size_t p = begin; p < end; ++p) {
          const std::uint64_t stream = cfg.antithetic ? p / 2 : p;
          const double sign = cfg.antithetic && (p % 2 == 1) ? -1.0 : 1.0;
          NormalStream rng(cfg.seed, stream);
          x = x0;
          for (std::size_t d = 0; d < n; ++d) xs[d] = x0[static_cast<Eigen::Index>(d)];
          double acc = 0;
          double r_prev = constant ? r0 : dyn.rate(x);
          bool stopped = false;
          std::size_t next_obs = 0;
          for (std::size_t s = 1; s <= steps; ++s) {
            if (!stopped) {
              rng.normals(s, static_cast<int>(n), z);
              bool inside = true;
              if (constant) {
                for (std::size_t d = 0; d < n; ++d) {
                  double v = xs[d] + kc[d];
                  for (std::size_t e = 0; e < n; ++e) v += sc[d * n + e] * (sign * z[e]);
                  xs[d] = v;
                  inside = inside && std::isfinite(v) && v > dom_lo[d] && v < dom_hi[d];
                }
              } else {
                const Vec k = dyn.drift(x);
                const Mat sg = dyn.sigma(x);
                for (std::size_t d = 0; d < n; ++d) {
                  double v = xs[d] + k[static_cast<Eigen::Index>(d)] * dt;
                  for (std::size_t e = 0; e < n; ++e)
                    v += sg(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(e)) *
                         (sign * sq * z[e]);
                  xs[d] = v;
                  inside = inside && std::isfinite(v) && v > dom_lo[d] && v < dom_hi[d];
                }
              }
              if (!constant || !inside)
                for (std::size_t d = 0; d < n; ++d) x[static_cast<Eigen::Index>(d)] = xs[d];
              if (!inside) {
                ens.flagged[p] = 1;
                stopped = true;
              } else {
                if (constant) {
                  // The trapezoid sum is r t; forming it directly avoids
                  // accumulating rounding.
                  acc = r0 * (static_cast<double>(s) * dt);
                } else {
                  const double r_now = dyn.rate(x);
                  acc += 0.5 * (r_prev + r_now) * dt;
                  r_prev = r_now;
                }
                if (n == 1 && (xs[0] <= lo || xs[0] >= hi)) {
                  ens.hit[p] = xs[0] <= lo ? -1 : 1;
                  ens.hit_time[p] = static_cast<double>(s) * dt;
                  stopped = true;
                }
              }
            }
            while (next_obs < obs_steps.size() && obs_steps[next_obs] == s) {
              const std::size_t slot = next_obs * np + p;
              for (std::size_t d = 0; d < n; ++d) ens.states[slot * n + d] = xs[d];
              ens.int_rate[slot] = acc;
              ++next_obs;
            }
            if (stopped && next_obs < obs_steps.size()) {
              // Frozen: fill the remaining observations at once.
              for (; next_obs < obs_steps.size(); ++next_obs) {
                const std::size_t slot = next_obs * np + p;
                for (std::size_t d = 0; d < n; ++d) ens.states[slot * n + d] = xs[d];
                ens.int_rate[slot] = acc;
              }
            }
            if (stopped && next_obs == obs_steps.size()) break;
          }
        }
      },
      cfg.workers);
  return ens;
}

Estimate estimate(const std::vector<double>& v, bool antithetic) {
  if (v.empty()) return {};
  if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; })) return {v[0], 0.0};
  std::vector<double> units;
  if (antithetic) {
    for (std::size_t i = 0; i < v.size(); i += 2)
      units.push_back(i + 1 < v.size() ? 0.5 * (v[i] + v[i + 1]) : v[i]);
  } else {
    units = v;
  }
  double sum = 0;
  for (double u : units) sum += u;
  const double m = static_cast<double>(units.size());
  Estimate e;
  e.mean = sum / m;
  if (units.size() > 1) {
    double ss = 0;
    for (double u : units) ss += (u - e.mean) * (u - e.mean);
    e.se = std::sqrt(ss / (m - 1) / m);
  }
  // Report the mean of all paths (equal to the pair mean when pairs are full).
  double all = 0;
  for (double x : v) all += x;
  e.mean = all / static_cast<double>(v.size());
  return e;
}

Estimate ratio_estimate(const std::vector<double>& num, const std::vector<double>& den,
                        bool antithetic) {
  std::vector<double> a, b;
  const std::size_t stride = antithetic ? 2 : 1;
  for (std::size_t i = 0; i < num.size(); i += stride) {
    double sa = num[i], sb = den[i];
    if (antithetic && i + 1 < num.size()) {
      sa += num[i + 1];
      sb += den[i + 1];
    }
    a.push_back(sa);
    b.push_back(sb);
  }
  double ta = 0, tb = 0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    ta += a[j];
    tb += b[j];
  }
  Estimate e;
  if (tb <= 0) return e;
  e.mean = ta / tb;
  const double m = static_cast<double>(a.size());
  if (a.size() > 1) {
    double ss = 0;
    for (std::size_t j = 0; j < a.size(); ++j) ss += (a[j] - e.mean * b[j]) * (a[j] - e.mean * b[j]);
    const double bbar = tb / m;
    e.se = std::sqrt(ss / (m - 1) / m) / bbar;
  }
  return e;
}

namespace {

void finish_power(EscapeStatistics& st) {
  if (st.decided < 100) {
    st.low_power = true;
    std::ostringstream os;
    os << "low power: only " << st.decided << " of " << st.n_paths << " paths decided";
    st.warning = os.str();
  }
}

}  // namespace

EscapeStatistics escape_statistics(const PathEnsemble& ens) {
  if (ens.dim != 1) throw UsageError("escape_statistics: use the direction form in N-D");
  EscapeStatistics st;
  st.n_paths = ens.n_paths;
  st.labels = {"left", "right"};
  const std::size_t np = static_cast<std::size_t>(ens.n_paths);
  std::vector<double> left(np), right(np), decided(np);
  for (std::size_t p = 0; p < np; ++p) {
    left[p] = ens.hit[p] == -1;
    right[p] = ens.hit[p] == 1;
    decided[p] = ens.hit[p] != 0;
    st.decided += ens.hit[p] != 0;
  }
  st.frequency = {ratio_estimate(left, decided, ens.antithetic),
                  ratio_estimate(right, decided, ens.antithetic)};
  finish_power(st);
  return st;
}

EscapeStatistics escape_statistics(const PathEnsemble& ens, const std::vector<Vec>& directions,
                                   double min_radius) {
  if (directions.empty()) throw UsageError("escape_statistics: no directions");
  EscapeStatistics st;
  st.n_paths = ens.n_paths;
  const std::size_t np = static_cast<std::size_t>(ens.n_paths);
  const std::size_t last = ens.times.size() - 1;
  std::vector<std::vector<double>> ind(directions.size(), std::vector<double>(np, 0.0));
  std::vector<double> decided(np, 0.0);
  for (std::size_t p = 0; p < np; ++p) {
    if (ens.flagged[p]) continue;
    const Vec x = ens.state(last, static_cast<int>(p));
    const double norm = x.norm();
    if (!(norm > min_radius) || norm == 0) continue;
    std::size_t best = 0;
    double best_dot = -2;
    for (std::size_t i = 0; i < directions.size(); ++i) {
      const double d = directions[i].dot(x) / norm;
      if (d > best_dot) {
        best_dot = d;
        best = i;
      }
    }
    ind[best][p] = 1;
    decided[p] = 1;
    ++st.decided;
  }
  for (std::size_t i = 0; i < directions.size(); ++i) {
    std::ostringstream os;
    os << "dir" << i;
    st.labels.push_back(os.str());
    st.frequency.push_back(ratio_estimate(ind[i], decided, ens.antithetic));
  }
  finish_power(st);
  return st;
}

YieldCurve long_term_yield(const Model& model, const Vec& x0, const std::vector<double>& T_grid,
                           const SimConfig& base) {
  if (T_grid.empty()) throw UsageError("long_term_yield: empty horizon grid");
  SimConfig cfg = base;
  cfg.T = T_grid.back();
  cfg.observe = T_grid;
  cfg.absorb_lo.reset();
  cfg.absorb_hi.reset();
  if (!(cfg.dt > 0)) cfg.dt = 1.0 / 256;
  const PathEnsemble ens = simulate_paths(model, x0, cfg);
  YieldCurve out;
  const std::size_t np = static_cast<std::size_t>(ens.n_paths);
  for (std::size_t i = 0; i < T_grid.size(); ++i) {
    std::vector<double> disc(np);
    for (std::size_t p = 0; p < np; ++p)
      disc[p] = ens.flagged[p] ? 0.0 : std::exp(-ens.int_rate[i * np + p]);
    const Estimate e = estimate(disc, ens.antithetic);
    const double T = T_grid[i];
    out.rows.push_back({T, e.mean, e.se, -std::log(e.mean) / T, e.se / (e.mean * T)});
  }
  std::vector<double> tail_t, tail_y;
  for (std::size_t i = T_grid.size() - (T_grid.size() + 1) / 2; i < T_grid.size(); ++i) {
    tail_t.push_back(out.rows[i].T);
    tail_y.push_back(-std::log(out.rows[i].price));
  }
  const auto [a, b] = line_fit(tail_t, tail_y);
  out.tail_intercept = a;
  out.tail_yield = b;
  return out;
}

CashflowCurve cashflow_curve(const Model& model, const Field& f, double beta, const Vec& x0,
                             const std::vector<double>& T_grid, const SimConfig& base,
                             const std::optional<Field>& phi, double slope_tol) {
  if (T_grid.empty()) throw UsageError("cashflow_rate: empty horizon grid");
  SimConfig cfg = base;
  cfg.T = T_grid.back();
  cfg.observe = T_grid;
  cfg.absorb_lo.reset();
  cfg.absorb_hi.reset();
  const PathEnsemble ens = simulate_paths(model, x0, cfg);
  CashflowCurve out;
  const std::size_t np = static_cast<std::size_t>(ens.n_paths);
  for (std::size_t i = 0; i < T_grid.size(); ++i) {
    std::vector<double> v(np);
    double max_ratio = 0;
    for (std::size_t p = 0; p < np; ++p) {
      if (ens.flagged[p]) {
        v[p] = 0;
        continue;
      }
      const Vec x = ens.state(i, static_cast<int>(p));
      const double fx = f(x);
      v[p] = std::exp(beta * T_grid[i] - ens.int_rate[i * np + p]) * fx;
      if (phi) max_ratio = std::max(max_ratio, std::abs(fx / (*phi)(x)));
    }
    const Estimate e = estimate(v, ens.antithetic);
    out.rows.push_back({T_grid[i], e.mean, e.se, phi ? max_ratio : std::nan("")});
  }
  const std::size_t half = (T_grid.size() + 1) / 2;
  std::vector<double> tt, yy;
  double se2 = 0;
  for (std::size_t i = T_grid.size() - half; i < T_grid.size(); ++i) {
    tt.push_back(out.rows[i].t);
    yy.push_back(out.rows[i].value);
    se2 += out.rows[i].se * out.rows[i].se;
  }
  double avg = 0;
  for (double y : yy) avg += y;
  avg /= static_cast<double>(yy.size());
  out.tail_average = avg;
  // Errors at different horizons share paths; the root-mean-square is used
  // as a conservative stand-in.
  out.tail_average_se = std::sqrt(se2 / static_cast<double>(yy.size()));
  out.tail_slope = tt.size() > 1 ? line_fit(tt, yy).second : 0.0;
  // Convergence: the last step of the curve is small against its size.
  // Curves decaying to zero are measured against one percent of their peak.
  if (out.rows.size() > 1) {
    const auto& a = out.rows[out.rows.size() - 2];
    const auto& b = out.rows.back();
    double peak = 0;
    for (const auto& r : out.rows) peak = std::max(peak, std::abs(r.value));
    const double change = std::abs(b.value - a.value);
    const double allowed = slope_tol * std::max(std::abs(b.value), 0.01 * peak) +
                           3 * std::sqrt(a.se * a.se + b.se * b.se);
    if (change > allowed) {
      out.converged = false;
      std::ostringstream os;
      os << "curve moved by " << change << " between t=" << a.t << " and t=" << b.t
         << " (allowed " << allowed << "); tail slope " << out.tail_slope;
      out.diagnostics = os.str();
    }
  }
  if (phi && out.rows.size() > 1 && out.rows.back().max_ratio > 10 * out.rows.front().max_ratio &&
      out.rows.back().max_ratio > 0) {
    out.ratio_growth = true;
    if (!out.diagnostics.empty()) out.diagnostics += "; ";
    out.diagnostics += "max |f/phi| along paths grows over the horizon";
  }
  return out;
}

}  // namespace martin
