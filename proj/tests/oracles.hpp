#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's solvers.

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// Roots of 1/2 a alpha^2 + k alpha + (lambda - r) = 0, the exponents of
/// exp(alpha x) solutions for constant coefficients. Sorted ascending.
inline std::pair<double, double> exponent_roots(double a, double k, double r, double lambda) {
  const double A = 0.5 * a, B = k, C = lambda - r;
  const double disc = B * B - 4 * A * C;
  const double s = std::sqrt(disc);
  // Stable form of the two roots.
  const double q = -0.5 * (B + std::copysign(s, B == 0 ? 1.0 : B));
  double r1 = q / A, r2 = q != 0 ? C / q : -r1;
  if (q == 0) {
    r1 = s / (2 * A);
    r2 = -r1;
  }
  if (r1 > r2) std::swap(r1, r2);
  return {r1, r2};
}

/// Largest lambda with real exponent roots: max over alpha of
/// r - k alpha - 1/2 a alpha^2, found by golden-section search.
inline double critical_lambda(double a, double k, double r) {
  auto f = [&](double al) { return r - k * al - 0.5 * a * al * al; };
  double lo = -1e3, hi = 1e3;
  const double g = (std::sqrt(5.0) - 1) / 2;
  double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
  for (int i = 0; i < 200; ++i) {
    if (f(c) > f(d)) hi = d;
    else lo = c;
    c = hi - g * (hi - lo);
    d = lo + g * (hi - lo);
  }
  return f(0.5 * (lo + hi));
}

/// Composite Simpson rule with n (even) intervals.
inline double simpson(const std::function<double(double)>& f, double a, double b, long n) {
  if (n % 2) ++n;
  const double h = (b - a) / static_cast<double>(n);
  double s = f(a) + f(b);
  for (long i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + h * static_cast<double>(i));
  return s * h / 3;
}

/// OU kernel density for diagonal B = diag(b1, b2): C = diag(1/(2 b1), 1/(2 b2)),
/// K(x, s) = exp((b1 + b2) s - 1/2 d^T C^-1 d - gamma^T C^-1 gamma) with
/// d = e^{Bs} gamma - x.
inline double ou_density_diag(double b1, double b2, const Eigen::Vector2d& x, double s,
                              const Eigen::Vector2d& g) {
  const double c1 = 2 * b1, c2 = 2 * b2;  // entries of C^-1
  const double d1 = std::exp(b1 * s) * g[0] - x[0];
  const double d2 = std::exp(b2 * s) * g[1] - x[1];
  return std::exp((b1 + b2) * s - 0.5 * (c1 * d1 * d1 + c2 * d2 * d2) -
                  (c1 * g[0] * g[0] + c2 * g[1] * g[1]));
}

/// Brute-force OU Martin kernel: fixed-grid Simpson on [-S, S].
inline double ou_kernel_diag(double b1, double b2, const Eigen::Vector2d& x,
                             const Eigen::Vector2d& g, long nodes = 1000000, double S = 40) {
  auto num = [&](double s) { return ou_density_diag(b1, b2, x, s, g); };
  auto den = [&](double s) { return ou_density_diag(b1, b2, Eigen::Vector2d::Zero(), s, g); };
  return simpson(num, -S, S, nodes) / simpson(den, -S, S, nodes);
}

/// Midpoint rule on an n x n grid over [lo, hi]^2.
inline double midpoint_2d(const std::function<double(double, double)>& f, double lo, double hi,
                          int n) {
  const double h = (hi - lo) / n;
  double s = 0;
  for (int i = 0; i < n; ++i) {
    const double x = lo + (i + 0.5) * h;
    double row = 0;
    for (int j = 0; j < n; ++j) row += f(x, lo + (j + 0.5) * h);
    s += row;
  }
  return s * h * h;
}

/// Bond price P(T, x0) = E[exp(-int_0^T r(X_s) ds)] for dX = sigma dW, by
/// Crank-Nicolson on u_t = 1/2 sigma^2 u_xx - r(x) u, u(0, .) = 1, on
/// [x0 - L, x0 + L] with u_xx = 0 at the ends.
inline double bond_price_cn(const std::function<double(double)>& rate, double sigma, double x0,
                            double T, double L = 8, int nx = 3201, int nt = 4000) {
  const double dx = 2 * L / (nx - 1), dt = T / nt;
  const double D = 0.5 * sigma * sigma / (dx * dx);
  std::vector<double> x(nx), u(nx, 1.0), r(nx);
  for (int i = 0; i < nx; ++i) {
    x[i] = x0 - L + dx * i;
    r[i] = rate(x[i]);
  }
  // Interior operator (A u)_i = D (u_{i-1} - 2 u_i + u_{i+1}) - r_i u_i.
  std::vector<double> a(nx), b(nx), c(nx), rhs(nx), cp(nx), dp(nx);
  for (int n = 0; n < nt; ++n) {
    for (int i = 1; i < nx - 1; ++i) {
      const double Au = D * (u[i - 1] - 2 * u[i] + u[i + 1]) - r[i] * u[i];
      rhs[i] = u[i] + 0.5 * dt * Au;
      a[i] = -0.5 * dt * D;
      b[i] = 1 + 0.5 * dt * (2 * D + r[i]);
      c[i] = -0.5 * dt * D;
    }
    // Ends: u_xx = 0 gives u_t = -r u there, solved with the same CN weight,
    // and the linear extrapolation closes the system.
    a[0] = 0;
    b[0] = 1 + 0.5 * dt * r[0];
    c[0] = 0;
    rhs[0] = u[0] * (1 - 0.5 * dt * r[0]);
    a[nx - 1] = 0;
    b[nx - 1] = 1 + 0.5 * dt * r[nx - 1];
    c[nx - 1] = 0;
    rhs[nx - 1] = u[nx - 1] * (1 - 0.5 * dt * r[nx - 1]);
    // Thomas algorithm.
    cp[0] = c[0] / b[0];
    dp[0] = rhs[0] / b[0];
    for (int i = 1; i < nx; ++i) {
      const double m = b[i] - a[i] * cp[i - 1];
      cp[i] = c[i] / m;
      dp[i] = (rhs[i] - a[i] * dp[i - 1]) / m;
    }
    u[nx - 1] = dp[nx - 1];
    for (int i = nx - 2; i >= 0; --i) u[i] = dp[i] - cp[i] * u[i + 1];
  }
  return u[(nx - 1) / 2];
}

/// exp of a 2x2 matrix by scaling and squaring with a Taylor series.
inline Eigen::Matrix2d expm2(const Eigen::Matrix2d& M) {
  int k = 0;
  double nrm = M.cwiseAbs().rowwise().sum().maxCoeff();
  while (nrm > 0.5) {
    nrm /= 2;
    ++k;
  }
  const Eigen::Matrix2d A = M / std::ldexp(1.0, k);
  Eigen::Matrix2d term = Eigen::Matrix2d::Identity(), out = term;
  for (int i = 1; i < 30; ++i) {
    term = term * A / i;
    out += term;
  }
  for (int i = 0; i < k; ++i) out = out * out;
  return out;
}

}  // namespace oracle
