#include <doctest.h>

#include <cmath>
#include <random>

#include "martin/factories.hpp"
#include "martin/martin_nd.hpp"
#include "oracles.hpp"

using namespace martin;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }
Mat m2(double a, double b, double c, double d) { return (Mat(2, 2) << a, b, c, d).finished(); }
double rel(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

// 1/2 Lap k + <B x, grad k> by central differences with step e.
template <typename K>
double ou_harmonic_residual(const K& k, const Mat& B, const Vec& x, double e = 2e-3) {
  const double k0 = k(x);
  double lap = 0;
  Vec grad(2);
  for (int i = 0; i < 2; ++i) {
    Vec p = x, m = x, pp = x, mm = x;
    p[i] += e;
    m[i] -= e;
    pp[i] += 2 * e;
    mm[i] -= 2 * e;
    const double kp = k(p), km = k(m), kpp = k(pp), kmm = k(mm);
    lap += (-kpp + 16 * kp - 30 * k0 + 16 * km - kmm) / (12 * e * e);
    grad[i] = (-kpp + 8 * kp - 8 * km + kmm) / (12 * e);
  }
  return std::abs(0.5 * lap + (B * x).dot(grad)) / std::max(1.0, k0);
}

}  // namespace

TEST_CASE("Brownian minimal functions") {
  CHECK(bm_minimal(-1.0, v2(1, 0), v2(0, 0)) == 1.0);
  CHECK(rel(bm_minimal(-1.0, v2(1, 0), v2(2, 5)), std::exp(2.0)) <= 1e-15);
  CHECK(rel(bm_minimal(-4.0, v2(0.6, 0.8), v2(1, 1)), std::exp(2.8)) <= 1e-15);
  CHECK_THROWS_AS(bm_minimal(0.0, v2(1, 0), v2(1, 1)), DomainError);
  CHECK_THROWS_AS(bm_minimal(0.5, v2(1, 0), v2(1, 1)), DomainError);
  CHECK_THROWS_AS(bm_minimal(-1.0, v2(1, 1), v2(1, 1)), UsageError);
  const Vec g3 = Vec::Unit(3, 2), x3 = Vec::Constant(3, 0.7);
  CHECK(bm_minimal(0.0, g3, x3) == 1.0);

  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int i = 0; i < 20; ++i) {
    const double lambda = -0.1 - 3 * std::abs(u(gen));
    const double th = u(gen);
    const Field h = bm_minimal_field(lambda, v2(std::cos(th), std::sin(th)));
    const Vec x = v2(u(gen), u(gen));
    CHECK(std::abs(h.hessian(x).trace() + lambda * h(x)) <= 1e-8 * h(x));
  }
}

TEST_CASE("constant-coefficient reduction") {
  SUBCASE("a = 2I") {
    const auto m = constant_model(Vec::Zero(2), std::sqrt(2.0) * Mat::Identity(2, 2), 1);
    const auto red = constcoef_reduce(m, 0.0);
    CHECK((red.S - Mat::Identity(2, 2)).norm() <= 1e-15);
    CHECK(red.c.norm() == 0.0);
    CHECK(red.lambda == doctest::Approx(-1));
    CHECK(constcoef_reduce(m, 1.0).lambda == doctest::Approx(0).epsilon(1e-15));
  }
  SUBCASE("a = diag(8, 2)") {
    const auto m = constant_model(Vec::Zero(2), m2(std::sqrt(8.0), 0, 0, std::sqrt(2.0)), 1);
    const auto red = constcoef_reduce(m, 0.0);
    CHECK((red.S - m2(0.5, 0, 0, 1)).norm() <= 1e-14);
    CHECK(red.lambda == doctest::Approx(-1));
  }
  SUBCASE("substitution with drift and a full a") {
    // h(x) = exp(c.x) g(Sx) with g(y) = sin(y1) exp(0.5 y2) + y1 y2; the
    // operator applied to h must equal exp(c.x) (Lap g + lambda g)(Sx).
    const Mat sig = m2(1.5, 0.4, -0.3, 0.9);
    const Vec k = v2(0.7, -0.4);
    const double r = 0.3, beta = 0.1;
    const auto m = constant_model(k, sig, r);
    const Mat a = sig * sig.transpose();
    const auto red = constcoef_reduce(m, beta);
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int i = 0; i < 5; ++i) {
      const Vec x = v2(u(gen), u(gen));
      const Vec y = red.S * x;
      const double g = std::sin(y[0]) * std::exp(0.5 * y[1]) + y[0] * y[1];
      const Vec dg = v2(std::cos(y[0]) * std::exp(0.5 * y[1]) + y[1],
                        0.5 * std::sin(y[0]) * std::exp(0.5 * y[1]) + y[0]);
      const Mat d2g = m2(-std::sin(y[0]) * std::exp(0.5 * y[1]),
                         0.5 * std::cos(y[0]) * std::exp(0.5 * y[1]) + 1,
                         0.5 * std::cos(y[0]) * std::exp(0.5 * y[1]) + 1,
                         0.25 * std::sin(y[0]) * std::exp(0.5 * y[1]));
      const double e = std::exp(red.c.dot(x));
      const Vec sdg = red.S.transpose() * dg;
      const Vec grad = e * (red.c * g + sdg);
      const Mat hess = e * (red.c * red.c.transpose() * g + red.c * sdg.transpose() +
                            sdg * red.c.transpose() + red.S.transpose() * d2g * red.S);
      const double lhs = 0.5 * (a.cwiseProduct(hess)).sum() + k.dot(grad) + (beta - r) * e * g;
      const double rhs = e * (d2g.trace() + red.lambda * g);
      CHECK(std::abs(lhs - rhs) <= 1e-8 * std::max(1.0, std::abs(rhs)));
    }
  }
  SUBCASE("non-constant model") {
    Model m = constant_model_1d(0, 1, 0.1);
    m.constant.reset();
    CHECK_THROWS_AS(constcoef_reduce(m, 0.0), UsageError);
  }
}

TEST_CASE("OU covariance") {
  CHECK((ou_covariance<double>(m2(1, 0, 0, 2)) - m2(0.5, 0, 0, 0.25)).norm() <= 1e-15);
  CHECK((ou_covariance<double>(Mat::Identity(2, 2)) - 0.5 * Mat::Identity(2, 2)).norm() <= 1e-15);
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 20; ++i) {
    const Mat B = m2(1.5 + u(gen), u(gen), u(gen), 1.5 + u(gen));
    const Mat C = ou_covariance<double>(B);
    CHECK((B * C + C * B.transpose() - Mat::Identity(2, 2)).norm() <= 1e-10);
    CHECK((C - C.transpose()).norm() <= 1e-12);
    CHECK(C.llt().info() == Eigen::Success);
    // The defining integral, by Simpson on [0, S] with S past the slowest decay.
    const double S = 20 / Eigen::EigenSolver<Mat>(B).eigenvalues().real().minCoeff();
    auto entry = [&](int r, int c) {
      return oracle::simpson(
          [&](double s) {
            const Mat E = oracle::expm2(-B * s);
            return (E * E.transpose())(r, c);
          },
          0, S, 20000);
    };
    CHECK(std::abs(entry(0, 1) - C(0, 1)) <= 1e-8);
  }
  CHECK_THROWS_AS(ou_covariance<double>(m2(1, 0, 0, -2)), DivergentIntegralError);
}

TEST_CASE("OU spec") {
  const auto s = make_ou_spec<double>(m2(1, 0.5, -2, 3));
  // z1, z2 are the roots of z^2 - tr z + det.
  for (auto z : {s.z1, s.z2}) CHECK(std::abs(z * z - 4.0 * z + 4.0) <= 1e-10);
  CHECK_FALSE(s.mixed);
  CHECK_THROWS_AS(make_ou_spec<double>(m2(1, 2, 2, 4)), UsageError);
  const auto mixed = make_ou_spec<double>(m2(1, 0.5, 0.3, -1));
  CHECK(mixed.mixed);
  CHECK((mixed.Q.transpose() * mixed.Q - Mat::Identity(2, 2)).norm() <= 1e-14);
  CHECK(mixed.kernel_B(0, 1) == 0.0);
  const Eigen::EigenSolver<Mat> es(mixed.kernel_B);
  CHECK(es.eigenvalues().real().minCoeff() > 0);
}

TEST_CASE("OU kernel density") {
  const auto s = make_ou_spec<double>(m2(1, 0, 0, 2));
  const Mat C = ou_covariance(s);
  const Vec g = v2(1, 0);
  CHECK(rel(ou_kernel_density(s, C, v2(0, 0), 0.0, g), std::exp(-3.0)) <= 1e-14);
  const double t0 = 0.7;
  const Vec x = (s.B * t0).exp() * g;
  CHECK(rel(ou_kernel_density(s, C, x, t0, g), std::exp(3 * t0 - 2.0)) <= 1e-13);
  for (double t : {-30.0, -1.0, 0.0, 2.0, 30.0}) CHECK(ou_kernel_density(s, C, v2(3, -2), t, g) >= 0);
  const Vec gd = v2(0.6, -0.8);
  CHECK(rel(ou_kernel_density(s, C, v2(0.3, 1.1), -0.4, gd),
            oracle::ou_density_diag(1, 2, v2(0.3, 1.1), -0.4, gd)) <= 1e-13);
}

TEST_CASE("OU Martin kernel") {
  const auto s = make_ou_spec<double>(m2(1, 0, 0, 2));
  SUBCASE("normalized at the origin") {
    CHECK(ou_martin_kernel(s, v2(0, 0), v2(1, 0)) == doctest::Approx(1).epsilon(1e-13));
    CHECK(ou_martin_kernel(s, v2(0, 0), v2(0.6, 0.8)) == doctest::Approx(1).epsilon(1e-13));
  }
  SUBCASE("brute-force Simpson") {
    for (auto [x, g] : {std::pair{v2(0.5, -0.3), v2(1, 0)}, {v2(-1, 1), v2(0.6, 0.8)}}) {
      const double ref = oracle::ou_kernel_diag(1, 2, x, g, 200000);
      CHECK(rel(ou_martin_kernel(s, x, g), ref) <= 1e-6);
    }
  }
  SUBCASE("harmonic for the OU operator") {
    const OUMartinKernel<double> k(s, v2(0.6, 0.8));
    for (auto x : {v2(0.2, 0.1), v2(-0.7, 0.4), v2(1.1, -0.9)})
      CHECK(ou_harmonic_residual(k, s.B, x) <= 1e-5);
  }
  SUBCASE("non-normal B") {
    const auto sn = make_ou_spec<double>(m2(1, 0.6, -0.4, 1.5));
    const OUMartinKernel<double> k(sn, v2(0, 1));
    for (auto x : {v2(0.3, 0.2), v2(-0.5, 0.8)}) CHECK(ou_harmonic_residual(k, sn.B, x) <= 1e-5);
  }
  SUBCASE("mixed eigenvalues") {
    const auto sm = make_ou_spec<double>(m2(1, 0.5, 0.3, -1));
    const OUMartinKernel<double> k(sm, v2(0.8, 0.6));
    CHECK(k(v2(0, 0)) == doctest::Approx(1).epsilon(1e-12));
    for (auto x : {v2(0.3, 0.2), v2(-0.5, 0.4)})
      CHECK(ou_harmonic_residual(k, sm.harmonic_B, x) <= 1e-5);
    const auto pt = ou_boundary_point(sm, v2(0.8, 0.6));
    CHECK((pt.curve(0) - v2(0.8, 0.6)).norm() <= 1e-14);
    CHECK(pt.curve(5).norm() > 10);
  }
}

TEST_CASE("Martin metric") {
  auto bm = [](double th) {
    return [th](const Vec& x) { return bm_minimal(-1.0, v2(std::cos(th), std::sin(th)), x); };
  };
  std::function<double(const Vec&)> k1 = bm(0), k2 = bm(M_PI / 2), k3 = bm(2.0);
  const Vec lo = v2(-1, -1), hi = v2(1, 1);
  CHECK(martin_metric(k1, k1, lo, hi) == 0.0);
  const double d12 = martin_metric(k1, k2, lo, hi);
  CHECK(d12 == martin_metric(k2, k1, lo, hi));
  const double ref = oracle::midpoint_2d(
      [](double a, double b) {
        const double d = std::abs(std::exp(a) - std::exp(b));
        return d / (1 + d);
      },
      -1, 1, 4000);
  CHECK(std::abs(d12 - ref) <= 1e-6);
  const double d13 = martin_metric(k1, k3, lo, hi), d23 = martin_metric(k2, k3, lo, hi);
  CHECK(d13 <= d12 + d23 + 1e-9);
  CHECK(d12 <= d13 + d23 + 1e-9);
  CHECK(d23 <= d12 + d13 + 1e-9);
  CHECK_THROWS_AS(martin_metric(k1, k2, lo, v2(1, std::numeric_limits<double>::infinity())),
                  UsageError);
}
