#include <doctest.h>

#include <cmath>
#include <random>

#include "martin/expression.hpp"
#include "martin/factories.hpp"
#include "martin/model_io.hpp"
#include "oracles.hpp"

using namespace martin;

namespace {

Model gbm() { return constant_model_1d(0.03, 0.2, 0.05); }
Model bm2() { return constant_model(Vec::Zero(2), std::sqrt(2.0) * Mat::Identity(2, 2), 1); }
Vec v1(double x) { return Vec::Constant(1, x); }
Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

std::vector<Vec> line_grid(double lo, double hi, int n) {
  std::vector<Vec> g;
  for (int i = 0; i < n; ++i) g.push_back(v1(lo + (hi - lo) * i / (n - 1)));
  return g;
}

}  // namespace

TEST_CASE("generator of the constant function is -r") {
  const auto m = parse_model(read_json_file(MODELS_DIR "/mean_reverting.json"));
  for (double x : {-1.5, 0.0, 0.7})
    CHECK(apply_generator(m, Field::constant(1), v1(x)) == doctest::Approx(-(0.02 + 0.01 * x * x)));
}

TEST_CASE("GBM-log: exp(-1.5x) is an eigenfunction at 0.05") {
  // Roots of 0.02 a^2 + 0.03 a + (lambda - 0.05) at lambda = 0.05.
  const auto [lo, hi] = oracle::exponent_roots(0.04, 0.03, 0.05, 0.05);
  CHECK(lo == doctest::Approx(-1.5).epsilon(1e-14));
  CHECK(std::abs(hi) < 1e-15);
  const Field h = Field::exponential(1, v1(lo), v1(0));
  for (double x : {-2.0, -0.3, 1.1, 2.0}) {
    const double expect = -0.05 * std::exp(-1.5 * x);
    CHECK(apply_generator(gbm(), h, v1(x)) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("scaled planar BM: exp(x1) is harmonic for Lap - 1") {
  const Field h = Field::exponential(1, v2(1, 0), Vec::Zero(2));
  for (auto x : {v2(0, 0), v2(1.3, -0.4), v2(-2, 3)})
    CHECK(std::abs(apply_generator(bm2(), h, x)) <= 1e-12 * h(x));
}

TEST_CASE("pde_residual") {
  const auto grid = line_grid(-2, 2, 101);
  SUBCASE("exact eigenpair") {
    const Pair p{0.05, Field::exponential(1, v1(-1.5), v1(0))};
    CHECK(pde_residual(gbm(), p, grid) <= 1e-8);
  }
  SUBCASE("constant pair") {
    CHECK(pde_residual(gbm(), Pair{0.05, Field::constant(1)}, grid) <= 1e-16);
  }
  SUBCASE("non-solution") {
    // alpha = 1: 0.02 + 0.03 + 0 - 0.05 + 0.05 leaves 0.05 e^x.
    const Pair p{0.05, Field::exponential(1, v1(1), v1(0))};
    CHECK(pde_residual(gbm(), p, grid) > 1e-2);
  }
  SUBCASE("empty grid") {
    CHECK_THROWS_AS(pde_residual(gbm(), Pair{0.05, Field::constant(1)}, {}), UsageError);
  }
}

TEST_CASE("generator errors") {
  Interval<double> half;
  half.left = 0;
  const Model m = model_1d([](double x) { return 0.1 * x; }, [](double x) { return 0.2 * x; },
                           Field::constant(0.01), half);
  CHECK_THROWS_AS(apply_generator(m, Field::constant(1), v1(-1)), DomainError);
  const Field bad([](const Vec& x) { return std::log(x[0] - 1); });
  CHECK_THROWS_AS(apply_generator(m, bad, v1(0.5)), EvaluationError);
}

TEST_CASE("generator is linear") {
  const Model m = model_1d([](double x) { return -0.5 * x; },
                           [](double x) { return 0.3 + 0.1 * std::sin(x); },
                           Expression::parse("0.02 + 0.01*x^2", 1).to_field());
  const Field h1 = Expression::parse("exp(0.3*x) + x^2", 1).to_field();
  const Field h2 = Expression::parse("1/(1 + x^2)", 1).to_field();
  const double a = 2.5, b = -0.75;
  const Field h = Field::combine(a, h1, b, h2);
  for (double x : {-1.7, -0.2, 0.0, 0.9, 2.4}) {
    const double lhs = apply_generator(m, h, v1(x));
    const double rhs = a * apply_generator(m, h1, v1(x)) + b * apply_generator(m, h2, v1(x));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("analytic and differenced gradients agree") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(-2, 2);
  const auto e = Expression::parse("exp(0.4*x1 - 0.2*x2) * (2 + sin(x1*x2)) + tanh(x2)", 2);
  const Field exact = e.to_field();
  const Field fd = exact.without_derivatives();
  for (int i = 0; i < 20; ++i) {
    const Vec x = v2(u(gen), u(gen));
    const Vec g = exact.gradient(x), gf = fd.gradient(x);
    CHECK((g - gf).norm() <= 1e-5 * std::max(1.0, g.norm()));
    const Mat H = exact.hessian(x), Hf = fd.hessian(x);
    CHECK((H - Hf).norm() <= 1e-5 * std::max(1.0, H.norm()));
  }
}

TEST_CASE("h-transform") {
  SUBCASE("h = 1 keeps the drift and gives zero rho") {
    const auto m = parse_model(read_json_file(MODELS_DIR "/mean_reverting.json"));
    const auto t = h_transform(m, Pair{0, Field::constant(1)});
    for (double x : {-1.0, 0.3, 2.0}) {
      CHECK(t.dynamics.drift(v1(x))[0] == m.drift(v1(x))[0]);
      CHECK(t.rho(v1(x))[0] == 0.0);
    }
  }
  SUBCASE("planar BM with exp(x1)") {
    const auto t = h_transform(bm2(), Pair{0, Field::exponential(1, v2(1, 0), Vec::Zero(2))});
    const Vec d = t.dynamics.drift(v2(0.4, -1));
    CHECK(d[0] == doctest::Approx(2).epsilon(1e-15));
    CHECK(d[1] == 0.0);
    CHECK(t.rho(v2(0, 0))[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  }
  SUBCASE("GBM-log with exp(-1.5x)") {
    const auto t = h_transform(gbm(), Pair{0.05, Field::exponential(1, v1(-1.5), v1(0))});
    CHECK(t.dynamics.drift(v1(0.5))[0] == doctest::Approx(0.03 + 0.04 * -1.5).epsilon(1e-14));
    CHECK(t.rho(v1(0.5))[0] == doctest::Approx(0.2 * -1.5).epsilon(1e-14));
  }
  SUBCASE("nonpositive h") {
    const Pair p{0, Expression::parse("x", 1).to_field()};
    CHECK_THROWS_AS(h_transform(gbm(), p), PositivityError);
  }
}

TEST_CASE("validation") {
  SUBCASE("degenerate diffusion") {
    Json j = read_json_file(MODELS_DIR "/deterministic.json");
    CHECK_THROWS_AS(parse_model(j), DomainError);
    const Model m = parse_model(j, true);
    CHECK(m.sigma(v1(0))(0, 0) == 0.0);
  }
  SUBCASE("negative rate") {
    CHECK_THROWS_AS(constant_model_1d(0, 1, -0.01), DomainError);
  }
  SUBCASE("non-PD sigma") {
    Mat s(2, 2);
    s << 1, 1, 1, 1;
    CHECK_THROWS_AS(constant_model(Vec::Zero(2), s, 0.1), DomainError);
  }
}

TEST_CASE("model file errors name the field") {
  auto message = [](const Json& j) {
    try {
      parse_model(j);
    } catch (const UsageError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  Json j = read_json_file(MODELS_DIR "/gbm_log.json");
  Json no_rate = j;
  no_rate.erase("rate");
  CHECK(message(no_rate).find("rate") != std::string::npos);
  Json bad_drift = j;
  bad_drift["drift"]["value"] = {1, 2};
  CHECK(message(bad_drift).find("drift") != std::string::npos);
  Json bad_kind = j;
  bad_kind["sigma"]["kind"] = "cubic";
  CHECK(message(bad_kind).find("sigma") != std::string::npos);
  Json bad_expr = j;
  bad_expr["rate"] = {{"kind", "expr"}, {"expr", "0.05 + * x"}};
  CHECK(message(bad_expr).find("rate") != std::string::npos);
}

TEST_CASE("expressions") {
  const auto e = Expression::parse("2^3^2 - -x1 + max(x2, 1) * min(1, 2) + abs(-3)", 2);
  CHECK(e(v2(0.5, 4)) == doctest::Approx(512 + 0.5 + 4 + 3));
  CHECK(Expression::parse("exp(log(3)) + sqrt(16) + pi - pi + e - e", 1)(v1(0)) ==
        doctest::Approx(7));
  const auto d = Expression::parse("x^3 * exp(2*x)", 1).derivative(0);
  const double x = 0.7;
  CHECK(d(v1(x)) == doctest::Approx(3 * x * x * std::exp(2 * x) + 2 * x * x * x * std::exp(2 * x)));
  CHECK_THROWS_AS(Expression::parse("x3", 2), UsageError);
  CHECK_THROWS_AS(Expression::parse("foo(x)", 1), UsageError);
  CHECK_THROWS_AS(Expression::parse("(x", 1), UsageError);
}

TEST_CASE("log-gradients stay finite where h overflows") {
  const Field e = Expression::parse("exp(-1.5*x)", 1).to_field();
  const Vec far = Vec::Constant(1, -1000);
  CHECK(std::isinf(e(far)));
  CHECK(e.log_gradient(far)[0] == doctest::Approx(-1.5));
  const Field q = Expression::parse("x^2 * exp(x^4/4) / sqrt(1 + x^2)", 1).to_field();
  const Vec x = Vec::Constant(1, 40);
  const double expect = 2 / 40.0 + std::pow(40.0, 3) - 40 / (1 + 1600.0);
  CHECK(q.log_gradient(x)[0] == doctest::Approx(expect).epsilon(1e-12));
  // Fallback f'/f where no rule applies.
  const Field t = Expression::parse("2 + tanh(x)", 1).to_field();
  const Vec y = Vec::Constant(1, 0.3);
  CHECK(t.log_gradient(y)[0] == doctest::Approx(t.gradient(y)[0] / t(y)).epsilon(1e-14));
  const Field ex = Field::exponential(1, Vec::Constant(1, 2.0), Vec::Zero(1));
  CHECK(ex.log_gradient(Vec::Constant(1, 1e4))[0] == 2.0);
}
