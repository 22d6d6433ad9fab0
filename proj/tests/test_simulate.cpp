#include <doctest.h>

#include <cmath>

#include "martin/factories.hpp"
#include "martin/model_io.hpp"
#include "martin/recovery.hpp"
#include "martin/simulate.hpp"

using namespace martin;

namespace {

Model gbm() { return constant_model_1d(0.03, 0.2, 0.05); }
Model bm2() { return constant_model(Vec::Zero(2), std::sqrt(2.0) * Mat::Identity(2, 2), 1); }
Vec v1(double x) { return Vec::Constant(1, x); }

RecoveryOptions fast() {
  RecoveryOptions o;
  o.certify.n_paths = 2000;
  return o;
}

std::vector<double> column(const PathEnsemble& e, std::size_t obs, int axis) {
  std::vector<double> v(static_cast<std::size_t>(e.n_paths));
  for (int p = 0; p < e.n_paths; ++p) v[static_cast<std::size_t>(p)] = e.state(obs, p)[axis];
  return v;
}

}  // namespace

TEST_CASE("deterministic dynamics") {
  const Model m = load_model(MODELS_DIR "/deterministic.json", true);
  SimConfig cfg;
  cfg.T = 2;
  cfg.dt = 1.0 / 256;
  cfg.n_paths = 8;
  cfg.observe = {0.5, 2};
  const auto e = simulate_paths(m, v1(1), cfg);
  for (int p = 0; p < 8; ++p) {
    CHECK(e.state(0, p)[0] == 1.25);
    CHECK(e.state(1, p)[0] == 2.0);
    CHECK(e.integrated_rate(1, p) == doctest::Approx(0.1).epsilon(1e-15));
  }
  CHECK(estimate(column(e, 1, 0), true).se == 0.0);
  CHECK_THROWS_AS(load_model(MODELS_DIR "/deterministic.json"), DomainError);
}

TEST_CASE("recovered planar BM moments") {
  const auto r = recover_direction_nd(bm2(), 0, (Vec(2) << 1, 0).finished(), fast());
  SimConfig cfg;
  cfg.T = 3;
  cfg.dt = 1.0 / 64;
  cfg.n_paths = 20000;
  cfg.antithetic = false;
  const auto e = simulate_paths(r.dynamics, Vec::Zero(2), cfg);
  for (int axis = 0; axis < 2; ++axis) {
    const auto col = column(e, 0, axis);
    const auto m = estimate(col, false);
    const double expect = axis == 0 ? 2 * cfg.T : 0.0;
    CHECK(std::abs(m.mean - expect) <= 0.05 * std::max(1.0, expect));
    double ss = 0;
    for (double x : col) ss += (x - m.mean) * (x - m.mean);
    CHECK(std::abs(ss / (col.size() - 1) / (2 * cfg.T) - 1) <= 0.05);
  }
}

TEST_CASE("worker count does not change paths") {
  const auto m = model_1d([](double x) { return -x; }, [](double x) { return 0.3 + 0.1 * std::sin(x); },
                          Field::constant(0.02));
  SimConfig cfg;
  cfg.T = 1;
  cfg.n_paths = 1001;
  cfg.seed = 99;
  cfg.observe = {0.25, 1};
  cfg.workers = 1;
  const auto a = simulate_paths(m, v1(0.2), cfg);
  cfg.workers = 4;
  const auto b = simulate_paths(m, v1(0.2), cfg);
  CHECK(a.states == b.states);
  CHECK(a.int_rate == b.int_rate);
  cfg.seed = 100;
  const auto c = simulate_paths(m, v1(0.2), cfg);
  CHECK(a.states != c.states);
}

TEST_CASE("antithetic pairs") {
  SimConfig cfg;
  cfg.n_paths = 10;
  const auto e = simulate_paths(constant_model_1d(0, 1, 0), v1(0), cfg);
  for (int p = 0; p < 10; p += 2) CHECK(e.state(0, p)[0] == -e.state(0, p + 1)[0]);
  // Pair means of an odd function are zero.
  CHECK(std::abs(estimate(column(e, 0, 0), true).mean) <= 1e-15);
}

TEST_CASE("estimate") {
  const auto e = estimate({1, 2, 3, 4}, false);
  CHECK(e.mean == 2.5);
  CHECK(e.se == doctest::Approx(std::sqrt(5.0 / 3 / 4)));
  const auto p = estimate({1, 3, 2, 2}, true);
  CHECK(p.mean == 2);
  CHECK(p.se == 0);
  const auto r = ratio_estimate({2, 4, 6, 8}, {1, 2, 3, 4}, false);
  CHECK(r.mean == doctest::Approx(2));
  CHECK(r.se == doctest::Approx(0).epsilon(1e-12));
}

TEST_CASE("escape statistics") {
  SUBCASE("deterministic drift to the right") {
    const Model m = load_model(MODELS_DIR "/deterministic.json", true);
    SimConfig cfg;
    cfg.T = 10;
    cfg.n_paths = 20;
    cfg.absorb_lo = -1;
    cfg.absorb_hi = 1;
    const auto s = escape_statistics(simulate_paths(m, v1(0), cfg));
    REQUIRE(s.labels.size() == 2);
    CHECK(s.labels[0] == "left");
    CHECK(s.labels[1] == "right");
    CHECK(s.decided == 20);
    CHECK(s.frequency[1].mean == 1.0);
    CHECK(s.frequency[0].mean == 0.0);
  }
  SUBCASE("planar drift toward (1, 0)") {
    const auto r = recover_direction_nd(bm2(), 0, (Vec(2) << 1, 0).finished(), fast());
    SimConfig cfg;
    cfg.T = 10;
    cfg.dt = 1.0 / 32;
    cfg.n_paths = 2000;
    std::vector<Vec> dirs;
    for (int i = 0; i < 4; ++i)
      dirs.push_back((Vec(2) << std::cos(i * M_PI / 2), std::sin(i * M_PI / 2)).finished());
    const auto s = escape_statistics(simulate_paths(r.dynamics, Vec::Zero(2), cfg), dirs, 1.0);
    CHECK(s.frequency[0].mean >= 0.99);
  }
}

TEST_CASE("bond yields with a constant rate") {
  SimConfig base;
  base.n_paths = 200;
  const auto y = long_term_yield(gbm(), v1(0), {1, 5, 10, 40}, base);
  for (const auto& row : y.rows) {
    CHECK(std::abs(row.yield - 0.05) <= 1e-15);
    CHECK(row.price == doctest::Approx(std::exp(-0.05 * row.T)).epsilon(1e-14));
  }
  CHECK(std::abs(y.tail_yield - 0.05) <= 1e-12);
}

TEST_CASE("martingale identity of the recovered density") {
  const auto r = recover_1d(gbm(), 0.05, -1, fast());
  for (double T : {0.5, 1.0, 2.0}) {
    SimConfig cfg;
    cfg.T = T;
    cfg.dt = 1.0 / 128;
    cfg.n_paths = 20000;
    cfg.seed = 7;
    const auto e = simulate_paths(gbm(), v1(0), cfg);
    std::vector<double> d(static_cast<std::size_t>(e.n_paths));
    for (int p = 0; p < e.n_paths; ++p)
      d[static_cast<std::size_t>(p)] = std::exp(r.beta * T - e.integrated_rate(0, p)) *
                                       r.principal.h(e.state(0, p)) / r.principal.h(v1(0));
    const auto m = estimate(d, true);
    CHECK(std::abs(m.mean - 1) <= 3 * m.se);
  }
}

TEST_CASE("measure change agrees with recovered dynamics") {
  const auto r = recover_1d(gbm(), 0.05, -1, fast());
  SimConfig cfg;
  cfg.T = 2;
  cfg.dt = 1.0 / 128;
  cfg.n_paths = 40000;
  cfg.seed = 11;
  auto g = [](double x) { return x > -0.05 ? 1.0 : 0.0; };
  const auto q = simulate_paths(gbm(), v1(0), cfg);
  std::vector<double> wq(static_cast<std::size_t>(q.n_paths));
  for (int p = 0; p < q.n_paths; ++p) {
    const Vec x = q.state(0, p);
    wq[static_cast<std::size_t>(p)] = std::exp(r.beta * cfg.T - q.integrated_rate(0, p)) *
                                      r.principal.h(x) / r.principal.h(v1(0)) * g(x[0]);
  }
  cfg.seed = 12;
  const auto pe = simulate_paths(r.dynamics, v1(0), cfg);
  std::vector<double> wp(static_cast<std::size_t>(pe.n_paths));
  for (int p = 0; p < pe.n_paths; ++p) wp[static_cast<std::size_t>(p)] = g(pe.state(0, p)[0]);
  const auto a = estimate(wq, true);
  const auto b = estimate(wp, true);
  CHECK(std::abs(a.mean - b.mean) <= 4 * std::hypot(a.se, b.se));
}

TEST_CASE("Euler strong order one half") {
  // dS = mu S dt + s S dW against the exact S_T driven by the same W_T.
  const double mu = 0.1, s = 0.4, S0 = 1, T = 1;
  Interval<double> pos;
  pos.left = 0;
  const auto price = model_1d([=](double x) { return mu * x; }, [=](double x) { return s * x; },
                              Field::constant(0), pos);
  const auto bm = constant_model_1d(0, 1, 0);
  auto strong_error = [&](double dt, std::uint64_t seed) {
    SimConfig cfg;
    cfg.T = T;
    cfg.dt = dt;
    cfg.n_paths = 4000;
    cfg.seed = seed;
    cfg.antithetic = false;
    const auto e = simulate_paths(price, v1(S0), cfg);
    const auto w = simulate_paths(bm, v1(0), cfg);
    double err = 0;
    for (int p = 0; p < cfg.n_paths; ++p) {
      const double exact = S0 * std::exp((mu - 0.5 * s * s) * T + s * w.state(0, p)[0]);
      err += std::abs(e.state(0, p)[0] - exact);
    }
    return err / cfg.n_paths;
  };
  double coarse = 0, fine = 0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    coarse += strong_error(1.0 / 64, seed);
    fine += strong_error(1.0 / 128, seed);
  }
  const double ratio = coarse / fine;
  CHECK(ratio >= 1.2);
  CHECK(ratio <= 1.7);
}

TEST_CASE("cash flow proportional to phi") {
  const auto r = recover_1d(gbm(), 0.05, -1, fast());
  SimConfig base;
  base.n_paths = 20000;
  base.dt = 1.0 / 64;
  const auto c =
      cashflow_curve(gbm(), r.principal.h, r.beta, v1(0), {1, 2, 5}, base, r.principal.h);
  for (const auto& row : c.rows) {
    CHECK(std::abs(row.value - 1) <= 3 * row.se);
    CHECK(row.max_ratio == doctest::Approx(1).epsilon(1e-12));
  }
  CHECK(c.converged);
  CHECK_FALSE(c.ratio_growth);
}
