#include <doctest.h>

#include <cmath>
#include <random>

#include "oracle.hpp"
#include "sparse_scan/s6.hpp"

using namespace sscan;

namespace {

S6Discretized constant(std::size_t T, double abar, double bx, double c) {
  S6Discretized d;
  d.steps = T;
  d.lanes = 1;
  d.state = 1;
  d.abar.assign(T, abar);
  d.bx.assign(T, bx);
  d.c.assign(T, c);
  return d;
}

}  // namespace

TEST_CASE("zero-order hold closed forms") {
  auto z = discretize_zoh(-1.0, 2.0, std::log(2.0));
  CHECK(std::abs(z.abar - 0.5) <= 1e-12);
  CHECK(std::abs(z.bbar - 1.0) <= 1e-12);
  z = discretize_zoh(0.0, 1.0, 0.5);
  CHECK(z.abar == 1.0);
  CHECK(z.bbar == 0.5);
  z = discretize_zoh(-3.0, 1.5, 0.0);
  CHECK(z.abar == 1.0);
  CHECK(z.bbar == 0.0);
}

TEST_CASE("zero-order hold is continuous across the series branch") {
  for (double a : {1e-9, -1e-9, 0.9e-8, -0.9e-8, 1.1e-8, -1.1e-8})
    for (double b : {1.0, -2.5}) {
      const double delta = 1.0;
      const auto z = discretize_zoh(a, b, delta);
      CHECK(std::abs(z.bbar - delta * b) <= 1e-8 * std::abs(delta * b) + 1e-12);
    }
}

TEST_CASE("softplus and parameterization") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(softplus(800.0) == 800.0);
  CHECK(softplus(-800.0) >= 0.0);

  std::mt19937_64 rng(1);
  S6Params p = S6Params::random(3, 2, rng);
  std::fill(p.b_delta.begin(), p.b_delta.end(), 0.0);
  const std::vector<double> x(2 * 3, 0.0);
  const auto d = parameterize(x, 2, p);
  for (std::size_t l = 0; l < 3; ++l)
    for (std::size_t n = 0; n < 2; ++n)
      CHECK(d.abar[d.at(0, l, n)] == doctest::Approx(std::exp(std::log(2.0) * p.a(l, n))).epsilon(1e-14));
  CHECK_THROWS_AS(parameterize(std::vector<double>(5), 2, p), ShapeError);
}

TEST_CASE("zero B projection leaves only the skip term") {
  std::mt19937_64 rng(2);
  S6Params p = S6Params::random(4, 3, rng);
  std::fill(p.w_b.begin(), p.w_b.end(), 0.0);
  const auto x = oracle::random_vector(5 * 4, rng);
  const auto y = s6_forward(x, 5, p);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(p.d_skip[i % 4] * x[i]).epsilon(1e-15));
}

TEST_CASE("doubling the C projection doubles C exactly") {
  std::mt19937_64 rng(3);
  S6Params p = S6Params::random(4, 3, rng);
  const auto x = oracle::random_vector(6 * 4, rng);
  const auto d1 = parameterize(x, 6, p);
  for (auto& w : p.w_c) w *= 2.0;
  const auto d2 = parameterize(x, 6, p);
  for (std::size_t i = 0; i < d1.c.size(); ++i) CHECK(d2.c[i] == 2.0 * d1.c[i]);
}

TEST_CASE("s6 forward matches the direct recurrence") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t L = 1 + trial % 5, N = 1 + trial % 4, T = 1 + 7 * trial;
    const S6Params p = S6Params::random(L, N, rng);
    const auto x = oracle::random_vector(T * L, rng);
    CHECK(oracle::rel_error(s6_forward(x, T, p), oracle::s6_direct(x, T, p)) <= 1e-12);
  }
}

TEST_CASE("sequential scan unrolls the recurrence") {
  const auto d = constant(3, 0.5, 1.0, 1.0);
  const std::vector<double> skip{0.0}, x{0.0, 0.0, 0.0};
  const auto r = selective_scan_seq(d, ScanState::zeros(1, 1), skip, x);
  CHECK(r.y == std::vector<double>{1.0, 1.5, 1.75});
  CHECK(r.final_state.h[0] == 1.75);

  const auto m = constant(4, 0.0, 2.0, 3.0);
  const auto rm = selective_scan_seq(m, ScanState::zeros(1, 1), skip, std::vector<double>(4, 0.0));
  for (double v : rm.y) CHECK(v == 6.0);

  std::mt19937_64 rng(5);
  const auto one = oracle::random_discretized(1, 3, 2, rng);
  const auto h0 = oracle::random_vector(6, rng);
  const auto x1 = oracle::random_vector(3, rng);
  const std::vector<double> sk{0.5, -1.0, 2.0};
  const auto r1 = selective_scan_seq(one, {3, 2, h0}, sk, x1);
  CHECK(oracle::rel_error(r1.y, oracle::scan_direct(one, h0, sk, x1)) <= 1e-15);
}

TEST_CASE("parallel scan agrees with sequential") {
  std::mt19937_64 rng(6);
  for (std::size_t T : {1u, 2u, 3u, 7u, 64u, 100u, 257u}) {
    const auto d = oracle::random_discretized(T, 3, 4, rng);
    const auto h0 = oracle::random_vector(12, rng);
    const auto x = oracle::random_vector(T * 3, rng);
    const std::vector<double> sk{1.0, 0.5, -0.25};
    const auto seq = selective_scan_seq(d, {3, 4, h0}, sk, x);
    for (std::size_t threads : {1u, 3u}) {
      const auto par = selective_scan_parallel(d, {3, 4, h0}, sk, x, threads);
      if (T == 1) {
        CHECK(par.y == seq.y);
      } else {
        CHECK(oracle::rel_error(par.y, seq.y) <= 1e-12);
        CHECK(oracle::rel_error(par.final_state.h, seq.final_state.h) <= 1e-12);
      }
    }
  }
}

TEST_CASE("combine is associative") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const ScanElement a{u(rng), u(rng)}, b{u(rng), u(rng)}, c{u(rng), u(rng)};
    const auto l = combine(combine(a, b), c);
    const auto r = combine(a, combine(b, c));
    CHECK(std::abs(l.a - r.a) <= 1e-12);
    CHECK(std::abs(l.b - r.b) <= 1e-12);
  }
  const auto ab = combine({0.5, 1.0}, {0.25, 2.0});
  CHECK(ab.a == 0.125);
  CHECK(ab.b == 0.25 * 1.0 + 2.0);
}

TEST_CASE("scan is linear in its input for fixed decay and readout") {
  std::mt19937_64 rng(8);
  auto d = oracle::random_discretized(20, 2, 3, rng);
  auto du = d, dv = d, dw = d;
  du.bx = oracle::random_vector(d.bx.size(), rng);
  dv.bx = oracle::random_vector(d.bx.size(), rng);
  const auto xu = oracle::random_vector(40, rng), xv = oracle::random_vector(40, rng);
  const double al = 0.7, be = -1.3;
  std::vector<double> xw(40);
  for (std::size_t i = 0; i < dw.bx.size(); ++i) dw.bx[i] = al * du.bx[i] + be * dv.bx[i];
  for (std::size_t i = 0; i < 40; ++i) xw[i] = al * xu[i] + be * xv[i];
  const std::vector<double> sk{0.3, 0.9};
  const auto yu = selective_scan_seq(du, ScanState::zeros(2, 3), sk, xu).y;
  const auto yv = selective_scan_seq(dv, ScanState::zeros(2, 3), sk, xv).y;
  const auto yw = selective_scan_seq(dw, ScanState::zeros(2, 3), sk, xw).y;
  for (std::size_t i = 0; i < yw.size(); ++i) CHECK(std::abs(yw[i] - (al * yu[i] + be * yv[i])) <= 1e-12);
}

TEST_CASE("stability: bounded state for bounded input") {
  std::mt19937_64 rng(9);
  const auto p = S6Params::random(4, 4, rng);
  const auto x = oracle::random_vector(200 * 4, rng);
  const auto d = parameterize(x, 200, p);
  for (double a : d.abar) CHECK((a > 0.0 && a <= 1.0));
  auto h0 = oracle::random_vector(16, rng);
  double bound = 0.0, bx_sum = 0.0;
  for (double v : h0) bound = std::max(bound, std::abs(v));
  for (std::size_t t = 0; t < 200; ++t) {
    double m = 0.0;
    for (std::size_t i = 0; i < 16; ++i) m = std::max(m, std::abs(d.bx[t * 16 + i]));
    bx_sum += m;
  }
  const auto r = selective_scan_seq(d, {4, 4, h0}, p.d_skip, x);
  for (double v : r.final_state.h) CHECK(std::abs(v) <= bound + bx_sum);
}

TEST_CASE("backward pass: hand-unrolled cases") {
  SUBCASE("memoryless") {
    const auto d = constant(4, 0.0, 1.0, 1.0);
    const std::vector<double> sk{0.0}, x(4, 0.0);
    std::vector<double> dy(4, 0.0);
    dy[2] = 1.0;
    const auto g = selective_scan_backward(d, ScanState::zeros(1, 1), sk, x, dy);
    CHECK(g.bx == std::vector<double>{0.0, 0.0, 1.0, 0.0});
  }
  SUBCASE("three steps with constant decay") {
    const double C = 1.7;
    const auto d = constant(3, 0.5, 1.0, C);
    const std::vector<double> sk{0.0}, x(3, 0.0), dy{0.0, 0.0, 1.0};
    const auto g = selective_scan_backward(d, ScanState::zeros(1, 1), sk, x, dy);
    CHECK(g.bx[0] == doctest::Approx(0.25 * C).epsilon(1e-15));
    CHECK(g.bx[1] == doctest::Approx(0.5 * C).epsilon(1e-15));
    CHECK(g.bx[2] == doctest::Approx(C).epsilon(1e-15));
  }
}

TEST_CASE("backward pass matches finite differences") {
  std::mt19937_64 rng(10);
  const std::size_t T = 12, L = 2, N = 3;
  auto d = oracle::random_discretized(T, L, N, rng);
  auto h0 = oracle::random_vector(L * N, rng);
  auto sk = oracle::random_vector(L, rng);
  const auto x = oracle::random_vector(T * L, rng);
  const auto dy = oracle::random_vector(T * L, rng);
  auto loss = [&] {
    const auto y = oracle::scan_direct(d, h0, sk, x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += dy[i] * y[i];
    return s;
  };
  const auto g = selective_scan_backward(d, {L, N, h0}, sk, x, dy);
  auto check_group = [&](std::vector<double>& v, const std::vector<double>& grad) {
    std::vector<double> fd(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) fd[i] = oracle::central_diff(v, i, 1e-5, loss);
    CHECK(oracle::rel_error(grad, fd) <= 1e-6);
  };
  check_group(d.abar, g.abar);
  check_group(d.bx, g.bx);
  check_group(d.c, g.c);
  check_group(sk, g.d_skip);
  check_group(h0, g.h0);
}

TEST_CASE("scan rejects mismatched shapes") {
  const auto d = constant(3, 0.5, 1.0, 1.0);
  CHECK_THROWS_AS(selective_scan_seq(d, ScanState::zeros(2, 1), std::vector<double>{0.0}, std::vector<double>(3)),
                  ShapeError);
  CHECK_THROWS_AS(selective_scan_seq(d, ScanState::zeros(1, 1), std::vector<double>{}, std::vector<double>(3)),
                  ShapeError);
  CHECK_THROWS_AS(selective_scan_backward(d, ScanState::zeros(1, 1), std::vector<double>{0.0},
                                          std::vector<double>(3), std::vector<double>(2)),
                  ShapeError);
  S6Params bad = S6Params::zeros(2, 2);
  bad.w_b.pop_back();
  CHECK_THROWS_AS(bad.check(), ShapeError);
}
