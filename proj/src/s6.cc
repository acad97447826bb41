#include "sparse_scan/s6.hpp"

#include <cmath>
#include <string>

#include "sparse_scan/common.hpp"
#include "sparse_scan/parallel.hpp"

namespace sscan {

S6Params S6Params::zeros(std::size_t lanes, std::size_t state) {
  S6Params p;
  p.lanes = lanes;
  p.state = state;
  p.log_a.assign(lanes * state, 0.0);
  p.w_delta.assign(lanes * lanes, 0.0);
  p.b_delta.assign(lanes, 0.0);
  p.w_b.assign(state * lanes, 0.0);
  p.w_c.assign(state * lanes, 0.0);
  p.d_skip.assign(lanes, 0.0);
  return p;
}

S6Params S6Params::random(std::size_t lanes, std::size_t state, std::mt19937_64& rng) {
  S6Params p = zeros(lanes, state);
  const double s = 1.0 / std::sqrt(static_cast<double>(lanes));
  std::uniform_real_distribution<double> w(-s, s);
  std::uniform_real_distribution<double> log_dt(std::log(1e-3), std::log(1e-1));
  for (std::size_t l = 0; l < lanes; ++l)
    for (std::size_t n = 0; n < state; ++n) p.log_a[l * state + n] = std::log(static_cast<double>(n + 1));
  for (auto& v : p.w_delta) v = 0.1 * w(rng);
  for (auto& v : p.b_delta) {
    const double dt = std::exp(log_dt(rng));
    v = dt + std::log(-std::expm1(-dt));  // softplus^-1(dt)
  }
  for (auto& v : p.w_b) v = w(rng);
  for (auto& v : p.w_c) v = w(rng);
  for (auto& v : p.d_skip) v = 1.0;
  return p;
}

double S6Params::a(std::size_t lane, std::size_t n) const { return -std::exp(log_a[lane * state + n]); }

void S6Params::check() const {
  if (lanes == 0 || state == 0) throw ConfigError("S6 needs at least one lane and one state");
  if (log_a.size() != lanes * state || w_delta.size() != lanes * lanes || b_delta.size() != lanes ||
      w_b.size() != state * lanes || w_c.size() != state * lanes || d_skip.size() != lanes)
    throw ShapeError("S6 parameter shapes are inconsistent");
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

ZohStep discretize_zoh(double a, double b, double delta) {
  const double da = delta * a;
  ZohStep s;
  s.abar = std::exp(da);
  if (std::abs(da) < 1e-8)
    s.bbar = delta * b * (1.0 + da / 2.0);
  else
    s.bbar = std::expm1(da) / a * b;
  return s;
}

S6Discretized parameterize(std::span<const double> x, std::size_t steps, const S6Params& p, const FlopScope& flops) {
  p.check();
  const std::size_t L = p.lanes, N = p.state;
  if (x.size() != steps * L)
    throw ShapeError("S6 input has " + std::to_string(x.size()) + " values, expected " + std::to_string(steps * L));
  S6Discretized d;
  d.steps = steps;
  d.lanes = L;
  d.state = N;
  d.abar.resize(steps * L * N);
  d.bx.resize(steps * L * N);
  d.c.resize(steps * N);

  std::vector<double> a(L * N);
  for (std::size_t i = 0; i < L * N; ++i) a[i] = -std::exp(p.log_a[i]);
  std::vector<double> delta(L), bt(N);
  for (std::size_t t = 0; t < steps; ++t) {
    const double* xt = x.data() + t * L;
    for (std::size_t l = 0; l < L; ++l) {
      double z = p.b_delta[l];
      const double* w = p.w_delta.data() + l * L;
      for (std::size_t j = 0; j < L; ++j) z += w[j] * xt[j];
      delta[l] = softplus(z);
    }
    for (std::size_t n = 0; n < N; ++n) {
      double sb = 0.0, sc = 0.0;
      const double* wb = p.w_b.data() + n * L;
      const double* wc = p.w_c.data() + n * L;
      for (std::size_t j = 0; j < L; ++j) {
        sb += wb[j] * xt[j];
        sc += wc[j] * xt[j];
      }
      bt[n] = sb;
      d.c[t * N + n] = sc;
    }
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t n = 0; n < N; ++n) {
        const ZohStep z = discretize_zoh(a[l * N + n], bt[n], delta[l]);
        d.abar[d.at(t, l, n)] = z.abar;
        d.bx[d.at(t, l, n)] = z.bbar * xt[l];
      }
    }
  }
  flops.add(flop_cost::s6_parameterize(steps, L, N));
  return d;
}

namespace {

void check_scan_inputs(const S6Discretized& d, const ScanState& h0, std::span<const double> d_skip,
                       std::span<const double> x) {
  if (h0.h.size() != d.lanes * d.state) throw ShapeError("initial state shape mismatch");
  if (d_skip.size() != d.lanes) throw ShapeError("skip gain shape mismatch");
  if (x.size() != d.steps * d.lanes) throw ShapeError("scan input shape mismatch");
}

}  // namespace

ScanResult selective_scan_seq(const S6Discretized& d, const ScanState& h0, std::span<const double> d_skip,
                              std::span<const double> x, const FlopScope& flops) {
  check_scan_inputs(d, h0, d_skip, x);
  const std::size_t L = d.lanes, N = d.state;
  ScanResult r;
  r.final_state = h0;
  r.y.assign(d.steps * L, 0.0);
  std::vector<double>& h = r.final_state.h;
  for (std::size_t t = 0; t < d.steps; ++t) {
    const double* ct = d.c.data() + t * N;
    for (std::size_t l = 0; l < L; ++l) {
      double acc = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        double& hs = h[l * N + n];
        hs = d.abar[d.at(t, l, n)] * hs + d.bx[d.at(t, l, n)];
        acc += ct[n] * hs;
      }
      r.y[t * L + l] = acc + d_skip[l] * x[t * L + l];
    }
  }
  flops.add(flop_cost::s6_scan(d.steps, L, N));
  return r;
}

ScanElement combine(const ScanElement& first, const ScanElement& second) {
  return {first.a * second.a, second.a * first.b + second.b};
}

ScanResult selective_scan_parallel(const S6Discretized& d, const ScanState& h0, std::span<const double> d_skip,
                                   std::span<const double> x, std::size_t threads) {
  check_scan_inputs(d, h0, d_skip, x);
  const std::size_t L = d.lanes, N = d.state, T = d.steps;
  ScanResult r;
  r.final_state = h0;
  r.y.assign(T * L, 0.0);
  if (T == 0) return r;
  std::size_t padded = 1;
  while (padded < T) padded <<= 1;

  parallel_for(L, threads ? threads : default_threads(), [&](std::size_t l) {
    // buf[t * N + n]; padding elements are the identity (1, 0).
    std::vector<ScanElement> buf(padded * N);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t n = 0; n < N; ++n) buf[t * N + n] = {d.abar[d.at(t, l, n)], d.bx[d.at(t, l, n)]};

    // Up-sweep: each right node becomes the total of its subtree.
    for (std::size_t stride = 1; stride < padded; stride <<= 1)
      for (std::size_t k = 0; k < padded; k += 2 * stride) {
        const std::size_t left = k + stride - 1, right = k + 2 * stride - 1;
        for (std::size_t n = 0; n < N; ++n) buf[right * N + n] = combine(buf[left * N + n], buf[right * N + n]);
      }
    // Down-sweep to an exclusive prefix.
    for (std::size_t n = 0; n < N; ++n) buf[(padded - 1) * N + n] = ScanElement{};
    for (std::size_t stride = padded >> 1; stride >= 1; stride >>= 1) {
      for (std::size_t k = 0; k < padded; k += 2 * stride) {
        const std::size_t left = k + stride - 1, right = k + 2 * stride - 1;
        for (std::size_t n = 0; n < N; ++n) {
          const ScanElement left_total = buf[left * N + n];
          buf[left * N + n] = buf[right * N + n];
          buf[right * N + n] = combine(buf[right * N + n], left_total);
        }
      }
      if (stride == 1) break;
    }

    const double* h_init = h0.h.data() + l * N;
    for (std::size_t t = 0; t < T; ++t) {
      double acc = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const ScanElement inc = combine(buf[t * N + n], {d.abar[d.at(t, l, n)], d.bx[d.at(t, l, n)]});
        const double h = inc.a * h_init[n] + inc.b;
        acc += d.c[t * N + n] * h;
        if (t + 1 == T) r.final_state.h[l * N + n] = h;
      }
      r.y[t * L + l] = acc + d_skip[l] * x[t * L + l];
    }
  });
  return r;
}

ScanGrads selective_scan_backward(const S6Discretized& d, const ScanState& h0, std::span<const double> d_skip,
                                  std::span<const double> x, std::span<const double> dy) {
  check_scan_inputs(d, h0, d_skip, x);
  const std::size_t L = d.lanes, N = d.state, T = d.steps;
  if (dy.size() != T * L) throw ShapeError("upstream gradient shape mismatch");

  // Recompute the forward states; hs[t + 1] holds h_t, hs[0] = h0.
  std::vector<double> hs((T + 1) * L * N);
  std::copy(h0.h.begin(), h0.h.end(), hs.begin());
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < L * N; ++i) {
      const std::size_t j = t * L * N + i;
      hs[(t + 1) * L * N + i] = d.abar[j] * hs[t * L * N + i] + d.bx[j];
    }

  ScanGrads g;
  g.abar.assign(T * L * N, 0.0);
  g.bx.assign(T * L * N, 0.0);
  g.c.assign(T * N, 0.0);
  g.d_skip.assign(L, 0.0);
  g.h0.assign(L * N, 0.0);

  std::vector<double> dh(L * N, 0.0);  // gradient flowing into h_t from later steps
  for (std::size_t t = T; t-- > 0;) {
    const double* ct = d.c.data() + t * N;
    for (std::size_t l = 0; l < L; ++l) {
      const double gy = dy[t * L + l];
      g.d_skip[l] += gy * x[t * L + l];
      for (std::size_t n = 0; n < N; ++n) {
        const std::size_t i = l * N + n;
        const double grad_h = dh[i] + ct[n] * gy;
        g.abar[t * L * N + i] = grad_h * hs[t * L * N + i];
        g.bx[t * L * N + i] = grad_h;
        g.c[t * N + n] += gy * hs[(t + 1) * L * N + i];
        dh[i] = grad_h * d.abar[t * L * N + i];
      }
    }
  }
  g.h0 = dh;
  return g;
}

std::vector<double> s6_forward(std::span<const double> x, std::size_t steps, const S6Params& p,
                               const FlopScope& flops) {
  const S6Discretized d = parameterize(x, steps, p, flops);
  return selective_scan_seq(d, ScanState::zeros(p.lanes, p.state), p.d_skip, x, flops).y;
}

}  // namespace sscan
