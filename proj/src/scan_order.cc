#include "sparse_scan/scan_order.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace sscan {

std::pair<Permutation, Permutation> bidi_orders(const TokenSet& ts) {
  Permutation fwd(ts.size());
  std::iota(fwd.begin(), fwd.end(), std::size_t{0});
  Permutation bwd(fwd.rbegin(), fwd.rend());
  return {std::move(fwd), std::move(bwd)};
}

std::array<Permutation, 4> cross_orders(const TokenSet& ts) {
  auto [rf, rb] = bidi_orders(ts);
  Permutation cf(ts.size());
  std::iota(cf.begin(), cf.end(), std::size_t{0});
  std::stable_sort(cf.begin(), cf.end(), [&](std::size_t a, std::size_t b) {
    const Coord& ca = ts.coords[a];
    const Coord& cb = ts.coords[b];
    return ca.col != cb.col ? ca.col < cb.col : ca.row < cb.row;
  });
  Permutation cb(cf.rbegin(), cf.rend());
  return {std::move(rf), std::move(rb), std::move(cf), std::move(cb)};
}

Permutation ipl_order(const TokenSet& ts, const TokenScoreMap& scores, const IplConfig& cfg) {
  const auto& s = scores.values;
  if (s.rows() != ts.grid_rows || s.cols() != ts.grid_cols) throw ShapeError("score map does not match token grid");
  const std::size_t k = cfg.window;
  if (k == 0 || s.rows() % k != 0 || s.cols() % k != 0)
    throw ShapeError("IPL window " + std::to_string(k) + " does not divide the token grid");

  const std::size_t wr = s.rows() / k;
  const std::size_t wc = s.cols() / k;
  std::vector<double> win_max(wr * wc);
  for (std::size_t r = 0; r < wr; ++r) {
    for (std::size_t c = 0; c < wc; ++c) {
      double m = s(r * k, c * k);
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) m = std::max(m, s(r * k + i, c * k + j));
      win_max[r * wc + c] = m;
    }
  }
  std::vector<std::size_t> windows(wr * wc);
  std::iota(windows.begin(), windows.end(), std::size_t{0});
  std::stable_sort(windows.begin(), windows.end(),
                   [&](std::size_t a, std::size_t b) { return win_max[a] > win_max[b]; });

  const Grid<std::ptrdiff_t> idx = kept_index_grid(ts);
  Permutation out;
  out.reserve(ts.size());
  for (std::size_t w : windows) {
    const std::size_t r0 = (w / wc) * k;
    const std::size_t c0 = (w % wc) * k;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j)
        if (const auto id = idx(r0 + i, c0 + j); id >= 0) out.push_back(static_cast<std::size_t>(id));
  }
  return out;
}

Permutation invert(const Permutation& p) {
  Permutation inv(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) inv[p[i]] = i;
  return inv;
}

bool is_permutation_of_iota(const Permutation& p) {
  std::vector<bool> seen(p.size(), false);
  for (std::size_t v : p) {
    if (v >= p.size() || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

}  // namespace sscan
