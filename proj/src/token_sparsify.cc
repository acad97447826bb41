#include "sparse_scan/token_sparsify.hpp"

#include <algorithm>
#include <string>

namespace sscan {

TokenSet gather_tokens(const FeatureMap& x, const SparsificationMap& keep) {
  if (keep.rows() != x.height() || keep.cols() != x.width())
    throw ShapeError("sparsification map " + std::to_string(keep.rows()) + "x" + std::to_string(keep.cols()) +
                     " does not match feature grid " + std::to_string(x.height()) + "x" + std::to_string(x.width()));
  TokenSet ts;
  ts.channels = x.channels();
  ts.grid_rows = x.height();
  ts.grid_cols = x.width();
  const std::size_t n = kept_count(keep);
  ts.coords.reserve(n);
  ts.values.reserve(n * x.channels());
  for (std::size_t r = 0; r < x.height(); ++r) {
    for (std::size_t c = 0; c < x.width(); ++c) {
      if (!keep.keep(r, c)) continue;
      ts.coords.push_back({r, c});
      const auto tok = x.token(r * x.width() + c);
      ts.values.insert(ts.values.end(), tok.begin(), tok.end());
    }
  }
  return ts;
}

FeatureMap scatter_tokens(const TokenSet& ts, const FeatureMap& base) {
  if (ts.channels != base.channels() && ts.size() > 0) throw ShapeError("token channel count does not match base");
  FeatureMap out = base;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const Coord& p = ts.coords[i];
    if (p.row >= base.height() || p.col >= base.width()) throw ShapeError("token coordinate out of bounds");
    const auto src = ts.token(i);
    std::copy(src.begin(), src.end(), out.token(p.row * base.width() + p.col).begin());
  }
  return out;
}

std::size_t kept_count(const SparsificationMap& keep) {
  return static_cast<std::size_t>(std::count_if(keep.keep.data().begin(), keep.keep.data().end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

double kept_ratio(const SparsificationMap& keep) {
  if (keep.keep.size() == 0) return 0.0;
  return static_cast<double>(kept_count(keep)) / static_cast<double>(keep.keep.size());
}

Grid<std::ptrdiff_t> kept_index_grid(const TokenSet& ts) {
  Grid<std::ptrdiff_t> idx(ts.grid_rows, ts.grid_cols, -1);
  for (std::size_t i = 0; i < ts.size(); ++i) idx(ts.coords[i].row, ts.coords[i].col) = static_cast<std::ptrdiff_t>(i);
  return idx;
}

SparsificationMap all_kept(std::size_t rows, std::size_t cols) {
  SparsificationMap m;
  m.keep = Grid<std::uint8_t>(rows, cols, 1);
  return m;
}

}  // namespace sscan
