#include "sparse_scan/stca.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

namespace sscan {

PixelScoreMap accumulate_temporal_scores(const EventStream& s) {
  PixelScoreMap out{Grid<double>(s.height, s.width, 0.0)};
  if (s.events.empty()) return out;
  if (s.span() == 0) throw ConfigError("cannot normalize timestamps over a zero-length window");
  const double span = static_cast<double>(s.span());
  // Polarity is not used by the continuity score.
  for (const Event& e : s.events) out.values(e.y, e.x) += static_cast<double>(e.t - s.window_start) / span;
  return out;
}

TokenScoreMap pool_to_tokens(const PixelScoreMap& map, std::size_t patch) {
  const auto& v = map.values;
  if (patch == 0 || v.rows() % patch != 0 || v.cols() % patch != 0)
    throw ConfigError("patch size " + std::to_string(patch) + " does not divide " + std::to_string(v.rows()) + "x" +
                      std::to_string(v.cols()));
  TokenScoreMap out{Grid<double>(v.rows() / patch, v.cols() / patch, 0.0)};
  const double inv = 1.0 / static_cast<double>(patch * patch);
  for (std::size_t r = 0; r < out.values.rows(); ++r) {
    for (std::size_t c = 0; c < out.values.cols(); ++c) {
      double sum = 0.0;
      for (std::size_t i = 0; i < patch; ++i)
        for (std::size_t j = 0; j < patch; ++j) sum += v(r * patch + i, c * patch + j);
      out.values(r, c) = sum * inv;
    }
  }
  return out;
}

TokenScoreMap gaussian_aggregate(const TokenScoreMap& map, const GaussianConfig& cfg) {
  if (!(cfg.sigma > 0.0)) throw ConfigError("gaussian sigma must be positive");
  const auto& in = map.values;
  const auto r = static_cast<std::ptrdiff_t>(cfg.radius);
  const std::size_t side = 2 * cfg.radius + 1;
  std::vector<double> weight(side * side);
  for (std::ptrdiff_t dy = -r; dy <= r; ++dy)
    for (std::ptrdiff_t dx = -r; dx <= r; ++dx)
      weight[(dy + r) * side + (dx + r)] = std::exp(-static_cast<double>(dx * dx + dy * dy) / (2.0 * cfg.sigma * cfg.sigma));

  TokenScoreMap out{Grid<double>(in.rows(), in.cols(), 0.0)};
  const auto rows = static_cast<std::ptrdiff_t>(in.rows());
  const auto cols = static_cast<std::ptrdiff_t>(in.cols());
  for (std::ptrdiff_t y = 0; y < rows; ++y) {
    for (std::ptrdiff_t x = 0; x < cols; ++x) {
      double num = 0.0, den = 0.0;
      for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
        const auto yy = y + dy;
        if (yy < 0 || yy >= rows) continue;
        for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
          const auto xx = x + dx;
          if (xx < 0 || xx >= cols) continue;
          const double w = weight[(dy + r) * side + (dx + r)];
          num += w * in(yy, xx);
          den += w;
        }
      }
      out.values(y, x) = num / den;
    }
  }
  return out;
}

double compute_threshold(const TokenScoreMap& map, double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("sparsity factor beta must be positive");
  if (map.values.size() == 0) throw ConfigError("empty score map");
  double sum = 0.0;
  for (double v : map.values.data()) sum += v;
  return sum / (beta * static_cast<double>(map.values.size()));
}

SparsificationMap build_sparsification_map(const TokenScoreMap& map, double alpha) {
  SparsificationMap out;
  out.alpha = alpha;
  out.keep = Grid<std::uint8_t>(map.values.rows(), map.values.cols(), 0);
  for (std::size_t i = 0; i < map.values.size(); ++i) out.keep[i] = map.values[i] >= alpha ? 1 : 0;
  return out;
}

SparsificationMap downsample_map(const SparsificationMap& map, std::size_t factor) {
  if (factor == 0 || map.rows() % factor != 0 || map.cols() % factor != 0)
    throw ConfigError("downsample factor does not divide the sparsification map");
  SparsificationMap out;
  out.alpha = map.alpha;
  out.beta = map.beta;
  out.keep = Grid<std::uint8_t>(map.rows() / factor, map.cols() / factor, 0);
  for (std::size_t r = 0; r < map.rows(); ++r)
    for (std::size_t c = 0; c < map.cols(); ++c)
      if (map.keep(r, c)) out.keep(r / factor, c / factor) = 1;
  return out;
}

TokenScoreMap downsample_scores(const TokenScoreMap& map, std::size_t factor) {
  const auto& v = map.values;
  if (factor == 0 || v.rows() % factor != 0 || v.cols() % factor != 0)
    throw ConfigError("downsample factor does not divide the score map");
  TokenScoreMap out{Grid<double>(v.rows() / factor, v.cols() / factor, -std::numeric_limits<double>::infinity())};
  for (std::size_t r = 0; r < v.rows(); ++r)
    for (std::size_t c = 0; c < v.cols(); ++c) {
      double& o = out.values(r / factor, c / factor);
      o = std::max(o, v(r, c));
    }
  return out;
}

StcaResult run_stca_from_pixels(const PixelScoreMap& pixels, const StcaConfig& cfg) {
  const TokenScoreMap pooled = pool_to_tokens(pixels, cfg.patch);
  StcaResult res;
  res.scores = gaussian_aggregate(pooled, cfg.gaussian);
  const double alpha = compute_threshold(res.scores, cfg.beta);
  res.map = build_sparsification_map(res.scores, alpha);
  res.map.beta = cfg.beta;
  return res;
}

StcaResult run_stca(const EventStream& stream, const StcaConfig& cfg) {
  if (cfg.patch == 0 || stream.height % cfg.patch != 0 || stream.width % cfg.patch != 0)
    throw ConfigError("patch size does not divide the sensor geometry");
  return run_stca_from_pixels(accumulate_temporal_scores(stream), cfg);
}

namespace {

template <typename T>
void write_csv_impl(const Grid<T>& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c < g.cols(); ++c) {
      if (c) out << ',';
      if constexpr (std::is_same_v<T, std::uint8_t>)
        out << int(g(r, c));
      else
        out << g(r, c);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void write_pgm_bytes(std::size_t rows, std::size_t cols, const std::vector<std::uint8_t>& px,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << cols << ' ' << rows << "\n255\n";
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

void write_grid_csv(const Grid<double>& g, const std::filesystem::path& path) { write_csv_impl(g, path); }
void write_grid_csv(const Grid<std::uint8_t>& g, const std::filesystem::path& path) { write_csv_impl(g, path); }

void write_grid_pgm(const Grid<double>& g, const std::filesystem::path& path) {
  double lo = 0.0, hi = 0.0;
  if (g.size()) {
    const auto [mn, mx] = std::minmax_element(g.data().begin(), g.data().end());
    lo = *mn;
    hi = *mx;
  }
  std::vector<std::uint8_t> px(g.size(), 0);
  if (hi > lo)
    for (std::size_t i = 0; i < g.size(); ++i) px[i] = static_cast<std::uint8_t>(std::lround(255.0 * (g[i] - lo) / (hi - lo)));
  write_pgm_bytes(g.rows(), g.cols(), px, path);
}

void write_grid_pgm(const Grid<std::uint8_t>& g, const std::filesystem::path& path) {
  std::vector<std::uint8_t> px(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) px[i] = g[i] ? 255 : 0;
  write_pgm_bytes(g.rows(), g.cols(), px, path);
}

Grid<std::uint8_t> read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || maxval != 255 || !in) throw ParseError("not an 8-bit P5 PGM: " + path.string());
  in.get();
  Grid<std::uint8_t> g(h, w);
  in.read(reinterpret_cast<char*>(g.data().data()), static_cast<std::streamsize>(g.size()));
  if (!in) throw ParseError("truncated PGM: " + path.string());
  return g;
}

}  // namespace sscan
