#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "sparse_scan/common.hpp"
#include "sparse_scan/event_io.hpp"

namespace sscan {

// Per-pixel temporal continuity scores (sum of window-normalized timestamps).
struct PixelScoreMap {
  Grid<double> values;
};

// Per-token scores, either pooled temporal scores or the Gaussian-aggregated
// spatiotemporal scores.
struct TokenScoreMap {
  Grid<double> values;
};

struct GaussianConfig {
  std::size_t radius = 1;
  double sigma = 1.0;
};

struct SparsificationMap {
  Grid<std::uint8_t> keep;
  double alpha = 0.0;
  double beta = 1.0;

  std::size_t rows() const { return keep.rows(); }
  std::size_t cols() const { return keep.cols(); }
};

struct StcaConfig {
  std::size_t patch = 4;
  GaussianConfig gaussian;
  double beta = 1.0;
};

struct StcaResult {
  TokenScoreMap scores;  // spatiotemporal scores
  SparsificationMap map;
};

PixelScoreMap accumulate_temporal_scores(const EventStream& stream);
TokenScoreMap pool_to_tokens(const PixelScoreMap& map, std::size_t patch);
TokenScoreMap gaussian_aggregate(const TokenScoreMap& map, const GaussianConfig& cfg);
double compute_threshold(const TokenScoreMap& map, double beta);
SparsificationMap build_sparsification_map(const TokenScoreMap& map, double alpha);

// Coarsens D with a max-pool of kernel and stride `factor`.
SparsificationMap downsample_map(const SparsificationMap& map, std::size_t factor);

// Max-pools a score map; used to carry the scan priorities to coarser stages.
TokenScoreMap downsample_scores(const TokenScoreMap& map, std::size_t factor);

// Runs the stages after temporal accumulation; exposed so callers can feed a
// pre-scaled pixel map.
StcaResult run_stca_from_pixels(const PixelScoreMap& pixels, const StcaConfig& cfg);
StcaResult run_stca(const EventStream& stream, const StcaConfig& cfg);

// CSV (row-major, one grid row per line) and binary PGM (P5) writers.
void write_grid_csv(const Grid<double>& g, const std::filesystem::path& path);
void write_grid_csv(const Grid<std::uint8_t>& g, const std::filesystem::path& path);
void write_grid_pgm(const Grid<double>& g, const std::filesystem::path& path);
void write_grid_pgm(const Grid<std::uint8_t>& g, const std::filesystem::path& path);
Grid<std::uint8_t> read_pgm(const std::filesystem::path& path);

}  // namespace sscan
