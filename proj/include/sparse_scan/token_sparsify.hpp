#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sparse_scan/common.hpp"
#include "sparse_scan/stca.hpp"

namespace sscan {

// Feature tensor of logical shape (C, H, W). Storage is token-major
// (row, col, channel) so a token's channel vector is contiguous.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(std::size_t channels, std::size_t height, std::size_t width, double fill = 0.0)
      : channels_(channels), height_(height), width_(width), data_(channels * height * width, fill) {}

  std::size_t channels() const { return channels_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t tokens() const { return height_ * width_; }

  double& at(std::size_t c, std::size_t r, std::size_t w) { return data_[(r * width_ + w) * channels_ + c]; }
  double at(std::size_t c, std::size_t r, std::size_t w) const { return data_[(r * width_ + w) * channels_ + c]; }

  std::span<double> token(std::size_t index) { return {data_.data() + index * channels_, channels_}; }
  std::span<const double> token(std::size_t index) const { return {data_.data() + index * channels_, channels_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const FeatureMap& o) const {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }
  bool operator==(const FeatureMap&) const = default;

 private:
  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

// Kept tokens in row-major order of their source position.
struct TokenSet {
  std::size_t channels = 0;
  std::size_t grid_rows = 0;
  std::size_t grid_cols = 0;
  std::vector<double> values;  // size() x channels, row-major
  std::vector<Coord> coords;

  std::size_t size() const { return coords.size(); }
  std::span<double> token(std::size_t i) { return {values.data() + i * channels, channels}; }
  std::span<const double> token(std::size_t i) const { return {values.data() + i * channels, channels}; }
};

TokenSet gather_tokens(const FeatureMap& x, const SparsificationMap& keep);

// Writes token values over `base` at their coordinates; other positions pass
// through unchanged.
FeatureMap scatter_tokens(const TokenSet& tokens, const FeatureMap& base);

double kept_ratio(const SparsificationMap& keep);
std::size_t kept_count(const SparsificationMap& keep);

// Grid of kept-token indices (-1 where discarded), for neighbour lookups.
Grid<std::ptrdiff_t> kept_index_grid(const TokenSet& tokens);

SparsificationMap all_kept(std::size_t rows, std::size_t cols);

}  // namespace sscan
