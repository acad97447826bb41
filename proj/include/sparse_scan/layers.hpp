#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "sparse_scan/common.hpp"
#include "sparse_scan/flops.hpp"

namespace sscan {

struct Linear {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;  // out x in
  std::vector<double> bias;    // out (empty = no bias)

  static Linear zeros(std::size_t in, std::size_t out, bool bias = true);
  static Linear random(std::size_t in, std::size_t out, std::mt19937_64& rng, bool bias = true);

  // x: rows x in  ->  rows x out
  std::vector<double> apply(std::span<const double> x, std::size_t rows, const FlopScope& flops = {}) const;
};

struct LayerNorm {
  std::size_t channels = 0;
  std::vector<double> gamma;
  std::vector<double> beta;
  double eps = 1e-5;

  static LayerNorm identity(std::size_t channels);
  std::vector<double> apply(std::span<const double> x, std::size_t rows, const FlopScope& flops = {}) const;
};

double sigmoid(double v);
double silu(double v);
double gelu(double v);

enum class Padding { kZero, kReplicate };

// Per-channel 3x3 kernel, `kernel` is channels x 9 (row-major taps).
struct DepthwiseConv {
  std::size_t channels = 0;
  std::vector<double> kernel;
  std::vector<double> bias;  // empty = no bias
  Padding padding = Padding::kReplicate;

  static DepthwiseConv identity(std::size_t channels, Padding padding, bool bias = true);
  static DepthwiseConv random(std::size_t channels, Padding padding, std::mt19937_64& rng, bool bias = true);

  // Dense grid, token-major input (rows*cols x channels).
  std::vector<double> apply(std::span<const double> x, std::size_t rows, std::size_t cols,
                            const FlopScope& flops = {}) const;

  // Evaluates only at kept tokens. `index` maps grid cells to rows of `x`
  // (-1 = discarded); discarded neighbours contribute zero.
  std::vector<double> apply_sparse(std::span<const double> x, const Grid<std::ptrdiff_t>& index,
                                   std::span<const Coord> coords, const FlopScope& flops = {}) const;
};

// Full 3x3 convolution with zero padding; weight is out x in x 9.
struct Conv3x3 {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;

  static Conv3x3 zeros(std::size_t in, std::size_t out);
  static Conv3x3 random(std::size_t in, std::size_t out, std::mt19937_64& rng);

  std::vector<double> apply(std::span<const double> x, std::size_t rows, std::size_t cols,
                            const FlopScope& flops = {}) const;
};

}  // namespace sscan
