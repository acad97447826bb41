#include "sparse_scan/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sscan {

Linear Linear::zeros(std::size_t in, std::size_t out, bool bias) {
  Linear l;
  l.in = in;
  l.out = out;
  l.weight.assign(in * out, 0.0);
  if (bias) l.bias.assign(out, 0.0);
  return l;
}

Linear Linear::random(std::size_t in, std::size_t out, std::mt19937_64& rng, bool bias) {
  Linear l = zeros(in, out, bias);
  const double s = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-s, s);
  for (auto& w : l.weight) w = u(rng);
  for (auto& b : l.bias) b = u(rng);
  return l;
}

std::vector<double> Linear::apply(std::span<const double> x, std::size_t rows, const FlopScope& flops) const {
  if (x.size() != rows * in)
    throw ShapeError("linear expects " + std::to_string(rows * in) + " inputs, got " + std::to_string(x.size()));
  std::vector<double> y(rows * out);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * in;
    for (std::size_t o = 0; o < out; ++o) {
      const double* w = weight.data() + o * in;
      double acc = bias.empty() ? 0.0 : bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += w[i] * xr[i];
      y[r * out + o] = acc;
    }
  }
  flops.add(flop_cost::linear(rows, in, out, !bias.empty()));
  return y;
}

LayerNorm LayerNorm::identity(std::size_t channels) {
  LayerNorm n;
  n.channels = channels;
  n.gamma.assign(channels, 1.0);
  n.beta.assign(channels, 0.0);
  return n;
}

std::vector<double> LayerNorm::apply(std::span<const double> x, std::size_t rows, const FlopScope& flops) const {
  if (x.size() != rows * channels) throw ShapeError("layer norm shape mismatch");
  std::vector<double> y(x.size());
  const double inv_c = 1.0 / static_cast<double>(channels);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * channels;
    double mean = 0.0;
    for (std::size_t c = 0; c < channels; ++c) mean += xr[c];
    mean *= inv_c;
    double var = 0.0;
    for (std::size_t c = 0; c < channels; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var *= inv_c;
    const double inv_std = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < channels; ++c) y[r * channels + c] = (xr[c] - mean) * inv_std * gamma[c] + beta[c];
  }
  flops.add(flop_cost::layer_norm(rows, channels));
  return y;
}

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double silu(double v) { return v * sigmoid(v); }

double gelu(double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); }

DepthwiseConv DepthwiseConv::identity(std::size_t channels, Padding padding, bool bias) {
  DepthwiseConv d;
  d.channels = channels;
  d.padding = padding;
  d.kernel.assign(channels * 9, 0.0);
  for (std::size_t c = 0; c < channels; ++c) d.kernel[c * 9 + 4] = 1.0;
  if (bias) d.bias.assign(channels, 0.0);
  return d;
}

DepthwiseConv DepthwiseConv::random(std::size_t channels, Padding padding, std::mt19937_64& rng, bool bias) {
  DepthwiseConv d = identity(channels, padding, bias);
  std::uniform_real_distribution<double> u(-1.0 / 3.0, 1.0 / 3.0);
  for (auto& k : d.kernel) k = u(rng);
  for (auto& b : d.bias) b = 0.1 * u(rng);
  return d;
}

std::vector<double> DepthwiseConv::apply(std::span<const double> x, std::size_t rows, std::size_t cols,
                                         const FlopScope& flops) const {
  const std::size_t C = channels;
  if (x.size() != rows * cols * C) throw ShapeError("depthwise conv shape mismatch");
  std::vector<double> y(x.size());
  const auto R = static_cast<std::ptrdiff_t>(rows), W = static_cast<std::ptrdiff_t>(cols);
  for (std::ptrdiff_t r = 0; r < R; ++r) {
    for (std::ptrdiff_t c = 0; c < W; ++c) {
      double* out = y.data() + (r * W + c) * C;
      for (std::size_t ch = 0; ch < C; ++ch) out[ch] = bias.empty() ? 0.0 : bias[ch];
      for (std::ptrdiff_t dr = -1; dr <= 1; ++dr) {
        for (std::ptrdiff_t dc = -1; dc <= 1; ++dc) {
          std::ptrdiff_t rr = r + dr, cc = c + dc;
          if (padding == Padding::kReplicate) {
            rr = std::clamp<std::ptrdiff_t>(rr, 0, R - 1);
            cc = std::clamp<std::ptrdiff_t>(cc, 0, W - 1);
          } else if (rr < 0 || cc < 0 || rr >= R || cc >= W) {
            continue;
          }
          const double* in = x.data() + (rr * W + cc) * C;
          const std::size_t tap = static_cast<std::size_t>((dr + 1) * 3 + (dc + 1));
          for (std::size_t ch = 0; ch < C; ++ch) out[ch] += kernel[ch * 9 + tap] * in[ch];
        }
      }
    }
  }
  flops.add(flop_cost::depthwise3x3(rows * cols, C, !bias.empty()));
  return y;
}

std::vector<double> DepthwiseConv::apply_sparse(std::span<const double> x, const Grid<std::ptrdiff_t>& index,
                                                std::span<const Coord> coords, const FlopScope& flops) const {
  const std::size_t C = channels;
  if (x.size() != coords.size() * C) throw ShapeError("sparse depthwise conv shape mismatch");
  std::vector<double> y(x.size());
  const auto R = static_cast<std::ptrdiff_t>(index.rows()), W = static_cast<std::ptrdiff_t>(index.cols());
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const auto r = static_cast<std::ptrdiff_t>(coords[i].row), c = static_cast<std::ptrdiff_t>(coords[i].col);
    double* out = y.data() + i * C;
    for (std::size_t ch = 0; ch < C; ++ch) out[ch] = bias.empty() ? 0.0 : bias[ch];
    for (std::ptrdiff_t dr = -1; dr <= 1; ++dr) {
      for (std::ptrdiff_t dc = -1; dc <= 1; ++dc) {
        std::ptrdiff_t rr = r + dr, cc = c + dc;
        if (padding == Padding::kReplicate) {
          rr = std::clamp<std::ptrdiff_t>(rr, 0, R - 1);
          cc = std::clamp<std::ptrdiff_t>(cc, 0, W - 1);
        } else if (rr < 0 || cc < 0 || rr >= R || cc >= W) {
          continue;
        }
        const std::ptrdiff_t j = index(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
        if (j < 0) continue;
        const double* in = x.data() + static_cast<std::size_t>(j) * C;
        const std::size_t tap = static_cast<std::size_t>((dr + 1) * 3 + (dc + 1));
        for (std::size_t ch = 0; ch < C; ++ch) out[ch] += kernel[ch * 9 + tap] * in[ch];
      }
    }
  }
  flops.add(flop_cost::depthwise3x3(coords.size(), C, !bias.empty()));
  return y;
}

Conv3x3 Conv3x3::zeros(std::size_t in, std::size_t out) {
  Conv3x3 c;
  c.in = in;
  c.out = out;
  c.weight.assign(out * in * 9, 0.0);
  return c;
}

Conv3x3 Conv3x3::random(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  Conv3x3 c = zeros(in, out);
  const double s = 1.0 / std::sqrt(9.0 * static_cast<double>(in));
  std::uniform_real_distribution<double> u(-s, s);
  for (auto& w : c.weight) w = u(rng);
  return c;
}

std::vector<double> Conv3x3::apply(std::span<const double> x, std::size_t rows, std::size_t cols,
                                   const FlopScope& flops) const {
  if (x.size() != rows * cols * in) throw ShapeError("conv3x3 shape mismatch");
  std::vector<double> y(rows * cols * out, 0.0);
  const auto R = static_cast<std::ptrdiff_t>(rows), W = static_cast<std::ptrdiff_t>(cols);
  for (std::ptrdiff_t r = 0; r < R; ++r) {
    for (std::ptrdiff_t c = 0; c < W; ++c) {
      double* o = y.data() + (r * W + c) * out;
      for (std::ptrdiff_t dr = -1; dr <= 1; ++dr) {
        for (std::ptrdiff_t dc = -1; dc <= 1; ++dc) {
          const std::ptrdiff_t rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= R || cc >= W) continue;
          const double* xi = x.data() + (rr * W + cc) * in;
          const std::size_t tap = static_cast<std::size_t>((dr + 1) * 3 + (dc + 1));
          for (std::size_t oc = 0; oc < out; ++oc) {
            const double* w = weight.data() + oc * in * 9;
            double acc = 0.0;
            for (std::size_t ic = 0; ic < in; ++ic) acc += w[ic * 9 + tap] * xi[ic];
            o[oc] += acc;
          }
        }
      }
    }
  }
  flops.add(flop_cost::conv3x3(rows * cols, in, out));
  return y;
}

}  // namespace sscan
