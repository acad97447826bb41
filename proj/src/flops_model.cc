#include "sparse_scan/flops_model.hpp"

#include <cmath>
#include <string>

namespace sscan {

namespace {

using namespace flop_cost;
using u64 = std::uint64_t;

u64 ss2d_flops(u64 n, u64 C, u64 E, u64 N) {
  return layer_norm(n, C) + linear(n, C, 2 * E) + depthwise3x3(n, E) + elementwise(n * E) + 3 * s6(n, E, N) +
         elementwise(2 * n * E) + elementwise(2 * n * E) + linear(n, E, C) + elementwise(n * C);
}

u64 mlp_flops(u64 n, u64 C, u64 ratio) {
  return layer_norm(n, C) + linear(n, C, ratio * C) + elementwise(n * ratio * C) + linear(n, ratio * C, C) +
         elementwise(n * C);
}

u64 gci_flops(u64 M, u64 C, u64 N) {
  return linear(M, C, C) + depthwise3x3(M, C) + elementwise(M * C) + 2 * s6(C, M, N) + elementwise(M * C) +
         linear(M, C, C) + elementwise(M * C) + linear(M, C, C) + elementwise(M * C);
}

u64 lstm_flops(u64 M, u64 C, LstmKind kind) {
  const u64 cell = elementwise(9 * M * C);
  if (kind == LstmKind::kSeparable) return 2 * depthwise3x3(M, C, false) + linear(M, 2 * C, 4 * C) + cell;
  return 2 * conv3x3(M, C, 4 * C) + elementwise(2 * M * 4 * C) + cell;
}

}  // namespace

FlopsReport count_analytic(const BackboneConfig& cfg, const std::array<double, kStages>& ratios) {
  cfg.validate();
  for (double r : ratios)
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("kept ratios must lie in [0, 1]");

  FlopsReport report;
  auto push = [&](std::size_t s, const char* block, u64 dense, u64 sparse) {
    BlockFlops b;
    b.name = "stage" + std::to_string(s + 1) + "." + block;
    b.dense = dense;
    b.sparse = sparse;
    b.kept_ratio = ratios[s];
    b.token_wise = is_token_wise_block(b.name);
    report.blocks.push_back(b);
  };

  for (std::size_t s = 0; s < kStages; ++s) {
    const u64 M = cfg.grid_rows(s) * cfg.grid_cols(s);
    const u64 kept = static_cast<u64>(std::llround(ratios[s] * static_cast<double>(M)));
    const u64 C = cfg.channels[s];
    const u64 E = cfg.ss2d_expand * C;
    const u64 N = cfg.state_dim;
    if (s == 0) {
      const u64 pe = linear(M, 2 * cfg.bins * cfg.patch * cfg.patch, C);
      push(s, "patch_embed", pe, pe);
    } else {
      const u64 ds = linear(M, 4 * cfg.channels[s - 1], C);
      push(s, "downsample", ds, ds);
    }
    push(s, "ss2d", ss2d_flops(M, C, E, N), ss2d_flops(kept, C, E, N));
    if (cfg.gci[s]) {
      const u64 g = gci_flops(M, C, N);
      push(s, "gci", g, g);
    } else {
      push(s, "mlp", mlp_flops(M, C, cfg.mlp_ratio), mlp_flops(kept, C, cfg.mlp_ratio));
    }
    const u64 l = lstm_flops(M, C, cfg.lstm);
    push(s, "convlstm", l, l);
  }
  return report;
}

std::array<double, kStages> stage_kept_ratios(const SparsificationMap& keep) {
  std::array<double, kStages> r{};
  SparsificationMap cur = keep;
  for (std::size_t s = 0; s < kStages; ++s) {
    if (s > 0) cur = downsample_map(cur, 2);
    r[s] = kept_ratio(cur);
  }
  return r;
}

FlopsReport measure(const BackboneParams& params, const Frame& frame) {
  FlopCounter sparse, dense;
  {
    BackboneState st = initial_state(params.cfg);
    backbone_forward(std::span<const Frame>(&frame, 1), params, st, &sparse);
  }
  {
    Frame full = frame;
    full.keep = all_kept(frame.keep.rows(), frame.keep.cols());
    BackboneState st = initial_state(params.cfg);
    backbone_forward(std::span<const Frame>(&full, 1), params, st, &dense);
  }
  return make_report(dense, sparse, stage_kept_ratios(frame.keep));
}

}  // namespace sscan
