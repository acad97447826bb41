#include "sparse_scan/backbone.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace sscan {

void BackboneConfig::validate() const {
  if (patch == 0 || height % patch != 0 || width % patch != 0)
    throw ConfigError("patch size must divide the sensor geometry");
  if (bins == 0) throw ConfigError("voxel bin count must be positive");
  if (state_dim == 0 || ss2d_expand == 0 || mlp_ratio == 0) throw ConfigError("block sizes must be positive");
  const std::size_t div = std::size_t{1} << (kStages - 1);
  if ((height / patch) % div != 0 || (width / patch) % div != 0)
    throw ConfigError("token grid must stay divisible by 2 through all stages");
  for (std::size_t s = 0; s < kStages; ++s) {
    if (channels[s] == 0) throw ConfigError("stage channels must be positive");
    const std::size_t k = ipl_window[s];
    if (k == 0 || grid_rows(s) % k != 0 || grid_cols(s) % k != 0)
      throw ConfigError("IPL window of stage " + std::to_string(s + 1) + " must divide its token grid");
  }
}

Ss2dParams Ss2dParams::random(std::size_t channels, std::size_t inner, std::size_t state, std::size_t window,
                              std::mt19937_64& rng) {
  Ss2dParams p;
  p.norm = LayerNorm::identity(channels);
  p.in_proj = Linear::random(channels, 2 * inner, rng);
  p.conv = DepthwiseConv::random(inner, Padding::kReplicate, rng);
  for (auto& s : p.scans) s = S6Params::random(inner, state, rng);
  p.out_proj = Linear::random(inner, channels, rng);
  p.window = window;
  return p;
}

MlpParams MlpParams::random(std::size_t channels, std::size_t ratio, std::mt19937_64& rng) {
  return {LayerNorm::identity(channels), Linear::random(channels, ratio * channels, rng),
          Linear::random(ratio * channels, channels, rng)};
}

GciParams GciParams::random(std::size_t channels, std::size_t rows, std::size_t cols, std::size_t state,
                            std::mt19937_64& rng) {
  GciParams p;
  p.rows = rows;
  p.cols = cols;
  p.pre_proj = Linear::random(channels, channels, rng);
  p.conv = DepthwiseConv::random(channels, Padding::kReplicate, rng);
  p.scan_fwd = S6Params::random(rows * cols, state, rng);
  p.scan_bwd = S6Params::random(rows * cols, state, rng);
  p.mix = Linear::random(channels, channels, rng);
  p.out_proj = Linear::random(channels, channels, rng);
  return p;
}

ConvLstmParams ConvLstmParams::zeros(std::size_t channels, LstmKind kind) {
  ConvLstmParams p;
  p.kind = kind;
  p.channels = channels;
  if (kind == LstmKind::kSeparable) {
    for (auto* d : {&p.dw_x, &p.dw_h}) {
      d->channels = channels;
      d->padding = Padding::kZero;
      d->kernel.assign(channels * 9, 0.0);
    }
    p.pointwise = Linear::zeros(2 * channels, 4 * channels);
  } else {
    p.conv_x = Conv3x3::zeros(channels, 4 * channels);
    p.conv_h = Conv3x3::zeros(channels, 4 * channels);
    p.bias.assign(4 * channels, 0.0);
  }
  return p;
}

ConvLstmParams ConvLstmParams::random(std::size_t channels, LstmKind kind, std::mt19937_64& rng) {
  ConvLstmParams p = zeros(channels, kind);
  if (kind == LstmKind::kSeparable) {
    p.dw_x = DepthwiseConv::random(channels, Padding::kZero, rng, false);
    p.dw_h = DepthwiseConv::random(channels, Padding::kZero, rng, false);
    p.pointwise = Linear::random(2 * channels, 4 * channels, rng);
  } else {
    p.conv_x = Conv3x3::random(channels, 4 * channels, rng);
    p.conv_h = Conv3x3::random(channels, 4 * channels, rng);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    for (auto& b : p.bias) b = u(rng);
  }
  return p;
}

double& ConvLstmParams::gate_bias(std::size_t gate, std::size_t c) {
  return kind == LstmKind::kSeparable ? pointwise.bias[gate * channels + c] : bias[gate * channels + c];
}

BackboneParams BackboneParams::random(const BackboneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  BackboneParams p;
  p.cfg = cfg;
  p.patch_embed = Linear::random(2 * cfg.bins * cfg.patch * cfg.patch, cfg.channels[0], rng);
  for (std::size_t s = 0; s < kStages; ++s) {
    const std::size_t C = cfg.channels[s];
    StageParams& st = p.stages[s];
    if (s > 0) st.downsample = Linear::random(4 * cfg.channels[s - 1], C, rng);
    st.ss2d = Ss2dParams::random(C, cfg.ss2d_expand * C, cfg.state_dim, cfg.ipl_window[s], rng);
    if (cfg.gci[s])
      st.gci = GciParams::random(C, cfg.grid_rows(s), cfg.grid_cols(s), cfg.state_dim, rng);
    else
      st.mlp = MlpParams::random(C, cfg.mlp_ratio, rng);
    st.lstm = ConvLstmParams::random(C, cfg.lstm, rng);
  }
  return p;
}

namespace {

void add_linear(std::vector<TensorRef>& out, const std::string& name, Linear& l) {
  out.push_back({name + ".weight", &l.weight, {l.out, l.in}});
  if (!l.bias.empty()) out.push_back({name + ".bias", &l.bias, {l.out}});
}

void add_s6(std::vector<TensorRef>& out, const std::string& name, S6Params& p) {
  out.push_back({name + ".log_a", &p.log_a, {p.lanes, p.state}});
  out.push_back({name + ".w_delta", &p.w_delta, {p.lanes, p.lanes}});
  out.push_back({name + ".b_delta", &p.b_delta, {p.lanes}});
  out.push_back({name + ".w_b", &p.w_b, {p.state, p.lanes}});
  out.push_back({name + ".w_c", &p.w_c, {p.state, p.lanes}});
  out.push_back({name + ".d_skip", &p.d_skip, {p.lanes}});
}

void add_dwconv(std::vector<TensorRef>& out, const std::string& name, DepthwiseConv& d) {
  out.push_back({name + ".kernel", &d.kernel, {d.channels, 3, 3}});
  if (!d.bias.empty()) out.push_back({name + ".bias", &d.bias, {d.channels}});
}

void add_norm(std::vector<TensorRef>& out, const std::string& name, LayerNorm& n) {
  out.push_back({name + ".gamma", &n.gamma, {n.channels}});
  out.push_back({name + ".beta", &n.beta, {n.channels}});
}

}  // namespace

std::vector<TensorRef> named_tensors(BackboneParams& p) {
  std::vector<TensorRef> out;
  add_linear(out, "patch_embed", p.patch_embed);
  for (std::size_t s = 0; s < kStages; ++s) {
    const std::string pre = "stage" + std::to_string(s + 1);
    StageParams& st = p.stages[s];
    if (st.downsample) add_linear(out, pre + ".downsample", *st.downsample);
    add_norm(out, pre + ".ss2d.norm", st.ss2d.norm);
    add_linear(out, pre + ".ss2d.in_proj", st.ss2d.in_proj);
    add_dwconv(out, pre + ".ss2d.conv", st.ss2d.conv);
    for (std::size_t k = 0; k < 3; ++k) add_s6(out, pre + ".ss2d.scan" + std::to_string(k), st.ss2d.scans[k]);
    add_linear(out, pre + ".ss2d.out_proj", st.ss2d.out_proj);
    if (st.mlp) {
      add_norm(out, pre + ".mlp.norm", st.mlp->norm);
      add_linear(out, pre + ".mlp.fc1", st.mlp->fc1);
      add_linear(out, pre + ".mlp.fc2", st.mlp->fc2);
    }
    if (st.gci) {
      add_linear(out, pre + ".gci.pre_proj", st.gci->pre_proj);
      add_dwconv(out, pre + ".gci.conv", st.gci->conv);
      add_s6(out, pre + ".gci.scan_fwd", st.gci->scan_fwd);
      add_s6(out, pre + ".gci.scan_bwd", st.gci->scan_bwd);
      add_linear(out, pre + ".gci.mix", st.gci->mix);
      add_linear(out, pre + ".gci.out_proj", st.gci->out_proj);
    }
    ConvLstmParams& l = st.lstm;
    if (l.kind == LstmKind::kSeparable) {
      add_dwconv(out, pre + ".lstm.dw_x", l.dw_x);
      add_dwconv(out, pre + ".lstm.dw_h", l.dw_h);
      add_linear(out, pre + ".lstm.pointwise", l.pointwise);
    } else {
      out.push_back({pre + ".lstm.conv_x.weight", &l.conv_x.weight, {l.conv_x.out, l.conv_x.in, 3, 3}});
      out.push_back({pre + ".lstm.conv_h.weight", &l.conv_h.weight, {l.conv_h.out, l.conv_h.in, 3, 3}});
      out.push_back({pre + ".lstm.bias", &l.bias, {4 * l.channels}});
    }
  }
  return out;
}

BackboneState initial_state(const BackboneConfig& cfg) {
  BackboneState st;
  for (std::size_t s = 0; s < kStages; ++s) {
    st[s].h = FeatureMap(cfg.channels[s], cfg.grid_rows(s), cfg.grid_cols(s));
    st[s].c = FeatureMap(cfg.channels[s], cfg.grid_rows(s), cfg.grid_cols(s));
  }
  return st;
}

Frame make_frame(const EventStream& stream, const BackboneConfig& cfg, const StcaConfig& stca) {
  if (stream.height != cfg.height || stream.width != cfg.width)
    throw ShapeError("event stream geometry does not match the backbone configuration");
  if (stca.patch != cfg.patch) throw ConfigError("STCA patch size must equal the embedding patch size");
  Frame f;
  f.voxels = build_voxel_grid(stream, cfg.bins);
  StcaResult r = run_stca(stream, stca);
  f.keep = std::move(r.map);
  f.scores = std::move(r.scores);
  return f;
}

FeatureMap patch_embed(const VoxelGrid& v, std::size_t patch, const Linear& proj, const FlopScope& flops) {
  if (patch == 0 || v.height % patch != 0 || v.width % patch != 0)
    throw ConfigError("patch size does not divide the voxel grid");
  const std::size_t in = v.channels() * patch * patch;
  if (proj.in != in) throw ShapeError("patch embedding expects " + std::to_string(proj.in) + " inputs per patch");
  const std::size_t R = v.height / patch, W = v.width / patch;
  std::vector<double> patches(R * W * in);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < W; ++c) {
      double* dst = patches.data() + (r * W + c) * in;
      for (std::size_t ch = 0; ch < v.channels(); ++ch)
        for (std::size_t dy = 0; dy < patch; ++dy)
          for (std::size_t dx = 0; dx < patch; ++dx)
            dst[(ch * patch + dy) * patch + dx] = v.at(ch, r * patch + dy, c * patch + dx);
    }
  FeatureMap out(proj.out, R, W);
  out.data() = proj.apply(patches, R * W, flops);
  return out;
}

Ss2dOrders ss2d_orders(const TokenSet& ts, const TokenScoreMap& scores, std::size_t window) {
  auto [fwd, bwd] = bidi_orders(ts);
  return {std::move(fwd), std::move(bwd), ipl_order(ts, scores, IplConfig{window})};
}

namespace {

void check_grid(const FeatureMap& x, std::size_t rows, std::size_t cols, const char* what) {
  if (x.height() != rows || x.width() != cols)
    throw ShapeError(std::string(what) + " grid " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " does not match features " + std::to_string(x.height()) + "x" + std::to_string(x.width()));
}

// Shared core of the selective-scan block, on n tokens in row-major order.
// `conv` runs the depthwise convolution over whichever layout the caller has.
template <typename ConvFn>
std::vector<double> ss2d_core(std::span<const double> tokens, std::size_t n, const Ss2dOrders& orders,
                              const Ss2dParams& p, ConvFn&& conv, const FlopScope& flops) {
  const std::size_t E = p.inner();
  const auto xn = p.norm.apply(tokens, n, flops);
  const auto uz = p.in_proj.apply(xn, n, flops);
  std::vector<double> u(n * E), z(n * E);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t e = 0; e < E; ++e) {
      u[i * E + e] = uz[i * 2 * E + e];
      z[i * E + e] = uz[i * 2 * E + E + e];
    }
  u = conv(u);
  for (auto& v : u) v = silu(v);
  flops.add(flop_cost::elementwise(n * E));

  std::vector<double> merged(n * E, 0.0);
  const std::array<const Permutation*, 3> perms{&orders.forward, &orders.backward, &orders.ipl};
  std::vector<double> seq(n * E);
  for (std::size_t s = 0; s < 3; ++s) {
    const Permutation& perm = *perms[s];
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(u.data() + perm[i] * E, E, seq.data() + i * E);
    const auto y = s6_forward(seq, n, p.scans[s], flops);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t e = 0; e < E; ++e) merged[perm[i] * E + e] += y[i * E + e];
  }
  flops.add(flop_cost::elementwise(2 * n * E));

  for (std::size_t i = 0; i < n * E; ++i) merged[i] *= silu(z[i]);
  flops.add(flop_cost::elementwise(2 * n * E));
  auto out = p.out_proj.apply(merged, n, flops);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += tokens[i];
  flops.add(flop_cost::elementwise(out.size()));
  return out;
}

}  // namespace

FeatureMap sparse_ss2d(const FeatureMap& x, const SparsificationMap& keep, const TokenScoreMap& scores,
                       const Ss2dParams& p, const FlopScope& flops) {
  check_grid(x, keep.rows(), keep.cols(), "sparsification map");
  check_grid(x, scores.values.rows(), scores.values.cols(), "score map");
  if (p.norm.channels != x.channels()) throw ShapeError("SS2D channel count mismatch");
  TokenSet ts = gather_tokens(x, keep);
  const std::size_t n = ts.size();
  if (n == 0) return x;
  const Ss2dOrders orders = ss2d_orders(ts, scores, p.window);
  const Grid<std::ptrdiff_t> index = kept_index_grid(ts);
  ts.values = ss2d_core(ts.values, n, orders, p,
                        [&](const std::vector<double>& u) { return p.conv.apply_sparse(u, index, ts.coords, flops); },
                        flops);
  return scatter_tokens(ts, x);
}

FeatureMap dense_ss2d(const FeatureMap& x, const TokenScoreMap& scores, const Ss2dParams& p,
                      const FlopScope& flops) {
  check_grid(x, scores.values.rows(), scores.values.cols(), "score map");
  if (p.norm.channels != x.channels()) throw ShapeError("SS2D channel count mismatch");
  const std::size_t n = x.tokens();
  // Orders over the full grid: raster, reversed raster, IPL without removal.
  TokenSet grid;
  grid.grid_rows = x.height();
  grid.grid_cols = x.width();
  for (std::size_t r = 0; r < x.height(); ++r)
    for (std::size_t c = 0; c < x.width(); ++c) grid.coords.push_back({r, c});
  Ss2dOrders orders;
  orders.forward.resize(n);
  std::iota(orders.forward.begin(), orders.forward.end(), std::size_t{0});
  orders.backward.assign(orders.forward.rbegin(), orders.forward.rend());
  orders.ipl = ipl_order(grid, scores, IplConfig{p.window});

  FeatureMap out(x.channels(), x.height(), x.width());
  out.data() = ss2d_core(x.data(), n, orders, p,
                         [&](const std::vector<double>& u) { return p.conv.apply(u, x.height(), x.width(), flops); },
                         flops);
  return out;
}

namespace {

std::vector<double> mlp_core(std::span<const double> tokens, std::size_t n, const MlpParams& p,
                             const FlopScope& flops) {
  const auto xn = p.norm.apply(tokens, n, flops);
  auto hidden = p.fc1.apply(xn, n, flops);
  for (auto& v : hidden) v = gelu(v);
  flops.add(flop_cost::elementwise(hidden.size()));
  auto out = p.fc2.apply(hidden, n, flops);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += tokens[i];
  flops.add(flop_cost::elementwise(out.size()));
  return out;
}

}  // namespace

FeatureMap sparse_mlp(const FeatureMap& x, const SparsificationMap& keep, const MlpParams& p,
                      const FlopScope& flops) {
  check_grid(x, keep.rows(), keep.cols(), "sparsification map");
  if (p.norm.channels != x.channels()) throw ShapeError("MLP channel count mismatch");
  TokenSet ts = gather_tokens(x, keep);
  if (ts.size() == 0) return x;
  ts.values = mlp_core(ts.values, ts.size(), p, flops);
  return scatter_tokens(ts, x);
}

FeatureMap dense_mlp(const FeatureMap& x, const MlpParams& p, const FlopScope& flops) {
  if (p.norm.channels != x.channels()) throw ShapeError("MLP channel count mismatch");
  FeatureMap out(x.channels(), x.height(), x.width());
  out.data() = mlp_core(x.data(), x.tokens(), p, flops);
  return out;
}

FeatureMap bidi_channel_scan(const FeatureMap& x, const S6Params& fwd, const S6Params& bwd, const FlopScope& flops) {
  const std::size_t C = x.channels(), M = x.tokens();
  if (fwd.lanes != M || bwd.lanes != M)
    throw ShapeError("channel scan is configured for " + std::to_string(fwd.lanes) + " spatial lanes, got " +
                     std::to_string(M));
  std::vector<double> seq(C * M), flipped(C * M);
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t c = 0; c < C; ++c) {
      seq[c * M + m] = x.token(m)[c];
      flipped[(C - 1 - c) * M + m] = x.token(m)[c];
    }
  const auto yf = s6_forward(seq, C, fwd, flops);
  const auto yb = s6_forward(flipped, C, bwd, flops);
  FeatureMap out(C, x.height(), x.width());
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t c = 0; c < C; ++c) out.token(m)[c] = yf[c * M + m] + yb[(C - 1 - c) * M + m];
  flops.add(flop_cost::elementwise(C * M));
  return out;
}

FeatureMap gci_forward(const FeatureMap& x, const GciParams& p, const FlopScope& flops) {
  check_grid(x, p.rows, p.cols, "channel interaction");
  const std::size_t C = x.channels(), M = x.tokens();
  if (p.pre_proj.in != C) throw ShapeError("channel interaction channel count mismatch");

  FeatureMap a(C, x.height(), x.width());
  a.data() = p.pre_proj.apply(x.data(), M, flops);
  a.data() = p.conv.apply(a.data(), x.height(), x.width(), flops);
  for (auto& v : a.data()) v = silu(v);
  flops.add(flop_cost::elementwise(C * M));

  FeatureMap branch = bidi_channel_scan(a, p.scan_fwd, p.scan_bwd, flops);
  const auto local = p.mix.apply(x.data(), M, flops);
  for (std::size_t i = 0; i < local.size(); ++i) branch.data()[i] += local[i];
  flops.add(flop_cost::elementwise(C * M));

  const auto proj = p.out_proj.apply(branch.data(), M, flops);
  FeatureMap out = x;
  for (std::size_t i = 0; i < proj.size(); ++i) out.data()[i] += proj[i];
  flops.add(flop_cost::elementwise(C * M));
  return out;
}

std::pair<FeatureMap, LstmState> convlstm_step(const FeatureMap& x, const LstmState& s, const ConvLstmParams& p,
                                               const FlopScope& flops) {
  const std::size_t C = p.channels;
  if (x.channels() != C || !x.same_shape(s.h) || !x.same_shape(s.c)) throw ShapeError("ConvLSTM shape mismatch");
  const std::size_t R = x.height(), W = x.width(), M = x.tokens();

  std::vector<double> gates;
  if (p.kind == LstmKind::kSeparable) {
    const auto ax = p.dw_x.apply(x.data(), R, W, flops);
    const auto ah = p.dw_h.apply(s.h.data(), R, W, flops);
    std::vector<double> cat(M * 2 * C);
    for (std::size_t m = 0; m < M; ++m) {
      std::copy_n(ax.data() + m * C, C, cat.data() + m * 2 * C);
      std::copy_n(ah.data() + m * C, C, cat.data() + m * 2 * C + C);
    }
    gates = p.pointwise.apply(cat, M, flops);
  } else {
    gates = p.conv_x.apply(x.data(), R, W, flops);
    const auto gh = p.conv_h.apply(s.h.data(), R, W, flops);
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t k = 0; k < 4 * C; ++k) gates[m * 4 * C + k] += gh[m * 4 * C + k] + p.bias[k];
    flops.add(flop_cost::elementwise(2 * M * 4 * C));
  }

  LstmState next{FeatureMap(C, R, W), FeatureMap(C, R, W)};
  for (std::size_t m = 0; m < M; ++m) {
    const double* g = gates.data() + m * 4 * C;
    for (std::size_t c = 0; c < C; ++c) {
      const double i = sigmoid(g[c]);
      const double f = sigmoid(g[C + c]);
      const double o = sigmoid(g[2 * C + c]);
      const double cand = std::tanh(g[3 * C + c]);
      const double cell = f * s.c.token(m)[c] + i * cand;
      next.c.token(m)[c] = cell;
      next.h.token(m)[c] = o * std::tanh(cell);
    }
  }
  flops.add(flop_cost::elementwise(9 * M * C));
  FeatureMap h = next.h;
  return {std::move(h), std::move(next)};
}

FeatureMap downsample_features(const FeatureMap& x, const Linear& proj, const FlopScope& flops) {
  const std::size_t C = x.channels();
  if (x.height() % 2 != 0 || x.width() % 2 != 0) throw ShapeError("downsampling needs an even grid");
  if (proj.in != 4 * C) throw ShapeError("downsample projection expects " + std::to_string(proj.in / 4) + " channels");
  const std::size_t R = x.height() / 2, W = x.width() / 2;
  std::vector<double> blocks(R * W * 4 * C);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < W; ++c) {
      double* dst = blocks.data() + (r * W + c) * 4 * C;
      std::size_t k = 0;
      for (std::size_t dy = 0; dy < 2; ++dy)
        for (std::size_t dx = 0; dx < 2; ++dx, ++k) {
          const auto tok = x.token((2 * r + dy) * x.width() + 2 * c + dx);
          std::copy(tok.begin(), tok.end(), dst + k * C);
        }
    }
  FeatureMap out(proj.out, R, W);
  out.data() = proj.apply(blocks, R * W, flops);
  return out;
}

namespace {

void check_frame(const Frame& f, const BackboneConfig& cfg) {
  if (f.voxels.bins != cfg.bins || f.voxels.height != cfg.height || f.voxels.width != cfg.width)
    throw ShapeError("voxel grid does not match the backbone configuration");
  if (f.keep.rows() != cfg.grid_rows(0) || f.keep.cols() != cfg.grid_cols(0))
    throw ShapeError("sparsification map must be at patch resolution");
  if (f.scores.values.rows() != cfg.grid_rows(0) || f.scores.values.cols() != cfg.grid_cols(0))
    throw ShapeError("score map must be at patch resolution");
}

void check_states(const BackboneState& st, const BackboneConfig& cfg) {
  for (std::size_t s = 0; s < kStages; ++s)
    if (st[s].h.channels() != cfg.channels[s] || st[s].h.height() != cfg.grid_rows(s) ||
        st[s].h.width() != cfg.grid_cols(s) || !st[s].h.same_shape(st[s].c))
      throw ShapeError("ConvLSTM state of stage " + std::to_string(s + 1) + " does not match the configuration");
}

FlopScope scope_for(FlopCounter* counter, std::size_t stage, const char* block) {
  if (!counter) return {};
  return {counter, "stage" + std::to_string(stage + 1) + "." + block};
}

template <bool kSparse>
BackboneOutput forward_impl(std::span<const Frame> frames, const BackboneParams& params, BackboneState& states,
                            FlopCounter* counter) {
  const BackboneConfig& cfg = params.cfg;
  cfg.validate();
  check_states(states, cfg);
  BackboneOutput result;
  result.features.reserve(frames.size());
  for (const Frame& frame : frames) {
    check_frame(frame, cfg);
    std::array<FeatureMap, kStages> out;
    FeatureMap x = patch_embed(frame.voxels, cfg.patch, params.patch_embed, scope_for(counter, 0, "patch_embed"));
    SparsificationMap keep = frame.keep;
    TokenScoreMap scores = frame.scores;
    for (std::size_t s = 0; s < kStages; ++s) {
      const StageParams& st = params.stages[s];
      if (s > 0) {
        x = downsample_features(out[s - 1], *st.downsample, scope_for(counter, s, "downsample"));
        keep = downsample_map(keep, 2);
        scores = downsample_scores(scores, 2);
      }
      if constexpr (kSparse)
        x = sparse_ss2d(x, keep, scores, st.ss2d, scope_for(counter, s, "ss2d"));
      else
        x = dense_ss2d(x, scores, st.ss2d, scope_for(counter, s, "ss2d"));
      if (st.gci) {
        x = gci_forward(x, *st.gci, scope_for(counter, s, "gci"));
      } else if constexpr (kSparse) {
        x = sparse_mlp(x, keep, *st.mlp, scope_for(counter, s, "mlp"));
      } else {
        x = dense_mlp(x, *st.mlp, scope_for(counter, s, "mlp"));
      }
      auto [h, next] = convlstm_step(x, states[s], st.lstm, scope_for(counter, s, "convlstm"));
      states[s] = std::move(next);
      out[s] = std::move(h);
    }
    result.features.push_back(std::move(out));
  }
  return result;
}

}  // namespace

BackboneOutput backbone_forward(std::span<const Frame> frames, const BackboneParams& params, BackboneState& states,
                                FlopCounter* counter) {
  return forward_impl<true>(frames, params, states, counter);
}

BackboneOutput backbone_forward_dense(std::span<const Frame> frames, const BackboneParams& params,
                                      BackboneState& states, FlopCounter* counter) {
  return forward_impl<false>(frames, params, states, counter);
}

}  // namespace sscan
