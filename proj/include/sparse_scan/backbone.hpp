#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sparse_scan/event_io.hpp"
#include "sparse_scan/flops.hpp"
#include "sparse_scan/layers.hpp"
#include "sparse_scan/s6.hpp"
#include "sparse_scan/scan_order.hpp"
#include "sparse_scan/stca.hpp"
#include "sparse_scan/token_sparsify.hpp"

namespace sscan {

constexpr std::size_t kStages = 4;

enum class LstmKind {
  kSeparable,  // depthwise 3x3 on x and h, then a pointwise gate projection
  kFull,       // dense 3x3 convolutions on x and h
};

struct BackboneConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t bins = 10;
  std::size_t patch = 4;
  std::array<std::size_t, kStages> channels{32, 64, 128, 256};
  std::array<std::size_t, kStages> ipl_window{2, 2, 2, 2};
  // Stages with global channel interaction use it in place of the MLP.
  std::array<bool, kStages> gci{false, false, true, true};
  std::size_t state_dim = 16;
  std::size_t ss2d_expand = 2;
  std::size_t mlp_ratio = 4;
  LstmKind lstm = LstmKind::kSeparable;

  std::size_t grid_rows(std::size_t stage) const { return (height / patch) >> stage; }
  std::size_t grid_cols(std::size_t stage) const { return (width / patch) >> stage; }
  void validate() const;
};

struct Ss2dParams {
  LayerNorm norm;
  Linear in_proj;  // C -> 2E (scan branch, gate branch)
  DepthwiseConv conv;
  std::array<S6Params, 3> scans;  // bidi forward, bidi backward, IPL
  Linear out_proj;                // E -> C
  std::size_t window = 2;

  std::size_t inner() const { return out_proj.in; }
  static Ss2dParams random(std::size_t channels, std::size_t inner, std::size_t state, std::size_t window,
                           std::mt19937_64& rng);
};

struct MlpParams {
  LayerNorm norm;
  Linear fc1;
  Linear fc2;
  static MlpParams random(std::size_t channels, std::size_t ratio, std::mt19937_64& rng);
};

struct GciParams {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Linear pre_proj;
  DepthwiseConv conv;
  S6Params scan_fwd;  // lanes = rows * cols, scanned over channels
  S6Params scan_bwd;
  Linear mix;  // 1x1 channel mixing
  Linear out_proj;
  static GciParams random(std::size_t channels, std::size_t rows, std::size_t cols, std::size_t state,
                          std::mt19937_64& rng);
};

struct ConvLstmParams {
  LstmKind kind = LstmKind::kSeparable;
  std::size_t channels = 0;
  // kSeparable
  DepthwiseConv dw_x;
  DepthwiseConv dw_h;
  Linear pointwise;  // 2C -> 4C, gate order i, f, o, g
  // kFull
  Conv3x3 conv_x;
  Conv3x3 conv_h;
  std::vector<double> bias;  // 4C

  static ConvLstmParams zeros(std::size_t channels, LstmKind kind);
  static ConvLstmParams random(std::size_t channels, LstmKind kind, std::mt19937_64& rng);
  // Bias of gate `gate` (0=i, 1=f, 2=o, 3=g) for channel `c`.
  double& gate_bias(std::size_t gate, std::size_t c);
};

struct StageParams {
  std::optional<Linear> downsample;  // stages 2..4: 2x2 stride-2 projection
  Ss2dParams ss2d;
  std::optional<MlpParams> mlp;
  std::optional<GciParams> gci;
  ConvLstmParams lstm;
};

struct BackboneParams {
  BackboneConfig cfg;
  Linear patch_embed;
  std::array<StageParams, kStages> stages;

  static BackboneParams random(const BackboneConfig& cfg, std::uint64_t seed);
};

struct TensorRef {
  std::string name;
  std::vector<double>* data = nullptr;
  std::vector<std::size_t> shape;
};
std::vector<TensorRef> named_tensors(BackboneParams& params);

struct LstmState {
  FeatureMap h;
  FeatureMap c;
};
using BackboneState = std::array<LstmState, kStages>;
BackboneState initial_state(const BackboneConfig& cfg);

// One event window: voxelized input plus its token-resolution keep map and
// scan priorities.
struct Frame {
  VoxelGrid voxels;
  SparsificationMap keep;
  TokenScoreMap scores;
};

struct BackboneOutput {
  std::vector<std::array<FeatureMap, kStages>> features;  // [timestep][stage]
};

// Voxelizes a window and runs STCA at the configured patch size.
Frame make_frame(const EventStream& stream, const BackboneConfig& cfg, const StcaConfig& stca);

FeatureMap patch_embed(const VoxelGrid& v, std::size_t patch, const Linear& proj, const FlopScope& flops = {});

struct Ss2dOrders {
  Permutation forward;
  Permutation backward;
  Permutation ipl;
};
Ss2dOrders ss2d_orders(const TokenSet& tokens, const TokenScoreMap& scores, std::size_t window);

FeatureMap sparse_ss2d(const FeatureMap& x, const SparsificationMap& keep, const TokenScoreMap& scores,
                       const Ss2dParams& p, const FlopScope& flops = {});
FeatureMap dense_ss2d(const FeatureMap& x, const TokenScoreMap& scores, const Ss2dParams& p,
                      const FlopScope& flops = {});

FeatureMap sparse_mlp(const FeatureMap& x, const SparsificationMap& keep, const MlpParams& p,
                      const FlopScope& flops = {});
FeatureMap dense_mlp(const FeatureMap& x, const MlpParams& p, const FlopScope& flops = {});

// Channel-axis selective scan: the sequence has one element per channel, each
// the flattened spatial map of that channel.
FeatureMap bidi_channel_scan(const FeatureMap& x, const S6Params& fwd, const S6Params& bwd,
                             const FlopScope& flops = {});
FeatureMap gci_forward(const FeatureMap& x, const GciParams& p, const FlopScope& flops = {});

std::pair<FeatureMap, LstmState> convlstm_step(const FeatureMap& x, const LstmState& s, const ConvLstmParams& p,
                                               const FlopScope& flops = {});

FeatureMap downsample_features(const FeatureMap& x, const Linear& proj, const FlopScope& flops = {});

// ConvLSTM state in `states` is carried across the frames and updated in
// place. `counter` may be null.
BackboneOutput backbone_forward(std::span<const Frame> frames, const BackboneParams& params, BackboneState& states,
                                FlopCounter* counter = nullptr);

// Reference assembly that never gathers: every block runs on the full grid.
BackboneOutput backbone_forward_dense(std::span<const Frame> frames, const BackboneParams& params,
                                      BackboneState& states, FlopCounter* counter = nullptr);

// Checkpoint: flat little-endian float64 file plus "<path>.json" manifest.
void save_checkpoint(BackboneParams& params, const std::string& path);
BackboneParams load_checkpoint(const std::string& path);

}  // namespace sscan
