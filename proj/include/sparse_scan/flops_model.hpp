#pragma once

#include <array>

#include "sparse_scan/backbone.hpp"
#include "sparse_scan/flops.hpp"

namespace sscan {

// Closed-form FLOPs of one backbone timestep. Token-wise blocks scale with
// round(ratio * tokens) per stage; every other block is ratio-independent.
FlopsReport count_analytic(const BackboneConfig& cfg, const std::array<double, kStages>& kept_ratios);

// Kept ratio at each stage when D is max-pooled by 2 between stages.
std::array<double, kStages> stage_kept_ratios(const SparsificationMap& keep);

// Instrumented single-timestep runs from a zero state: once with the frame's
// keep map (sparse) and once with every token kept (dense).
FlopsReport measure(const BackboneParams& params, const Frame& frame);

}  // namespace sscan
