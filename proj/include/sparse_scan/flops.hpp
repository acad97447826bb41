#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace sscan {

// FLOP convention: one multiply-accumulate is 2 FLOPs, bias adds, residual
// adds and nonlinearities are 1 FLOP per element. Kernels and the analytic
// model below share these unit costs so counts are directly comparable.
namespace flop_cost {

constexpr std::uint64_t linear(std::uint64_t n, std::uint64_t in, std::uint64_t out, bool bias = true) {
  return n * out * (2 * in + (bias ? 1 : 0));
}
constexpr std::uint64_t layer_norm(std::uint64_t n, std::uint64_t c) { return 8 * n * c; }
// 3x3 taps are counted for every output position regardless of padding.
constexpr std::uint64_t depthwise3x3(std::uint64_t n, std::uint64_t c, bool bias = true) {
  return n * c * (2 * 9 + (bias ? 1 : 0));
}
constexpr std::uint64_t conv3x3(std::uint64_t n, std::uint64_t in, std::uint64_t out) { return n * out * 2 * 9 * in; }
constexpr std::uint64_t elementwise(std::uint64_t n) { return n; }

// One S6 pass over `steps` inputs of `lanes` channels with `state` states.
constexpr std::uint64_t s6_parameterize(std::uint64_t steps, std::uint64_t lanes, std::uint64_t state) {
  return linear(steps, lanes, lanes)              // delta projection
         + elementwise(steps * lanes)             // softplus
         + 2 * linear(steps, lanes, state, false) // B and C projections
         + 6 * steps * lanes * state;             // exact ZOH + input fold
}
constexpr std::uint64_t s6_scan(std::uint64_t steps, std::uint64_t lanes, std::uint64_t state) {
  return 4 * steps * lanes * state  // state update and readout
         + 2 * steps * lanes;       // skip term
}
constexpr std::uint64_t s6(std::uint64_t steps, std::uint64_t lanes, std::uint64_t state) {
  return s6_parameterize(steps, lanes, state) + s6_scan(steps, lanes, state);
}

}  // namespace flop_cost

// Per-run FLOP accumulator keyed by "stage<k>.<block>".
class FlopCounter {
 public:
  void add(const std::string& key, std::uint64_t flops) { counts_[key] += flops; }
  std::uint64_t get(const std::string& key) const {
    auto it = counts_.find(key);
    return it == counts_.end() ? 0 : it->second;
  }
  std::uint64_t total() const;
  const std::map<std::string, std::uint64_t>& counts() const { return counts_; }
  void merge(const FlopCounter& other);
  void clear() { counts_.clear(); }

 private:
  std::map<std::string, std::uint64_t> counts_;
};

// Counter handle passed into kernels; a null counter disables accounting.
struct FlopScope {
  FlopCounter* counter = nullptr;
  std::string key;
  void add(std::uint64_t flops) const {
    if (counter) counter->add(key, flops);
  }
};

struct BlockFlops {
  std::string name;  // "stage<k>.<block>"
  std::uint64_t dense = 0;
  std::uint64_t sparse = 0;
  double kept_ratio = 1.0;
  bool token_wise = false;
};

struct FlopsReport {
  std::vector<BlockFlops> blocks;

  std::uint64_t dense_total() const;
  std::uint64_t sparse_total() const;
  std::uint64_t token_wise_dense() const;
  std::uint64_t token_wise_sparse() const;
  // 1 - sparse/dense, as a fraction.
  double reduction() const;

  nlohmann::json to_json() const;
  std::string to_table() const;
};

// True for blocks whose cost scales with the kept-token count.
bool is_token_wise_block(const std::string& block);

FlopsReport make_report(const FlopCounter& dense, const FlopCounter& sparse, const std::array<double, 4>& kept_ratios);

}  // namespace sscan
