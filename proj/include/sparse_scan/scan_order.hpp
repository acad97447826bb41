#pragma once

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include "sparse_scan/stca.hpp"
#include "sparse_scan/token_sparsify.hpp"

namespace sscan {

// order[i] is the TokenSet index visited at sequence position i.
using Permutation = std::vector<std::size_t>;

struct IplConfig {
  std::size_t window = 2;
};

std::pair<Permutation, Permutation> bidi_orders(const TokenSet& tokens);

// Row-major forward, row-major backward, column-major forward, column-major
// backward.
std::array<Permutation, 4> cross_orders(const TokenSet& tokens);

// Information-prioritized local scan: k x k windows visited by descending
// window-max score (ties by ascending window index), row-major inside each
// window. Windows are ranked on the full score map; discarded tokens are then
// dropped from the sequence.
Permutation ipl_order(const TokenSet& tokens, const TokenScoreMap& scores, const IplConfig& cfg);

Permutation invert(const Permutation& p);

bool is_permutation_of_iota(const Permutation& p);

}  // namespace sscan
