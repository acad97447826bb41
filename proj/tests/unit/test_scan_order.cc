#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracle.hpp"
#include "sparse_scan/scan_order.hpp"

using namespace sscan;

namespace {

TokenSet tokens_for(const SparsificationMap& d) { return gather_tokens(FeatureMap(1, d.rows(), d.cols()), d); }

std::vector<Coord> coords_of(const TokenSet& ts, const Permutation& p) {
  std::vector<Coord> out;
  for (auto i : p) out.push_back(ts.coords[i]);
  return out;
}

TokenScoreMap example_scores() {
  TokenScoreMap s{Grid<double>(4, 4)};
  const double v[] = {5, 1, 0, 0, 2, 3, 0, 1, 0, 0, 9, 8, 0, 0, 7, 6};
  std::copy(std::begin(v), std::end(v), s.values.data().begin());
  return s;
}

}  // namespace

TEST_CASE("bidi orders") {
  const TokenSet ts = tokens_for(all_kept(2, 2));
  auto [f, b] = bidi_orders(ts);
  CHECK(f == Permutation{0, 1, 2, 3});
  CHECK(b == Permutation{3, 2, 1, 0});
  auto [f1, b1] = bidi_orders(tokens_for(all_kept(1, 1)));
  CHECK(f1 == Permutation{0});
  CHECK(b1 == Permutation{0});

  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const TokenSet r = tokens_for(oracle::random_keep(6, 7, 0.4, rng));
    auto [rf, rb] = bidi_orders(r);
    REQUIRE(rf.size() == r.size());
    for (std::size_t k = 0; k < rf.size(); ++k) CHECK(rb[k] == rf[rf.size() - 1 - k]);
  }
}

TEST_CASE("cross orders") {
  const TokenSet ts = tokens_for(all_kept(2, 2));
  const auto c = cross_orders(ts);
  CHECK(coords_of(ts, c[2]) == std::vector<Coord>{{0, 0}, {1, 0}, {0, 1}, {1, 1}});
  CHECK(c[3] == Permutation{3, 1, 2, 0});
  const auto line = cross_orders(tokens_for(all_kept(1, 6)));
  CHECK(line[0] == line[2]);

  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    const TokenSet r = tokens_for(oracle::random_keep(5, 8, 0.5, rng));
    for (const auto& p : cross_orders(r)) {
      CHECK(p.size() == r.size());
      CHECK(is_permutation_of_iota(p));
    }
  }
}

TEST_CASE("IPL order on the worked 4x4 example") {
  const TokenSet ts = tokens_for(all_kept(4, 4));
  const Permutation p = ipl_order(ts, example_scores(), {2});
  const std::vector<Coord> expect = {{2, 2}, {2, 3}, {3, 2}, {3, 3}, {0, 0}, {0, 1}, {1, 0}, {1, 1},
                                     {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 0}, {2, 1}, {3, 0}, {3, 1}};
  CHECK(coords_of(ts, p) == expect);
  CHECK(p == oracle::ipl(ts, example_scores().values, 2));

  SparsificationMap d = all_kept(4, 4);
  d.keep(0, 1) = 0;
  const TokenSet partial = tokens_for(d);
  auto without = expect;
  without.erase(std::find(without.begin(), without.end(), Coord{0, 1}));
  CHECK(coords_of(partial, ipl_order(partial, example_scores(), {2})) == without);
}

TEST_CASE("IPL order with uniform scores is row-major by window") {
  const TokenSet ts = tokens_for(all_kept(4, 4));
  TokenScoreMap s{Grid<double>(4, 4, 0.5)};
  const auto got = coords_of(ts, ipl_order(ts, s, {2}));
  const std::vector<Coord> expect = {{0, 0}, {0, 1}, {1, 0}, {1, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3},
                                     {2, 0}, {2, 1}, {3, 0}, {3, 1}, {2, 2}, {2, 3}, {3, 2}, {3, 3}};
  CHECK(got == expect);
}

TEST_CASE("IPL with one window equals row-major") {
  std::mt19937_64 rng(3);
  const TokenSet ts = tokens_for(oracle::random_keep(4, 4, 0.6, rng));
  TokenScoreMap s{oracle::random_grid(4, 4, rng)};
  CHECK(ipl_order(ts, s, {4}) == bidi_orders(ts).first);
}

TEST_CASE("IPL matches the selection-sort oracle") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const std::size_t k = 1 + i % 3;
    const std::size_t rows = k * (1 + i % 4), cols = k * (1 + (i / 4) % 4);
    const TokenSet ts = tokens_for(oracle::random_keep(rows, cols, 0.5, rng));
    TokenScoreMap s{oracle::random_grid(rows, cols, rng)};
    // coarse values so equal window maxima occur
    for (auto& v : s.values.data()) v = std::floor(v * 4.0);
    CHECK(ipl_order(ts, s, {k}) == oracle::ipl(ts, s.values, k));
  }
}

TEST_CASE("IPL rejects bad geometry") {
  const TokenSet ts = tokens_for(all_kept(4, 6));
  CHECK_THROWS_AS(ipl_order(ts, TokenScoreMap{Grid<double>(4, 6)}, {4}), ShapeError);
  CHECK_THROWS_AS(ipl_order(ts, TokenScoreMap{Grid<double>(4, 4)}, {2}), ShapeError);
  CHECK_THROWS_AS(ipl_order(ts, TokenScoreMap{Grid<double>(4, 6)}, {0}), ShapeError);
}

TEST_CASE("invert") {
  CHECK(invert({2, 0, 1}) == Permutation{1, 2, 0});
  CHECK(invert({0, 1, 2, 3}) == Permutation{0, 1, 2, 3});
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    Permutation p(1 + i % 17);
    std::iota(p.begin(), p.end(), std::size_t{0});
    std::shuffle(p.begin(), p.end(), rng);
    const Permutation q = invert(p);
    for (std::size_t j = 0; j < p.size(); ++j) REQUIRE(q[p[j]] == j);
    REQUIRE(invert(q) == p);
  }
  CHECK(!is_permutation_of_iota({0, 0, 1}));
  CHECK(!is_permutation_of_iota({0, 3}));
}
