#include <doctest.h>

#include <cmath>
#include <random>

#include "oracle.hpp"
#include "sparse_scan/token_sparsify.hpp"

using namespace sscan;

namespace {

FeatureMap random_features(std::size_t c, std::size_t h, std::size_t w, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  FeatureMap x(c, h, w);
  for (auto& v : x.data()) v = n(rng);
  return x;
}

}  // namespace

TEST_CASE("gather picks kept tokens in row-major order") {
  FeatureMap x(1, 2, 2);
  x.at(0, 0, 0) = 1.5;  // a
  x.at(0, 0, 1) = 2.5;  // b
  x.at(0, 1, 0) = 3.5;  // c
  x.at(0, 1, 1) = 4.5;  // d
  SparsificationMap d{Grid<std::uint8_t>(2, 2)};
  d.keep(0, 0) = d.keep(1, 1) = 1;
  const TokenSet ts = gather_tokens(x, d);
  REQUIRE(ts.size() == 2);
  CHECK(ts.values == std::vector<double>{1.5, 4.5});
  CHECK(ts.coords[0] == Coord{0, 0});
  CHECK(ts.coords[1] == Coord{1, 1});
  CHECK(kept_ratio(d) == 0.5);
}

TEST_CASE("gather with all-ones and all-zeros maps") {
  std::mt19937_64 rng(1);
  const FeatureMap x = random_features(3, 4, 5, rng);
  const TokenSet all = gather_tokens(x, all_kept(4, 5));
  REQUIRE(all.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) CHECK(all.coords[i] == Coord{i / 5, i % 5});
  CHECK(all.values == x.data());
  CHECK(kept_ratio(all_kept(4, 5)) == 1.0);

  const TokenSet none = gather_tokens(x, SparsificationMap{Grid<std::uint8_t>(4, 5)});
  CHECK(none.size() == 0);
  CHECK(scatter_tokens(none, x) == x);
  CHECK_THROWS_AS(gather_tokens(x, all_kept(5, 4)), ShapeError);
}

TEST_CASE("scatter passes discarded positions through bit for bit") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const FeatureMap x = random_features(1 + trial % 4, 1 + trial % 7, 1 + trial % 5, rng);
    const auto d = oracle::random_keep(x.height(), x.width(), 0.3, rng);
    CHECK(scatter_tokens(gather_tokens(x, d), x) == x);

    TokenSet ts = gather_tokens(x, d);
    CHECK(ts.size() == kept_count(d));
    for (std::size_t i = 1; i < ts.size(); ++i) {
      const auto& a = ts.coords[i - 1];
      const auto& b = ts.coords[i];
      CHECK((a.row < b.row || (a.row == b.row && a.col < b.col)));
    }
    for (auto& v : ts.values) v = v * 3.0 + 1.0;
    const FeatureMap base = random_features(x.channels(), x.height(), x.width(), rng);
    const FeatureMap out = scatter_tokens(ts, base);
    std::size_t k = 0;
    for (std::size_t t = 0; t < x.tokens(); ++t) {
      const bool kept = d.keep[t] != 0;
      for (std::size_t c = 0; c < x.channels(); ++c) {
        if (kept)
          CHECK(out.token(t)[c] == ts.values[k * x.channels() + c]);
        else
          CHECK(out.token(t)[c] == base.token(t)[c]);
      }
      if (kept) ++k;
    }
  }
}

TEST_CASE("scatter rejects mismatched tokens") {
  FeatureMap x(2, 2, 2);
  TokenSet ts = gather_tokens(x, all_kept(2, 2));
  ts.coords[3] = {2, 0};
  CHECK_THROWS_AS(scatter_tokens(ts, x), ShapeError);
  CHECK_THROWS_AS(scatter_tokens(gather_tokens(x, all_kept(2, 2)), FeatureMap(3, 2, 2)), ShapeError);
}

TEST_CASE("kept index grid") {
  SparsificationMap d{Grid<std::uint8_t>(2, 3)};
  d.keep(0, 1) = d.keep(1, 2) = 1;
  const auto idx = kept_index_grid(gather_tokens(FeatureMap(1, 2, 3), d));
  CHECK(idx(0, 1) == 0);
  CHECK(idx(1, 2) == 1);
  CHECK(idx(0, 0) == -1);
}

TEST_CASE("kept ratio of Bernoulli maps") {
  std::mt19937_64 rng(3);
  const double p = 0.3;
  const std::size_t maps = 200, cells = 16 * 16;
  double total = 0.0;
  for (std::size_t i = 0; i < maps; ++i) total += kept_ratio(oracle::random_keep(16, 16, p, rng));
  const double mean = total / maps;
  const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(maps * cells));
  CHECK(std::abs(mean - p) <= 4 * sigma);
}
