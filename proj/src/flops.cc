#include "sparse_scan/flops.hpp"

#include <cstdio>
#include <set>
#include <sstream>

namespace sscan {

std::uint64_t FlopCounter::total() const {
  std::uint64_t t = 0;
  for (const auto& [_, v] : counts_) t += v;
  return t;
}

void FlopCounter::merge(const FlopCounter& other) {
  for (const auto& [k, v] : other.counts_) counts_[k] += v;
}

bool is_token_wise_block(const std::string& block) {
  const auto dot = block.rfind('.');
  const std::string leaf = dot == std::string::npos ? block : block.substr(dot + 1);
  return leaf == "ss2d" || leaf == "mlp";
}

std::uint64_t FlopsReport::dense_total() const {
  std::uint64_t t = 0;
  for (const auto& b : blocks) t += b.dense;
  return t;
}

std::uint64_t FlopsReport::sparse_total() const {
  std::uint64_t t = 0;
  for (const auto& b : blocks) t += b.sparse;
  return t;
}

std::uint64_t FlopsReport::token_wise_dense() const {
  std::uint64_t t = 0;
  for (const auto& b : blocks)
    if (b.token_wise) t += b.dense;
  return t;
}

std::uint64_t FlopsReport::token_wise_sparse() const {
  std::uint64_t t = 0;
  for (const auto& b : blocks)
    if (b.token_wise) t += b.sparse;
  return t;
}

double FlopsReport::reduction() const {
  const auto d = dense_total();
  return d == 0 ? 0.0 : 1.0 - static_cast<double>(sparse_total()) / static_cast<double>(d);
}

nlohmann::json FlopsReport::to_json() const {
  nlohmann::json j;
  nlohmann::json blk = nlohmann::json::object();
  for (const auto& b : blocks)
    blk[b.name] = {{"dense", b.dense}, {"sparse", b.sparse}, {"ratio", b.kept_ratio}, {"token_wise", b.token_wise}};
  j["blocks"] = blk;
  j["total"] = {{"dense", dense_total()}, {"sparse", sparse_total()}, {"reduction", reduction()}};
  j["token_wise"] = {{"dense", token_wise_dense()}, {"sparse", token_wise_sparse()}};
  return j;
}

std::string FlopsReport::to_table() const {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-20s %14s %14s %8s\n", "block", "dense", "sparse", "kept");
  os << line;
  for (const auto& b : blocks) {
    std::snprintf(line, sizeof line, "%-20s %14llu %14llu %8.3f\n", b.name.c_str(),
                  static_cast<unsigned long long>(b.dense), static_cast<unsigned long long>(b.sparse), b.kept_ratio);
    os << line;
  }
  std::snprintf(line, sizeof line, "%-20s %14llu %14llu %7.1f%%\n", "total",
                static_cast<unsigned long long>(dense_total()), static_cast<unsigned long long>(sparse_total()),
                100.0 * reduction());
  os << line;
  return os.str();
}

FlopsReport make_report(const FlopCounter& dense, const FlopCounter& sparse, const std::array<double, 4>& ratios) {
  std::set<std::string> keys;
  for (const auto& [k, _] : dense.counts()) keys.insert(k);
  for (const auto& [k, _] : sparse.counts()) keys.insert(k);
  FlopsReport r;
  for (const auto& k : keys) {
    BlockFlops b;
    b.name = k;
    b.dense = dense.get(k);
    b.sparse = sparse.get(k);
    b.token_wise = is_token_wise_block(k);
    // Keys look like "stage<k>.<block>".
    if (k.rfind("stage", 0) == 0 && k.size() > 5) {
      const int s = k[5] - '1';
      if (s >= 0 && s < 4) b.kept_ratio = ratios[static_cast<std::size_t>(s)];
    }
    r.blocks.push_back(b);
  }
  return r;
}

}  // namespace sscan
