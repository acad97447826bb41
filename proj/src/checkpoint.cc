#include <cstring>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "sparse_scan/backbone.hpp"

namespace sscan {

namespace {

nlohmann::json config_to_json(const BackboneConfig& c) {
  return {{"height", c.height},       {"width", c.width},         {"bins", c.bins},
          {"patch", c.patch},         {"channels", c.channels},   {"ipl_window", c.ipl_window},
          {"gci", c.gci},             {"state_dim", c.state_dim}, {"ss2d_expand", c.ss2d_expand},
          {"mlp_ratio", c.mlp_ratio}, {"lstm", c.lstm == LstmKind::kSeparable ? "separable" : "full"}};
}

BackboneConfig config_from_json(const nlohmann::json& j) {
  BackboneConfig c;
  c.height = j.at("height").get<std::size_t>();
  c.width = j.at("width").get<std::size_t>();
  c.bins = j.at("bins").get<std::size_t>();
  c.patch = j.at("patch").get<std::size_t>();
  c.channels = j.at("channels").get<std::array<std::size_t, kStages>>();
  c.ipl_window = j.at("ipl_window").get<std::array<std::size_t, kStages>>();
  c.gci = j.at("gci").get<std::array<bool, kStages>>();
  c.state_dim = j.at("state_dim").get<std::size_t>();
  c.ss2d_expand = j.at("ss2d_expand").get<std::size_t>();
  c.mlp_ratio = j.at("mlp_ratio").get<std::size_t>();
  const auto kind = j.at("lstm").get<std::string>();
  if (kind != "separable" && kind != "full") throw ParseError("unknown ConvLSTM kind '" + kind + "'");
  c.lstm = kind == "separable" ? LstmKind::kSeparable : LstmKind::kFull;
  return c;
}

}  // namespace

void save_checkpoint(BackboneParams& params, const std::string& path) {
  nlohmann::json manifest;
  manifest["config"] = config_to_json(params.cfg);
  manifest["dtype"] = "float64-le";
  nlohmann::json tensors = nlohmann::json::object();

  std::ofstream bin(path, std::ios::binary | std::ios::trunc);
  if (!bin) throw IoError("cannot write " + path);
  std::size_t offset = 0;
  for (const TensorRef& t : named_tensors(params)) {
    tensors[t.name] = {{"offset", offset}, {"shape", t.shape}};
    for (double v : *t.data) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      char le[8];
      for (int i = 0; i < 8; ++i) le[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
      bin.write(le, 8);
    }
    offset += t.data->size();
  }
  if (!bin) throw IoError("write failed: " + path);
  manifest["tensors"] = tensors;
  manifest["count"] = offset;

  std::ofstream js(path + ".json", std::ios::trunc);
  if (!js) throw IoError("cannot write " + path + ".json");
  js << manifest.dump(2) << '\n';
}

BackboneParams load_checkpoint(const std::string& path) {
  std::ifstream js(path + ".json");
  if (!js) throw IoError("cannot open " + path + ".json");
  nlohmann::json manifest;
  try {
    js >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ".json: " + e.what());
  }

  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw IoError("cannot open " + path);
  std::vector<char> raw((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  if (raw.size() % 8 != 0) throw ParseError(path + ": size is not a multiple of 8 bytes");
  std::vector<double> values(raw.size() / 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[i * 8 + b])) << (8 * b);
    std::memcpy(&values[i], &bits, sizeof bits);
  }

  try {
    BackboneParams params = BackboneParams::random(config_from_json(manifest.at("config")), 0);
    const auto& tensors = manifest.at("tensors");
    for (const TensorRef& t : named_tensors(params)) {
      if (!tensors.contains(t.name)) throw ParseError("checkpoint is missing tensor " + t.name);
      const auto& entry = tensors.at(t.name);
      const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      if (shape != t.shape) throw ShapeError("tensor " + t.name + " has an unexpected shape");
      const auto offset = entry.at("offset").get<std::size_t>();
      if (offset + t.data->size() > values.size()) throw ParseError("tensor " + t.name + " runs past end of file");
      std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), t.data->size(), t.data->begin());
    }
    return params;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ".json: " + e.what());
  }
}

}  // namespace sscan
