#include "sparse_scan/event_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>

namespace sscan {

namespace {

constexpr char kMagic[4] = {'E', 'V', 'T', '1'};
constexpr std::size_t kHeaderBytes = 16;
constexpr std::size_t kRecordBytes = 12;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  using U = std::make_unsigned_t<T>;
  U u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>((u >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
  return static_cast<T>(u);
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::int64_t parse_int(const std::string& field, std::size_t line) {
  const std::string f = trim(field);
  if (f.empty()) throw ParseError("line " + std::to_string(line) + ": empty field");
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(f, &used);
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line) + ": not an integer: '" + f + "'");
  }
  if (used != f.size()) throw ParseError("line " + std::to_string(line) + ": not an integer: '" + f + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char delim) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, delim)) out.push_back(cur);
  if (!s.empty() && s.back() == delim) out.emplace_back();
  return out;
}

// Geometry line: "W=<w>,H=<h>[,T0=<start>,T1=<end>]".
void parse_geometry(const std::string& line, EventStream& s, bool& has_window) {
  has_window = false;
  bool has_w = false, has_h = false, has_t0 = false, has_t1 = false;
  for (const auto& kv : split(line, ',')) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ParseError("line 1: expected key=value in geometry header");
    const std::string key = trim(kv.substr(0, eq));
    const std::int64_t v = parse_int(kv.substr(eq + 1), 1);
    if (v < 0) throw ParseError("line 1: negative geometry value");
    if (key == "W") {
      if (v == 0 || v > 0xFFFF) throw ParseError("line 1: width out of range");
      s.width = static_cast<std::uint16_t>(v);
      has_w = true;
    } else if (key == "H") {
      if (v == 0 || v > 0xFFFF) throw ParseError("line 1: height out of range");
      s.height = static_cast<std::uint16_t>(v);
      has_h = true;
    } else if (key == "T0") {
      s.window_start = static_cast<std::uint64_t>(v);
      has_t0 = true;
    } else if (key == "T1") {
      s.window_end = static_cast<std::uint64_t>(v);
      has_t1 = true;
    } else {
      throw ParseError("line 1: unknown header key '" + key + "'");
    }
  }
  if (!has_w || !has_h) throw ParseError("line 1: header must define W and H");
  if (has_t0 != has_t1) throw ParseError("line 1: T0 and T1 must be given together");
  has_window = has_t0;
}

EventStream load_csv(std::istream& in) {
  EventStream s;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("line 1: missing geometry header");
  bool has_window = false;
  parse_geometry(trim(line), s, has_window);

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t == "x,y,t,p") continue;
    const auto f = split(t, ',');
    if (f.size() != 4) throw ParseError("line " + std::to_string(lineno) + ": expected 4 fields");
    const auto x = parse_int(f[0], lineno);
    const auto y = parse_int(f[1], lineno);
    const auto ts = parse_int(f[2], lineno);
    const auto p = parse_int(f[3], lineno);
    if (x < 0 || y < 0 || x >= s.width || y >= s.height)
      throw ValidationError("line " + std::to_string(lineno) + ": coordinate out of bounds");
    if (ts < 0) throw ValidationError("line " + std::to_string(lineno) + ": negative timestamp");
    if (p != 1 && p != -1) throw ValidationError("line " + std::to_string(lineno) + ": polarity must be -1 or 1");
    if (!s.events.empty() && static_cast<std::uint64_t>(ts) < s.events.back().t)
      throw OrderingError("line " + std::to_string(lineno) + ": timestamps decrease");
    s.events.push_back({static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), static_cast<std::uint64_t>(ts),
                        static_cast<std::int8_t>(p)});
  }
  if (!has_window) {
    s.window_start = 0;
    s.window_end = s.events.empty() ? 0 : s.events.back().t;
  }
  validate(s);
  return s;
}

}  // namespace

void validate(const EventStream& s) {
  if (s.window_end < s.window_start) throw ValidationError("window end precedes window start");
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    const Event& e = s.events[i];
    if (e.x >= s.width || e.y >= s.height)
      throw ValidationError("event " + std::to_string(i) + ": coordinate out of bounds");
    if (e.p != 1 && e.p != -1) throw ValidationError("event " + std::to_string(i) + ": polarity must be -1 or 1");
    if (e.t < s.window_start || e.t > s.window_end)
      throw ValidationError("event " + std::to_string(i) + ": timestamp outside window");
    if (i > 0 && e.t < s.events[i - 1].t) throw OrderingError("event " + std::to_string(i) + ": timestamps decrease");
  }
}

EventFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".csv" ? EventFormat::kCsv : EventFormat::kBinary;
}

std::vector<std::uint8_t> encode_binary(const EventStream& s) {
  validate(s);
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + kRecordBytes * s.events.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  put_le<std::uint16_t>(out, s.width);
  put_le<std::uint16_t>(out, s.height);
  put_le<std::uint64_t>(out, s.span());
  for (const Event& e : s.events) {
    const std::uint64_t off = e.t - s.window_start;
    if (off > 0xFFFFFFFFull) throw ValidationError("timestamp offset exceeds 32 bits");
    put_le<std::uint16_t>(out, e.x);
    put_le<std::uint16_t>(out, e.y);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(off));
    put_le<std::int8_t>(out, e.p);
    out.push_back(0);
    out.push_back(0);
    out.push_back(0);
  }
  return out;
}

EventStream decode_binary(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderBytes) throw ParseError("offset 0: truncated header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw ParseError("offset 0: bad magic");
  EventStream s;
  s.width = get_le<std::uint16_t>(bytes.data() + 4);
  s.height = get_le<std::uint16_t>(bytes.data() + 6);
  s.window_start = 0;
  s.window_end = get_le<std::uint64_t>(bytes.data() + 8);
  const std::size_t body = bytes.size() - kHeaderBytes;
  if (body % kRecordBytes != 0)
    throw ParseError("offset " + std::to_string(kHeaderBytes + body / kRecordBytes * kRecordBytes) +
                     ": truncated record");
  const std::size_t n = body / kRecordBytes;
  s.events.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t off = kHeaderBytes + i * kRecordBytes;
    const std::uint8_t* r = bytes.data() + off;
    Event e;
    e.x = get_le<std::uint16_t>(r);
    e.y = get_le<std::uint16_t>(r + 2);
    e.t = get_le<std::uint32_t>(r + 4);
    e.p = get_le<std::int8_t>(r + 8);
    if (r[9] != 0 || r[10] != 0 || r[11] != 0) throw ParseError("offset " + std::to_string(off) + ": nonzero padding");
    if (e.p != 1 && e.p != -1) throw ParseError("offset " + std::to_string(off) + ": polarity must be -1 or 1");
    if (e.x >= s.width || e.y >= s.height)
      throw ValidationError("offset " + std::to_string(off) + ": coordinate out of bounds");
    if (!s.events.empty() && e.t < s.events.back().t)
      throw OrderingError("offset " + std::to_string(off) + ": timestamps decrease");
    s.events.push_back(e);
  }
  validate(s);
  return s;
}

EventStream load_events(const std::filesystem::path& path, EventFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  if (format == EventFormat::kCsv) return load_csv(in);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_binary(bytes);
}

void save_events(const EventStream& s, const std::filesystem::path& path, EventFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  if (format == EventFormat::kBinary) {
    const auto bytes = encode_binary(s);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  } else {
    validate(s);
    out << "W=" << s.width << ",H=" << s.height << ",T0=" << s.window_start << ",T1=" << s.window_end << "\n";
    out << "x,y,t,p\n";
    for (const Event& e : s.events) out << e.x << ',' << e.y << ',' << e.t << ',' << int(e.p) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

VoxelGrid build_voxel_grid(const EventStream& s, std::size_t bins) {
  if (bins == 0) throw ConfigError("voxel grid needs at least one bin");
  if (s.span() == 0 && bins > 1 && !s.events.empty()) throw ConfigError("voxel grid needs a positive window span");
  VoxelGrid v;
  v.bins = bins;
  v.height = s.height;
  v.width = s.width;
  v.span = s.span();
  v.values.assign(2 * bins * v.height * v.width, 0.0);
  const double scale = bins > 1 ? static_cast<double>(bins - 1) / static_cast<double>(s.span()) : 0.0;
  for (const Event& e : s.events) {
    const double tn = static_cast<double>(e.t - s.window_start) * scale;
    const std::size_t base = e.p > 0 ? 0 : bins;
    // floor() gives the lower bin on exact integer positions, so a tie lands
    // entirely in that bin.
    auto lo = static_cast<std::size_t>(std::floor(tn));
    if (lo >= bins - 1) {
      v.at(base + bins - 1, e.y, e.x) += 1.0;
      continue;
    }
    const double frac = tn - static_cast<double>(lo);
    v.at(base + lo, e.y, e.x) += 1.0 - frac;
    if (frac > 0.0) v.at(base + lo + 1, e.y, e.x) += frac;
  }
  return v;
}

namespace {

// Pixels covered by a segment, rasterized by dense sampling along its length.
void rasterize(double x0, double y0, double x1, double y1, int w, int h, std::set<std::pair<int, int>>& out) {
  const double len = std::hypot(x1 - x0, y1 - y0);
  const int steps = std::max(1, static_cast<int>(std::ceil(len * 2.0)));
  for (int i = 0; i <= steps; ++i) {
    const double a = static_cast<double>(i) / steps;
    const int px = static_cast<int>(std::floor(x0 + a * (x1 - x0)));
    const int py = static_cast<int>(std::floor(y0 + a * (y1 - y0)));
    if (px >= 0 && py >= 0 && px < w && py < h) out.emplace(px, py);
  }
}

}  // namespace

SyntheticScene generate_synthetic_scene(const SceneSpec& spec, std::uint64_t seed) {
  if (spec.duration_us == 0) throw ConfigError("scene duration must be positive");
  if (spec.noise_rate_hz < 0.0 || !std::isfinite(spec.noise_rate_hz)) throw ConfigError("noise rate must be >= 0");
  if (spec.width == 0 || spec.height == 0) throw ConfigError("sensor geometry must be positive");
  for (const auto& e : spec.edges) {
    if (std::hypot(e.x1 - e.x0, e.y1 - e.y0) == 0.0 || std::hypot(e.vx, e.vy) == 0.0)
      throw ConfigError("edge segment sweeps zero area");
    if (e.events_per_crossing == 0) throw ConfigError("edge burst count must be positive");
  }

  std::mt19937_64 rng(seed);
  SyntheticScene scene;
  scene.object_mask = Grid<std::uint8_t>(spec.height, spec.width, 0);
  std::vector<Event> events;
  const int w = spec.width, h = spec.height;
  const double dur_s = static_cast<double>(spec.duration_us) * 1e-6;

  for (const auto& edge : spec.edges) {
    // Time step such that the edge moves at most half a pixel per step.
    const double speed = std::hypot(edge.vx, edge.vy);
    const auto dt_us = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(0.5 / speed * 1e6));
    const std::int8_t pol = (edge.vx + edge.vy) >= 0 ? 1 : -1;
    std::set<std::pair<int, int>> prev;
    for (std::uint64_t t = 0; t < spec.duration_us; t += dt_us) {
      const double ts = static_cast<double>(t) * 1e-6;
      std::set<std::pair<int, int>> cur;
      rasterize(edge.x0 + edge.vx * ts, edge.y0 + edge.vy * ts, edge.x1 + edge.vx * ts, edge.y1 + edge.vy * ts, w, h,
                cur);
      for (const auto& px : cur) {
        if (prev.count(px)) continue;
        scene.object_mask(px.second, px.first) = 1;
        for (std::uint32_t k = 0; k < edge.events_per_crossing; ++k) {
          const std::uint64_t te = t + k;
          if (te >= spec.duration_us) break;
          events.push_back({static_cast<std::uint16_t>(px.first), static_cast<std::uint16_t>(px.second), te, pol});
        }
      }
      prev = std::move(cur);
    }
  }

  if (spec.noise_rate_hz > 0.0) {
    std::poisson_distribution<int> count(spec.noise_rate_hz * dur_s);
    std::uniform_int_distribution<std::uint64_t> when(0, spec.duration_us - 1);
    std::bernoulli_distribution coin(0.5);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int n = count(rng);
        for (int k = 0; k < n; ++k) {
          const std::uint64_t t = when(rng);
          events.push_back({static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), t,
                            static_cast<std::int8_t>(coin(rng) ? 1 : -1)});
        }
      }
    }
  }

  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
  scene.stream.events = std::move(events);
  scene.stream.width = spec.width;
  scene.stream.height = spec.height;
  scene.stream.window_start = 0;
  scene.stream.window_end = spec.duration_us;
  return scene;
}

SceneSpec scene_preset(const std::string& name) {
  SceneSpec s;
  s.width = 64;
  s.height = 64;
  s.duration_us = 50'000;
  if (name == "edge-noise") {
    s.noise_rate_hz = 20.0;
    s.edges = {
        {8, 6, 8, 30, 300, 0, 5},
        {30, 40, 50, 40, 0, 200, 5},
        {40, 4, 56, 20, -150, 0, 4},
    };
  } else if (name == "sparse-30") {
    s.noise_rate_hz = 1.0;
    s.edges = {
        {4, 4, 4, 28, 300, 0, 5},
        {36, 34, 60, 34, 0, 300, 5},
        {4, 40, 4, 60, 300, 0, 5},
    };
  } else if (name == "quiet") {
    s.noise_rate_hz = 0.0;
    s.edges = {{10, 10, 10, 40, 400, 0, 5}};
  } else {
    throw ConfigError("unknown scene preset '" + name + "'");
  }
  return s;
}

}  // namespace sscan
