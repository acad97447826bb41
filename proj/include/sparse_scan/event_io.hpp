#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "sparse_scan/common.hpp"

namespace sscan {

struct Event {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::uint64_t t = 0;  // microseconds
  std::int8_t p = 1;    // -1 or +1
  bool operator==(const Event&) const = default;
};

struct EventStream {
  std::vector<Event> events;
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::uint64_t window_start = 0;
  std::uint64_t window_end = 0;

  std::uint64_t span() const { return window_end - window_start; }
};

// Throws ValidationError / OrderingError if the stream breaks its invariants.
void validate(const EventStream& stream);

enum class EventFormat { kCsv, kBinary };

// Picks kCsv for a ".csv" extension and kBinary otherwise.
EventFormat format_from_path(const std::filesystem::path& path);

EventStream load_events(const std::filesystem::path& path, EventFormat format);
void save_events(const EventStream& stream, const std::filesystem::path& path, EventFormat format);

// Binary codec on in-memory buffers; the file functions are thin wrappers.
std::vector<std::uint8_t> encode_binary(const EventStream& stream);
EventStream decode_binary(const std::vector<std::uint8_t>& bytes);

// Voxel grid with 2*bins channels: [0, bins) positive, [bins, 2*bins) negative
// polarity. Channel-major layout (channel, row, col).
struct VoxelGrid {
  std::size_t bins = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::uint64_t span = 0;
  std::vector<double> values;

  std::size_t channels() const { return 2 * bins; }
  double& at(std::size_t ch, std::size_t r, std::size_t c) { return values[(ch * height + r) * width + c]; }
  double at(std::size_t ch, std::size_t r, std::size_t c) const { return values[(ch * height + r) * width + c]; }
};

VoxelGrid build_voxel_grid(const EventStream& stream, std::size_t bins);

struct EdgeSegment {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // endpoints at t = 0, pixels
  double vx = 0, vy = 0;                  // pixels per second
  std::uint32_t events_per_crossing = 5;
};

struct SceneSpec {
  std::uint16_t width = 64;
  std::uint16_t height = 64;
  std::uint64_t duration_us = 50'000;
  double noise_rate_hz = 0.0;  // events per pixel per second
  std::vector<EdgeSegment> edges;
};

struct SyntheticScene {
  EventStream stream;
  Grid<std::uint8_t> object_mask;  // height x width, 1 where an edge swept
};

SyntheticScene generate_synthetic_scene(const SceneSpec& spec, std::uint64_t seed);

// Named scene presets used by the CLI and benchmarks.
//   "edge-noise" : a few moving edges plus sparse background activity
//   "sparse-30"  : edges sweeping roughly 30% of the sensor, light noise
SceneSpec scene_preset(const std::string& name);

}  // namespace sscan
