#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>

#include "criteria.hpp"
#include "sparse_scan/backbone.hpp"
#include "sparse_scan/flops_model.hpp"
#include "sparse_scan/parallel.hpp"

namespace fs = std::filesystem;
using namespace sscan;

namespace {

struct StcaFlags {
  std::size_t patch = 4;
  double beta = 1.0;
  double sigma = 1.0;
  std::size_t radius = 1;

  void add(CLI::App* app) {
    app->add_option("--patch", patch, "Patch size P")->check(CLI::PositiveNumber);
    app->add_option("--beta", beta, "Sparsity factor")->check(CLI::PositiveNumber);
    app->add_option("--sigma", sigma, "Gaussian sigma")->check(CLI::PositiveNumber);
    app->add_option("--radius", radius, "Gaussian neighbourhood radius");
  }
  StcaConfig config() const { return {patch, {radius, sigma}, beta}; }
};

EventStream read_input(const std::string& path) {
  if (!fs::is_regular_file(path)) throw IoError("input file not found: " + path);
  return load_events(path, format_from_path(path));
}

bool is_csv(const std::string& path) { return fs::path(path).extension() == ".csv"; }

template <typename T>
void write_grid(const Grid<T>& g, const std::string& path) {
  if (is_csv(path))
    write_grid_csv(g, path);
  else
    write_grid_pgm(g, path);
}

// Splits one recording into `n` equal consecutive windows.
std::vector<EventStream> split_windows(const EventStream& s, std::size_t n) {
  if (n == 0) throw ConfigError("timestep count must be positive");
  std::vector<EventStream> out(n);
  const std::uint64_t span = s.span();
  for (std::size_t i = 0; i < n; ++i) {
    out[i].width = s.width;
    out[i].height = s.height;
    out[i].window_start = s.window_start + span * i / n;
    out[i].window_end = s.window_start + span * (i + 1) / n;
  }
  for (const Event& e : s.events) {
    std::size_t w = span == 0 ? 0 : static_cast<std::size_t>((e.t - s.window_start) * n / span);
    w = std::min(w, n - 1);
    out[w].events.push_back(e);
  }
  return out;
}

struct ForwardRun {
  FlopsReport report;
  BackboneOutput output;
  std::array<double, kStages> ratios{};
};

// Instrumented run over all windows plus an every-token-kept twin for the
// dense counts.
ForwardRun run_forward(const std::vector<EventStream>& windows, const BackboneParams& params, const StcaConfig& stca) {
  const BackboneConfig& cfg = params.cfg;
  std::vector<Frame> frames, dense_frames;
  ForwardRun run;
  for (const auto& w : windows) {
    frames.push_back(make_frame(w, cfg, stca));
    const auto r = stage_kept_ratios(frames.back().keep);
    for (std::size_t s = 0; s < kStages; ++s) run.ratios[s] += r[s] / static_cast<double>(windows.size());
    dense_frames.push_back(frames.back());
    dense_frames.back().keep = all_kept(cfg.grid_rows(0), cfg.grid_cols(0));
  }
  FlopCounter sparse, dense;
  BackboneState st = initial_state(cfg);
  run.output = backbone_forward(frames, params, st, &sparse);
  BackboneState dst = initial_state(cfg);
  backbone_forward(dense_frames, params, dst, &dense);
  run.report = make_report(dense, sparse, run.ratios);
  return run;
}

void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse event-camera selective-scan backbone tools"};
  app.require_subcommand(1);

  // gen
  std::string preset = "edge-noise", gen_out;
  std::uint64_t gen_seed = 0;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic event scene");
  gen->add_option("--preset", preset, "Scene preset: edge-noise, sparse-30, quiet");
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_option("-o,--output", gen_out, "Output event file (.csv or binary)")->required();
  std::string mask_out;
  gen->add_option("--mask", mask_out, "Optional object-mask output (.pgm or .csv)");

  // stca
  std::string stca_in, stca_out, scores_out;
  StcaFlags stca_flags;
  auto* stca = app.add_subcommand("stca", "Compute the sparsification map of an event file");
  stca->add_option("input", stca_in, "Event file")->required();
  stca->add_option("-o,--output", stca_out, "Keep-map output (.pgm or .csv)")->required();
  stca->add_option("--scores", scores_out, "Score-map output (.pgm or .csv)");
  stca_flags.add(stca);

  // scan-viz
  std::string viz_in, viz_out, order = "ipl";
  std::size_t viz_k = 2;
  StcaFlags viz_flags;
  auto* viz = app.add_subcommand("scan-viz", "Emit a token scan order as CSV (position,row,col)");
  viz->add_option("input", viz_in, "Event file")->required();
  viz->add_option("-o,--output", viz_out, "CSV output (default: stdout)");
  viz->add_option("--order", order, "forward, backward, column, column-backward or ipl")
      ->check(CLI::IsMember({"forward", "backward", "column", "column-backward", "ipl"}));
  viz->add_option("--k", viz_k, "IPL window size")->check(CLI::PositiveNumber);
  viz_flags.add(viz);

  // forward
  std::string fwd_in, report_out, ckpt_in, ckpt_out, precision = "f64";
  std::uint64_t fwd_seed = 0;
  std::size_t bins = 10, timesteps = 1;
  StcaFlags fwd_flags;
  auto* fwd = app.add_subcommand("forward", "Run the backbone on an event file and report FLOPs");
  fwd->add_option("input", fwd_in, "Event file")->required();
  fwd->add_option("--report", report_out, "FLOPs report JSON output");
  fwd->add_option("--seed", fwd_seed, "Parameter initialization seed");
  fwd->add_option("--bins", bins, "Voxel bins per polarity")->check(CLI::PositiveNumber);
  fwd->add_option("--timesteps", timesteps, "Number of consecutive windows")->check(CLI::PositiveNumber);
  fwd->add_option("--checkpoint", ckpt_in, "Load parameters from a checkpoint");
  fwd->add_option("--save-checkpoint", ckpt_out, "Write the parameters used to a checkpoint");
  fwd->add_option("--precision", precision, "Arithmetic precision")->check(CLI::IsMember({"f64"}));
  fwd_flags.add(fwd);

  // bench
  std::size_t bench_scenes = 8;
  std::uint64_t bench_seed = 0;
  std::string bench_preset = "sparse-30", bench_report;
  auto* bench = app.add_subcommand("bench", "Generate scenes and run the backbone on each");
  bench->add_option("--scenes", bench_scenes, "Number of scenes")->check(CLI::PositiveNumber);
  bench->add_option("--preset", bench_preset, "Scene preset");
  bench->add_option("--seed", bench_seed, "First scene seed");
  bench->add_option("--report", bench_report, "JSON output");

  // selftest
  auto* selftest = app.add_subcommand("selftest", "Run the oracle acceptance suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      const SyntheticScene sc = generate_synthetic_scene(scene_preset(preset), gen_seed);
      save_events(sc.stream, gen_out, format_from_path(gen_out));
      if (!mask_out.empty()) write_grid(sc.object_mask, mask_out);
      std::printf("%zu events, %ux%u, %llu us\n", sc.stream.events.size(), sc.stream.width, sc.stream.height,
                  static_cast<unsigned long long>(sc.stream.span()));
    } else if (stca->parsed()) {
      const EventStream s = read_input(stca_in);
      const StcaResult r = run_stca(s, stca_flags.config());
      write_grid(r.map.keep, stca_out);
      if (!scores_out.empty()) write_grid(r.scores.values, scores_out);
      std::printf("tokens %zux%zu, alpha %.6g, kept %zu (%.1f%%)\n", r.map.rows(), r.map.cols(), r.map.alpha,
                  kept_count(r.map), 100.0 * kept_ratio(r.map));
    } else if (viz->parsed()) {
      const EventStream s = read_input(viz_in);
      const StcaResult r = run_stca(s, viz_flags.config());
      const TokenSet ts = gather_tokens(FeatureMap(1, r.map.rows(), r.map.cols()), r.map);
      Permutation p;
      if (order == "ipl") {
        p = ipl_order(ts, r.scores, {viz_k});
      } else {
        const auto c = cross_orders(ts);
        p = order == "forward" ? c[0] : order == "backward" ? c[1] : order == "column" ? c[2] : c[3];
      }
      std::ofstream file;
      if (!viz_out.empty()) {
        file.open(viz_out);
        if (!file) throw IoError("cannot write " + viz_out);
      }
      std::ostream& out = viz_out.empty() ? std::cout : file;
      out << "position,row,col\n";
      for (std::size_t i = 0; i < p.size(); ++i) out << i << ',' << ts.coords[p[i]].row << ',' << ts.coords[p[i]].col << '\n';
    } else if (fwd->parsed()) {
      const EventStream s = read_input(fwd_in);
      BackboneParams params;
      if (!ckpt_in.empty()) {
        params = load_checkpoint(ckpt_in);
      } else {
        BackboneConfig cfg;
        cfg.height = s.height;
        cfg.width = s.width;
        cfg.bins = bins;
        cfg.patch = fwd_flags.patch;
        params = BackboneParams::random(cfg, fwd_seed);
      }
      if (!ckpt_out.empty()) save_checkpoint(params, ckpt_out);
      const ForwardRun run = run_forward(split_windows(s, timesteps), params, fwd_flags.config());
      std::cout << run.report.to_table();
      for (std::size_t st = 0; st < kStages; ++st) {
        const FeatureMap& f = run.output.features.back()[st];
        double m = 0.0;
        for (double v : f.data()) m += std::abs(v);
        std::printf("stage%zu %zux%zux%zu mean|h| %.6f kept %.3f\n", st + 1, f.channels(), f.height(), f.width(),
                    m / static_cast<double>(f.data().size()), run.ratios[st]);
      }
      if (!report_out.empty()) write_json(run.report.to_json(), report_out);
    } else if (bench->parsed()) {
      const SceneSpec spec = scene_preset(bench_preset);
      const BackboneConfig cfg;
      const BackboneParams params = BackboneParams::random(cfg, bench_seed);
      struct Row {
        double kept = 0, reduction = 0, ms = 0;
      };
      std::vector<Row> rows(bench_scenes);
      parallel_for(bench_scenes, default_threads(), [&](std::size_t i) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto sc = generate_synthetic_scene(spec, bench_seed + i);
        const ForwardRun run = run_forward({sc.stream}, params, {cfg.patch, {}, 1.0});
        rows[i] = {run.ratios[0], run.report.reduction(),
                   std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count()};
      });
      nlohmann::json j = nlohmann::json::array();
      std::printf("%-6s %8s %10s %10s\n", "seed", "kept", "reduction", "ms");
      for (std::size_t i = 0; i < rows.size(); ++i) {
        std::printf("%-6llu %8.3f %9.1f%% %10.1f\n", static_cast<unsigned long long>(bench_seed + i), rows[i].kept,
                    100.0 * rows[i].reduction, rows[i].ms);
        j.push_back({{"seed", bench_seed + i}, {"kept_ratio", rows[i].kept}, {"reduction", rows[i].reduction}});
      }
      if (!bench_report.empty()) write_json(j, bench_report);
    } else if (selftest->parsed()) {
      return acceptance::run_all(std::cout) ? 0 : 1;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
