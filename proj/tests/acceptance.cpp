// Acceptance criteria A1-A9. Prints one "A<n> PASS|FAIL <detail>" line per
// criterion run; exit status is the number of failures.
//
//   cratergan_acceptance [--work DIR] [A1 A2 ...]   (no ids: all)

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "cratergan/evalmetrics.hpp"
#include "cratergan/masks.hpp"
#include "cratergan/pipeline.hpp"
#include "cratergan/segment.hpp"
#include "cratergan/simgen.hpp"
#include "cratergan/tiling.hpp"
#include "cratergan/translate.hpp"
#include "nn_fixtures.hpp"
#include "pipeline/stages.hpp"
#include "oracles.hpp"

using namespace cratergan;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

Verdict a1_metric_oracle() {
  Rng rng(20240101);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto p = oracle::random_mask(64, 64, rng.uniform(0.0, 0.6), rng);
    const auto g = oracle::random_mask(64, 64, rng.uniform(0.0, 0.6), rng);
    const auto got = compute_metrics(confusion(p, g)).values();
    const auto want = oracle::metrics(oracle::count_pixels(p, g));
    for (std::size_t k = 0; k < 6; ++k) worst = std::max(worst, std::abs(got[k] - want[k]));
  }
  return {worst <= 1e-12, "max |diff| over 200 pairs = " + fmt(worst)};
}

Verdict a2_geometry() {
  const auto starts = tile_starts(8192, 416, 208);
  bool ok = starts.size() == 38 && starts.back() == 7696;

  Image raster(8192, 8192);
  Rng rng(2);
  for (auto& v : raster.data) v = static_cast<float>(rng.uniform());
  std::size_t n_tiles = 0;
  std::size_t mismatched = 0;
  {
    const auto tiles = slice_raster(raster, "big");
    n_tiles = tiles.size();
    const auto r = reassemble(tiles, raster.width, raster.height);
    const int covered = starts.back() + 416;
    for (int y = 0; y < covered; ++y) {
      for (int x = 0; x < covered; ++x) {
        if (r.coverage.at(x, y) == 0 || r.image.at(x, y) != raster.at(x, y)) ++mismatched;
      }
    }
  }
  const double km2 = tile_footprint_km2(416, 100);
  const double rel = std::abs(km2 - 1730.0) / 1730.0;
  ok = ok && n_tiles == 1444 && mismatched == 0 && std::abs(km2 - 1730.56) < 1e-9 && rel < 5e-4;
  return {ok, std::to_string(starts.size()) + " starts, last " + std::to_string(starts.back()) +
                  ", " + std::to_string(n_tiles) + " tiles, " + std::to_string(mismatched) +
                  " reassembly mismatches, footprint " + fmt(km2, 6) + " km2 (" +
                  fmt(100 * rel, 3) + "% from 1730)"};
}

// Fifty desk-scale scenes: exact masks and depression check. Also returns a
// digest of every image and mask for the determinism criterion.
struct SceneCheck {
  std::size_t mask_mismatches = 0;
  std::size_t fresh = 0;
  std::size_t in_depression = 0;
  std::vector<Image> images;
  std::vector<Grid<std::uint8_t>> masks;
};

SceneCheck check_scenes(std::uint64_t seed) {
  SceneCheck out;
  const auto base = ExperimentConfig::desk_scale().sim;
  for (std::uint64_t i = 0; i < 50; ++i) {
    SimSceneSpec spec = base;
    spec.seed = derive_seed(seed, "sim-scene", i);
    const auto scene = generate_scene(spec);
    const auto circles = placement_circles(scene.placements);
    const auto mask = rasterize_craters(circles, spec.width_px, spec.height_px);
    if (mask.pixels != oracle::disk_mask(circles, spec.width_px, spec.height_px)) {
      ++out.mask_mismatches;
    }
    for (const auto& p : scene.placements) {
      if (p.age >= 0.3) continue;
      ++out.fresh;
      const double center = oracle::sample(scene.heights, p.cx_px, p.cy_px);
      if (center < oracle::ring_mean(scene.heights, p.cx_px, p.cy_px, p.r_px)) ++out.in_depression;
    }
    out.images.push_back(scene.raster.pixels);
    out.masks.push_back(mask.pixels);
  }
  return out;
}

Verdict a3_perfect_labels() {
  const auto c = check_scenes(0);
  const double share = static_cast<double>(c.in_depression) / static_cast<double>(c.fresh);
  return {c.mask_mismatches == 0 && c.fresh > 0 && share >= 0.99,
          std::to_string(c.mask_mismatches) + "/50 mask mismatches, " +
              std::to_string(c.in_depression) + "/" + std::to_string(c.fresh) +
              " fresh craters in depressions (" + fmt(100 * share, 4) + "%)"};
}

Verdict a4_size_frequency() {
  SimSceneSpec s;
  s.width_px = s.height_px = 1000;
  s.crater_density = 1e5;
  Rng rng(4);
  std::vector<double> radii;
  for (const auto& p : sample_craters(s, rng)) radii.push_back(p.r_px);
  // p(r) ~ r^-a on [r0, r1]: F(r) = (r0^(1-a) - r^(1-a)) / (r0^(1-a) - r1^(1-a)).
  const double a = s.sfd_exponent, r0 = s.r_min_px, r1 = s.r_max_px;
  auto cdf = [&](double r) {
    return (std::pow(r0, 1 - a) - std::pow(r, 1 - a)) / (std::pow(r0, 1 - a) - std::pow(r1, 1 - a));
  };
  const double d = oracle::ks_statistic(radii, cdf);
  return {radii.size() == 100000 && d < 0.01,
          "KS D = " + fmt(d) + " over " + std::to_string(radii.size()) + " radii"};
}

struct TranslatorRun {
  std::vector<TranslatorLossRow> history;
  bool contract_ok = true;
  std::vector<Image> outputs;
};

TranslatorRun run_a5(std::uint64_t seed) {
  const auto sim = fixtures::scene_tiles(32, 128, derive_seed(seed, "a5-sim", 0), false);
  const auto real = fixtures::scene_tiles(32, 128, derive_seed(seed, "a5-real", 0), true);
  auto cfg = ExperimentConfig::desk_scale().translator;
  cfg.iterations = 200;
  cfg.seed = seed;
  auto st = train_translator(sim, real, cfg);
  TranslatorRun out;
  out.history = st->history;
  std::vector<Tile> tiles;
  for (std::size_t i = 0; i < 4; ++i) {
    Tile t;
    t.pixels = sim[i];
    t.tile_id = "a5_" + std::to_string(i);
    tiles.push_back(t);
  }
  for (const auto& t : translate_batch(*st, tiles)) {
    out.contract_ok = out.contract_ok && t.pixels.same_shape(128, 128) && t.provenance == "translated";
    for (float v : t.pixels.data) out.contract_ok = out.contract_ok && v >= 0.0f && v <= 1.0f;
    out.outputs.push_back(t.pixels);
  }
  return out;
}

Verdict a5_translator_smoke() {
  const auto run = run_a5(0);
  const auto& h = run.history;
  if (h.size() != 200) return {false, "history has " + std::to_string(h.size()) + " rows"};
  double first = 0, last = 0;
  bool finite = true;
  for (std::size_t i = 0; i < 10; ++i) {
    first += h[i].loss_cyc / 10;
    last += h[190 + i].loss_cyc / 10;
  }
  for (const auto& r : h) {
    for (double v : {r.loss_g, r.loss_f, r.loss_d_r, r.loss_d_s, r.loss_cyc}) {
      finite = finite && std::isfinite(v);
    }
  }
  const double ratio = last / first;
  return {finite && run.contract_ok && ratio <= 0.7,
          "cycle loss " + fmt(first) + " -> " + fmt(last) + " (ratio " + fmt(ratio, 3) +
              "), finite=" + (finite ? "yes" : "no") +
              ", contract=" + (run.contract_ok ? "ok" : "violated")};
}

double mean_iou(SegmenterState& st, std::span<const Sample> samples) {
  return evaluate(st, samples, 0.5).mean.iou;
}

Verdict a6_segmenter_capacity() {
  const auto pairs = fixtures::scene_samples(10, 128, 6, false);
  auto cfg = ExperimentConfig::desk_scale().segmenter;
  cfg.batch_size = 2;
  cfg.seed = 0;
  // Width 8 plateaus near IoU 0.4 on this set at the reference learning rate.
  cfg.base_channels = 16;
  SegmenterState st(cfg);
  Rng rng(6);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  int epoch = 0;
  double iou = mean_iou(st, pairs);
  while (epoch < 300 && iou < 0.8) {
    shuffle(order, rng);
    for (std::size_t s = 0; s < order.size(); s += cfg.batch_size) {
      std::vector<const Sample*> batch;
      for (std::size_t i = s; i < std::min(order.size(), s + cfg.batch_size); ++i) {
        batch.push_back(&pairs[order[i]]);
      }
      segmenter_step(st, batch);
    }
    ++epoch;
    if (epoch % 5 == 0) iou = mean_iou(st, pairs);
  }

  // Fixed-batch descent, averaged over three seeds.
  double step0 = 0, step20 = 0;
  const auto batch_data = fixtures::scene_samples(4, 128, 7, false);
  std::vector<const Sample*> batch;
  for (const auto& s : batch_data) batch.push_back(&s);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto c = ExperimentConfig::desk_scale().segmenter;
    c.seed = seed;
    SegmenterState fixed(c);
    std::vector<double> losses;
    for (int i = 0; i <= 20; ++i) losses.push_back(segmenter_step(fixed, batch));
    step0 += losses[0] / 3;
    step20 += losses[20] / 3;
  }
  return {iou >= 0.8 && step20 < step0,
          "train IoU " + fmt(iou) + " after " + std::to_string(epoch) +
              " epochs; fixed-batch loss " + fmt(step0) + " -> " + fmt(step20) +
              " (mean of 3 seeds)"};
}

Verdict a7_end_to_end(const fs::path& work) {
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto cfg = ExperimentConfig::desk_scale();
    cfg.experiment.seed = seed;
    std::ostringstream log;
    const auto t0 = std::chrono::steady_clock::now();
    const auto outcome = run_experiment(cfg, work / "a7", log);
    const double minutes =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
    const double f_sim = outcome.sim_trained.mean.f1;
    const double f_tr = outcome.translated_trained.mean.f1;
    if (f_tr > f_sim) ++wins;
    detail += "seed " + std::to_string(seed) + ": F1 " + fmt(f_sim) + " -> " + fmt(f_tr) + " (" +
              fmt(minutes, 3) + " min); ";
    std::cout << "  A7 seed " << seed << " sim F1 " << f_sim << " translated F1 " << f_tr
              << std::endl;
  }
  return {wins >= 2, detail + std::to_string(wins) + "/3 seeds improved"};
}

Verdict a8_reference_fixture() {
  const auto [a, b] = reference_table_fixture();
  const auto c = compare_reports(a, b);
  bool all = c.rows.size() == 6;
  double f1_delta = 0;
  for (const auto& r : c.rows) {
    all = all && r.verdict == "improved";
    if (r.metric == "f1") f1_delta = 100 * r.delta;
  }
  return {all && std::abs(f1_delta - 8.02) < 1e-9,
          std::string(all ? "all six improved" : "not all improved") + ", F1 delta " +
              fmt(f1_delta) + " points"};
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Verdict a9_determinism(const fs::path& work) {
  const auto a = check_scenes(0), b = check_scenes(0);
  const bool scenes_same = a.images == b.images && a.masks == b.masks;

  // Manifests and tile files written by the pipeline, twice.
  auto cfg = ExperimentConfig::desk_scale();
  cfg.experiment.seed = 9;
  std::ostringstream log;
  bool files_same = true;
  std::size_t compared = 0;
  fs::path roots[2] = {work / "a9" / "first" / cfg.run_id(), work / "a9" / "second" / cfg.run_id()};
  for (const auto& root : roots) {
    fs::remove_all(root);
    fs::create_directories(root);
    stages::run_simgen(cfg, root, log);
    stages::run_tile(cfg, root, log);
    stages::run_rasterize(cfg, root, log);
  }
  for (const auto& entry : fs::recursive_directory_iterator(roots[0])) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), roots[0]);
    files_same = files_same && read_bytes(entry.path()) == read_bytes(roots[1] / rel);
    ++compared;
  }

  const auto t1 = run_a5(0), t2 = run_a5(0);
  const bool losses_same = t1.history == t2.history && t1.outputs == t2.outputs;
  return {scenes_same && files_same && losses_same && compared > 0,
          std::string("scenes ") + (scenes_same ? "identical" : "DIFFER") + ", " +
              std::to_string(compared) + " pipeline files " +
              (files_same ? "identical" : "DIFFER") + ", translator histories " +
              (losses_same ? "identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  std::cout << std::unitbuf;
  CLI::App app{"Acceptance criteria"};
  std::string work = (fs::temp_directory_path() / "cratergan_acceptance").string();
  std::vector<std::string> ids;
  app.add_option("--work", work, "Scratch directory for pipeline runs");
  app.add_option("ids", ids, "Criteria to run (default: all)");
  CLI11_PARSE(app, argc, argv);

  const std::map<std::string, std::function<Verdict()>> criteria = {
      {"A1", a1_metric_oracle},
      {"A2", a2_geometry},
      {"A3", a3_perfect_labels},
      {"A4", a4_size_frequency},
      {"A5", a5_translator_smoke},
      {"A6", a6_segmenter_capacity},
      {"A7", [&] { return a7_end_to_end(work); }},
      {"A8", a8_reference_fixture},
      {"A9", [&] { return a9_determinism(work); }},
  };
  if (ids.empty()) {
    for (const auto& [id, fn] : criteria) ids.push_back(id);
  }
  int failures = 0;
  for (const auto& id : ids) {
    const auto it = criteria.find(id);
    if (it == criteria.end()) {
      std::cerr << "unknown criterion " << id << '\n';
      return 1;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = it->second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << id << (v.pass ? " PASS " : " FAIL ") << v.detail << " [" << fmt(secs, 3) << " s]"
              << std::endl;
    if (!v.pass) ++failures;
  }
  return failures;
}
