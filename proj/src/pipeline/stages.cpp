#include "pipeline/stages.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "cratergan/image_io.hpp"

namespace cratergan::stages {

using nlohmann::json;

fs::path stage_dir(const fs::path& run_root, const std::string& stage) {
  fs::path dir = run_root / stage;
  fs::create_directories(dir);
  return dir;
}

std::string relative_to(const fs::path& target, const fs::path& base) {
  return fs::absolute(target).lexically_normal()
      .lexically_relative(fs::absolute(base).lexically_normal())
      .generic_string();
}

void write_config(const ExperimentConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / "config.toml");
  if (!out) throw RuntimeFailure("cannot write " + (dir / "config.toml").string());
  out << cfg.to_document().render();
}

SceneFiles write_scene(const SimSceneSpec& spec, const std::string& id, const fs::path& dir,
                       const PseudoRealParams* corruption, std::uint64_t corruption_seed) {
  SimScene scene = generate_scene(spec);
  Image image = corruption ? corrupt_pseudo_real(scene.raster.pixels, *corruption, corruption_seed)
                           : scene.raster.pixels;
  SceneFiles files{id, dir / (id + ".png"), dir / (id + ".csv")};
  write_png8(files.image, image);
  write_placements_csv(files.craters, scene.placements);
  return files;
}

std::vector<Tile> tile_image_file(const fs::path& image, const std::string& parent_id,
                                  const TileGridParams& grid, const fs::path& dir,
                                  const std::string& provenance, std::size_t max_tiles) {
  auto tiles = slice_raster(read_grayscale(image), parent_id, grid);
  if (tiles.size() > max_tiles) tiles.resize(max_tiles);
  for (auto& t : tiles) {
    t.provenance = provenance;
    write_png8(dir / (t.tile_id + ".png"), t.pixels);
  }
  return tiles;
}

std::vector<ManifestEntry> rasterize_tiles(std::span<const Tile> tiles,
                                           std::span<const PixelCircle> parent_craters,
                                           const fs::path& tile_dir, const fs::path& mask_dir,
                                           const fs::path& manifest_dir) {
  std::vector<ManifestEntry> entries;
  for (const auto& t : tiles) {
    const BinaryMask mask = mask_for_tile(parent_craters, t);
    const fs::path mask_file = mask_dir / (t.tile_id + "_mask.png");
    write_mask_png(mask_file, mask.pixels);
    entries.push_back({t.tile_id, t.parent_id,
                       relative_to(tile_dir / (t.tile_id + ".png"), manifest_dir),
                       relative_to(mask_file, manifest_dir), t.provenance, t.origin_x,
                       t.origin_y});
  }
  return entries;
}

DatasetManifest translate_manifest(TranslatorState& state, const DatasetManifest& src,
                                   const fs::path& src_manifest, const fs::path& out_dir,
                                   const fs::path& out_manifest) {
  fs::create_directories(out_dir);
  const auto tiles = src.load_tiles(src_manifest);
  const auto translated = translate_batch(state, tiles);
  DatasetManifest out = src;
  for (std::size_t i = 0; i < translated.size(); ++i) {
    const fs::path file = out_dir / (translated[i].tile_id + ".png");
    write_png8(file, translated[i].pixels);
    auto& e = out.entries[i];
    e.tile_path = relative_to(file, out_manifest.parent_path());
    // The translated tile keeps the label of the sim tile it came from.
    e.mask_path = relative_to(src_manifest.parent_path() / src.entries[i].mask_path,
                              out_manifest.parent_path());
    e.provenance = "translated";
  }
  return out;
}

std::unique_ptr<SegmenterState> train_segmenter_stage(const fs::path& train_manifest,
                                                      const fs::path& val_manifest,
                                                      const SegmenterConfig& cfg,
                                                      const fs::path& dir, std::ostream& log,
                                                      const std::string& label) {
  const auto train = DatasetManifest::read(train_manifest).load_samples(train_manifest);
  const auto val = DatasetManifest::read(val_manifest).load_samples(val_manifest);
  log << "[train-segmenter:" << label << "] " << train.size() << " train / " << val.size()
      << " val samples, " << cfg.epochs << " epochs\n";
  SegmenterHooks hooks;
  hooks.on_epoch = [&](const SegmenterEpoch& e) {
    log << "[train-segmenter:" << label << "] epoch " << e.epoch << " train " << e.train_loss
        << " val " << e.val_loss << '\n';
  };
  std::unique_ptr<SegmenterState> state;
  try {
    state = train_segmenter(train, val, cfg, hooks);
  } catch (const RuntimeFailure& e) {
    throw RuntimeFailure("stage train-segmenter (" + label + "): " + e.what());
  }
  write_segmenter_history(dir / "loss.csv", state->history);
  state->restore_best();
  save_segmenter(*state, dir / "segmenter.pt");
  return state;
}

MetricsReport evaluate_manifest(SegmenterState& state, const fs::path& manifest, double threshold,
                                ZeroDivision policy, const std::string& model_id) {
  const auto samples = DatasetManifest::read(manifest).load_samples(manifest);
  return evaluate(state, samples, threshold, policy, manifest.stem().string(), model_id);
}

namespace {

std::string numbered(const char* prefix, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%04zu", prefix, i);
  return buf;
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

json read_json(const fs::path& path, const std::string& needed_by) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("stage " + needed_by + ": missing input " + path.string() +
                      " (run the upstream stage first)");
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("stage " + needed_by + ": malformed " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void require(const fs::path& path, const std::string& needed_by) {
  if (!fs::exists(path)) {
    throw ConfigError("stage " + needed_by + ": missing input " + path.string() +
                      " (run the upstream stage first)");
  }
}

std::size_t tiles_per_scene(const ExperimentConfig& cfg) {
  const auto& g = cfg.tiling;
  const auto n = tile_starts(cfg.experiment.scene_px, g.tile_px, g.stride_px, g.flush).size();
  return n * n;
}

// Tile groups, in the order their manifests are written.
const std::array<const char*, 4> kGroups = {"sim_train", "sim_val", "real_train", "real_test"};

const char* split_of(const std::string& group) {
  if (group == "sim_train" || group == "real_train") return "train";
  if (group == "sim_val") return "val";
  return "test";
}

}  // namespace

void run_simgen(const ExperimentConfig& cfg, const fs::path& root, std::ostream& log) {
  const auto& ex = cfg.experiment;
  const fs::path dir = stage_dir(root, "simgen");
  write_config(cfg, dir);
  const std::size_t per_scene = tiles_per_scene(cfg);
  const std::size_t n_sim = ceil_div(ex.sim_tiles, per_scene);
  const bool pseudo = ex.real_mosaic.empty();
  const std::size_t n_real = pseudo ? ceil_div(ex.real_tiles, per_scene) : 0;
  const std::size_t n_test = pseudo ? ceil_div(ex.test_tiles, per_scene) : 0;
  log << "[simgen] " << n_sim << " simulated + " << n_real + n_test << " pseudo-real scenes of "
      << ex.scene_px << " px\n";

  SimSceneSpec spec = cfg.sim;
  spec.width_px = spec.height_px = ex.scene_px;
  json scenes = json::array();
  auto record = [&](const SceneFiles& f, const char* kind) {
    scenes.push_back({{"id", f.id}, {"kind", kind}, {"image", f.image.filename().string()},
                      {"craters", f.craters.filename().string()}});
  };
  for (std::size_t i = 0; i < n_sim; ++i) {
    spec.seed = derive_seed(ex.seed, "sim-scene", i);
    record(write_scene(spec, numbered("sim", i), dir), "sim");
  }
  // Pseudo-real scenes are independent draws, so they share no craters with
  // the simulated ones.
  for (std::size_t i = 0; i < n_real + n_test; ++i) {
    spec.seed = derive_seed(ex.seed, "pseudo-real-scene", i);
    record(write_scene(spec, numbered("pseudoreal", i), dir, &cfg.pseudo_real,
                       derive_seed(ex.seed, "pseudo-real-corruption", i)),
           i < n_real ? "real_train" : "real_test");
  }
  write_json(dir / "scenes.json", {{"seed", ex.seed}, {"scenes", scenes}});
}

void run_ingest(const ExperimentConfig& cfg, const fs::path& root, std::ostream& log) {
  const auto& ex = cfg.experiment;
  if (ex.real_mosaic.empty()) {
    throw ConfigError(
        "stage ingest: experiment.real_mosaic and experiment.real_craters are required");
  }
  const fs::path dir = stage_dir(root, "ingest");
  write_config(cfg, dir);
  const auto db = load_crater_db(ex.real_craters, cfg.crater_schema);
  const auto kept = filter_craters(db.records, ex.max_radius_km);
  const auto mosaic = load_mosaic(ex.real_mosaic, cfg.georef);
  std::ofstream csv(dir / "craters.csv");
  csv.precision(17);
  csv << "id,cx_px,cy_px,r_px\n";
  std::size_t projected = 0;
  for (const auto& rec : kept) {
    const auto p = project_to_pixel(rec, mosaic.georef);
    if (!p.in_bounds || p.circle.r < 0.5) continue;
    csv << rec.id << ',' << p.circle.cx << ',' << p.circle.cy << ',' << p.circle.r << '\n';
    ++projected;
  }
  log << "[ingest] " << db.records.size() << " craters loaded (" << db.skipped
      << " rows skipped), " << kept.size() << " below " << ex.max_radius_km << " km, "
      << projected << " inside the mosaic\n";
  write_json(dir / "summary.json", {{"mosaic", ex.real_mosaic},
                                    {"width_px", mosaic.pixels.width},
                                    {"height_px", mosaic.pixels.height},
                                    {"loaded", db.records.size()},
                                    {"skipped_rows", db.skipped},
                                    {"kept", kept.size()},
                                    {"projected", projected},
                                    {"max_radius_km", ex.max_radius_km}});
}

void run_tile(const ExperimentConfig& cfg, const fs::path& root, std::ostream& log) {
  const auto& ex = cfg.experiment;
  const auto& grid = cfg.tiling;
  const fs::path scene_dir = root / "simgen";
  const json scenes = read_json(scene_dir / "scenes.json", "tile");
  const fs::path dir = stage_dir(root, "tile");
  write_config(cfg, dir);

  std::vector<json> sim_parents;
  for (const auto& s : scenes.at("scenes")) {
    if (s.at("kind") == "sim") sim_parents.push_back(s);
  }
  const std::size_t n_sim = sim_parents.size();
  const auto n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(ex.val_fraction * static_cast<double>(n_sim))));
  if (n_val >= n_sim) {
    throw ConfigError("stage tile: too few simulated scenes to hold out a validation split");
  }

  json tiles = json::array();
  auto add = [&](const std::vector<Tile>& ts, const std::string& group, const fs::path& craters) {
    for (const auto& t : ts) {
      tiles.push_back({{"group", group},
                       {"tile_id", t.tile_id},
                       {"parent_id", t.parent_id},
                       {"provenance", t.provenance},
                       {"origin_x", t.origin_x},
                       {"origin_y", t.origin_y},
                       {"craters", relative_to(craters, root)}});
    }
  };
  auto room = [](std::size_t taken, std::size_t limit) { return limit - std::min(limit, taken); };

  // Caps apply in parent order, so the validation parents (the last ones)
  // absorb any truncation of the simulated set.
  std::size_t sim_taken = 0;
  for (std::size_t i = 0; i < n_sim; ++i) {
    const auto& s = sim_parents[i];
    const auto ts = tile_image_file(scene_dir / s.at("image").get<std::string>(),
                                    s.at("id").get<std::string>(), grid, dir, "sim",
                                    room(sim_taken, ex.sim_tiles));
    sim_taken += ts.size();
    add(ts, i + n_val >= n_sim ? "sim_val" : "sim_train",
        scene_dir / s.at("craters").get<std::string>());
  }

  if (ex.real_mosaic.empty()) {
    std::size_t real_taken = 0, test_taken = 0;
    for (const auto& s : scenes.at("scenes")) {
      const std::string kind = s.at("kind");
      if (kind == "sim") continue;
      const bool test = kind == "real_test";
      std::size_t& taken = test ? test_taken : real_taken;
      const auto ts = tile_image_file(scene_dir / s.at("image").get<std::string>(),
                                      s.at("id").get<std::string>(), grid, dir, "real",
                                      room(taken, test ? ex.test_tiles : ex.real_tiles));
      taken += ts.size();
      add(ts, kind, scene_dir / s.at("craters").get<std::string>());
    }
  } else {
    // Real mosaic: a horizontal cut separates translator tiles (above) from
    // test tiles (below); tiles straddling the cut are dropped.
    const fs::path craters = root / "ingest" / "craters.csv";
    require(craters, "tile");
    const auto mosaic = load_mosaic(ex.real_mosaic, cfg.georef);
    const int cut = static_cast<int>(mosaic.pixels.height * (1.0 - ex.real_test_fraction));
    std::vector<Tile> upper, lower;
    for (auto& t : slice_raster(mosaic.pixels, "mosaic", grid)) {
      t.provenance = "real";
      if (t.origin_y + grid.tile_px <= cut) {
        t.parent_id = "mosaic_upper";
        upper.push_back(std::move(t));
      } else if (t.origin_y >= cut) {
        t.parent_id = "mosaic_lower";
        lower.push_back(std::move(t));
      }
    }
    upper.resize(std::min<std::size_t>(upper.size(), ex.real_tiles));
    lower.resize(std::min<std::size_t>(lower.size(), ex.test_tiles));
    if (upper.empty() || lower.empty()) {
      throw ConfigError("stage tile: mosaic too small for a translator/test split");
    }
    for (const auto* part : {&upper, &lower}) {
      for (const auto& t : *part) write_png8(dir / (t.tile_id + ".png"), t.pixels);
    }
    add(upper, "real_train", craters);
    add(lower, "real_test", craters);
  }
  log << "[tile] " << tiles.size() << " tiles of " << grid.tile_px << " px (stride "
      << grid.stride_px << ")\n";
  write_json(dir / "tiles.json",
             {{"tile_px", grid.tile_px}, {"stride_px", grid.stride_px}, {"tiles", tiles}});
}

void run_rasterize(const ExperimentConfig& cfg, const fs::path& root, std::ostream& log) {
  const fs::path tile_dir = root / "tile";
  const json index = read_json(tile_dir / "tiles.json", "rasterize");
  const fs::path dir = stage_dir(root, "rasterize");
  write_config(cfg, dir);
  const std::string hash = cfg.hash();

  std::map<std::string, DatasetManifest> manifests;
  for (const char* g : kGroups) {
    auto& m = manifests[g];
    m.split = split_of(g);
    m.config_hash = hash;
    m.seed = cfg.experiment.seed;
    if (!cfg.experiment.real_mosaic.empty() && std::string(g).starts_with("real")) {
      m.max_radius_km = cfg.experiment.max_radius_km;
    }
  }
  std::map<std::string, std::vector<PixelCircle>> circle_cache;
  for (const auto& j : index.at("tiles")) {
    const std::string craters = j.at("craters");
    auto it = circle_cache.find(craters);
    if (it == circle_cache.end()) {
      it = circle_cache.emplace(craters, read_circles_csv(root / craters)).first;
    }
    Tile t;
    t.tile_id = j.at("tile_id");
    t.parent_id = j.at("parent_id");
    t.provenance = j.at("provenance");
    t.origin_x = j.at("origin_x");
    t.origin_y = j.at("origin_y");
    t.pixels = read_grayscale(tile_dir / (t.tile_id + ".png"));
    auto entries = rasterize_tiles(std::span(&t, 1), it->second, tile_dir, dir, dir);
    auto& m = manifests.at(j.at("group").get<std::string>());
    m.entries.insert(m.entries.end(), entries.begin(), entries.end());
  }
  std::vector<DatasetManifest> all;
  for (const char* g : kGroups) all.push_back(manifests.at(g));
  check_no_leakage(all);
  for (const char* g : kGroups) manifests.at(g).write(dir / (std::string(g) + ".json"));
  log << "[rasterize] sim " << manifests["sim_train"].entries.size() << " train / "
      << manifests["sim_val"].entries.size() << " val; target "
      << manifests["real_train"].entries.size() << " translator / "
      << manifests["real_test"].entries.size() << " test tiles\n";
}

void run_train_translator(const ExperimentConfig& cfg, const fs::path& root, std::ostream& log) {
  const fs::path sim_path = root / "rasterize" / "sim_train.json";
  const fs::path real_path = root / "rasterize" / "real_train.json";
  require(sim_path, "train-translator");
  require(real_path, "train-translator");
  const fs::path dir = stage_dir(root, "train-translator");
  write_config(cfg, dir);
  TranslatorConfig tcfg = cfg.translator;
  tcfg.seed = derive_seed(cfg.experiment.seed, "translator");
  std::vector<Image> sim, real;
  for (auto& t : DatasetManifest::read(sim_path).load_tiles(sim_path)) {
    sim.push_back(std::move(t.pixels));
  }
  for (auto& t : DatasetManifest::read(real_path).load_tiles(real_path)) {
    real.push_back(std::move(t.pixels));
  }
  log << "[train-translator] " << tcfg.iterations << " iterations on " << sim.size() << " sim / "
      << real.size() << " target tiles\n";
  TranslatorHooks hooks;
  hooks.on_iteration = [&](const TranslatorLossRow& r) {
    if (r.iteration % 100 == 0) {
      log << "[train-translator] it " << r.iteration << " G " << r.loss_g << " F " << r.loss_f
          << " D_R " << r.loss_d_r << " D_S " << r.loss_d_s << " cyc " << r.loss_cyc << '\n';
    }
  };
  hooks.on_checkpoint = [&](const TranslatorState& s) {
    save_translator(s, dir / "translator.pt");
  };
  std::unique_ptr<TranslatorState> state;
  try {
    state = train_translator(sim, real, tcfg, hooks);
  } catch (const RuntimeFailure& e) {
    throw RuntimeFailure(std::string("stage train-translator: ") + e.what());
  }
  save_translator(*state, dir / "translator.pt");
  write_translator_history(dir / "loss.csv", state->history);
}

void run_translate(const ExperimentConfig& cfg, const fs::path& root, std::ostream& log) {
  const fs::path model = root / "train-translator" / "translator.pt";
  require(model, "translate");
  const fs::path dir = stage_dir(root, "translate");
  write_config(cfg, dir);
  auto state = load_translator(model);
  std::size_t n = 0;
  for (const std::string split : {"train", "val"}) {
    const fs::path src = root / "rasterize" / ("sim_" + split + ".json");
    require(src, "translate");
    const fs::path dst = dir / ("translated_" + split + ".json");
    const auto manifest = DatasetManifest::read(src);
    translate_manifest(*state, manifest, src, dir, dst).write(dst);
    n += manifest.entries.size();
  }
  log << "[translate] " << n << " tiles translated\n";
}

void run_train_segmenter(const ExperimentConfig& cfg, const fs::path& root, std::ostream& log) {
  const fs::path raster = root / "rasterize";
  const fs::path translated = root / "translate";
  for (const auto& p : {raster / "sim_train.json", raster / "sim_val.json",
                        translated / "translated_train.json",
                        translated / "translated_val.json"}) {
    require(p, "train-segmenter");
  }
  const fs::path dir = stage_dir(root, "train-segmenter");
  write_config(cfg, dir);
  // Both runs share initialization and batch order so that only the
  // training images differ.
  SegmenterConfig scfg = cfg.segmenter;
  scfg.seed = derive_seed(cfg.experiment.seed, "segmenter");
  train_segmenter_stage(raster / "sim_train.json", raster / "sim_val.json", scfg,
                        stage_dir(dir, "sim"), log, "sim");
  train_segmenter_stage(translated / "translated_train.json", translated / "translated_val.json",
                        scfg, stage_dir(dir, "translated"), log, "translated");
}

std::pair<MetricsReport, MetricsReport> run_evaluate(const ExperimentConfig& cfg,
                                                     const fs::path& root, std::ostream& log) {
  const fs::path test = root / "rasterize" / "real_test.json";
  const fs::path sim_model = root / "train-segmenter" / "sim" / "segmenter.pt";
  const fs::path tl_model = root / "train-segmenter" / "translated" / "segmenter.pt";
  for (const auto& p : {test, sim_model, tl_model}) require(p, "evaluate");
  const fs::path dir = stage_dir(root, "evaluate");
  write_config(cfg, dir);
  const double threshold = cfg.segmenter.threshold;
  auto sim_state = load_segmenter(sim_model);
  auto tl_state = load_segmenter(tl_model);
  auto a = evaluate_manifest(*sim_state, test, threshold, cfg.zero_division(), "sim-trained");
  auto b = evaluate_manifest(*tl_state, test, threshold, cfg.zero_division(), "translated-trained");
  write_report(dir / "sim.json", a);
  write_report(dir / "translated.json", b);
  log << "[evaluate] " << a.n_images << " test tiles; mean F1 sim-trained " << a.mean.f1
      << ", translated-trained " << b.mean.f1 << '\n';
  return {std::move(a), std::move(b)};
}

Comparison run_compare(const fs::path& root, const MetricsReport& a, const MetricsReport& b,
                       std::ostream& log) {
  const fs::path dir = stage_dir(root, "compare");
  Comparison c = compare_reports(a, b);
  std::ofstream csv(dir / "comparison.csv");
  csv << comparison_csv(c);
  std::ofstream txt(dir / "comparison.txt");
  txt << comparison_table(c);
  log << comparison_table(c);
  return c;
}

}  // namespace cratergan::stages

namespace cratergan {

ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out,
                                 std::ostream& log) {
  cfg.validate();
  const auto root = out / cfg.run_id();
  stages::write_config(cfg, root);
  stages::run_simgen(cfg, root, log);
  if (!cfg.experiment.real_mosaic.empty()) stages::run_ingest(cfg, root, log);
  stages::run_tile(cfg, root, log);
  stages::run_rasterize(cfg, root, log);
  stages::run_train_translator(cfg, root, log);
  stages::run_translate(cfg, root, log);
  stages::run_train_segmenter(cfg, root, log);
  ExperimentOutcome outcome;
  outcome.run_dir = root;
  std::tie(outcome.sim_trained, outcome.translated_trained) = stages::run_evaluate(cfg, root, log);
  outcome.comparison =
      stages::run_compare(root, outcome.sim_trained, outcome.translated_trained, log);
  return outcome;
}

}  // namespace cratergan
