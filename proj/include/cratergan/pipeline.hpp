#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cratergan/config.hpp"
#include "cratergan/evalmetrics.hpp"
#include "cratergan/ingest.hpp"
#include "cratergan/segment.hpp"
#include "cratergan/simgen.hpp"
#include "cratergan/tiling.hpp"
#include "cratergan/translate.hpp"

namespace cratergan {

/// Dataset sizes and sources for the end-to-end experiment.
struct ExperimentParams {
  std::uint64_t seed = 0;
  std::string run_id;  // empty: "seed-{seed}"
  int scene_px = 256;  // side of each generated parent scene
  int sim_tiles = 200;
  int real_tiles = 200;  // unpaired target-domain tiles for the translator
  int test_tiles = 50;   // held-out target-domain tiles for evaluation
  double val_fraction = 0.15;  // share of simulated parents held out for validation
  std::string real_mosaic;   // optional real mosaic; pseudo-real scenes otherwise
  std::string real_craters;  // crater CSV for the real mosaic
  double max_radius_km = 16.0;
  double real_test_fraction = 0.2;  // share of mosaic rows held out for testing
  std::string zero_division = "one";  // one | zero

  template <typename V>
  void visit(V&& v) {
    v("seed", seed);
    v("run_id", run_id);
    v("scene_px", scene_px);
    v("sim_tiles", sim_tiles);
    v("real_tiles", real_tiles);
    v("test_tiles", test_tiles);
    v("val_fraction", val_fraction);
    v("real_mosaic", real_mosaic);
    v("real_craters", real_craters);
    v("max_radius_km", max_radius_km);
    v("real_test_fraction", real_test_fraction);
    v("zero_division", zero_division);
  }
};

struct ExperimentConfig {
  ExperimentParams experiment;
  SimSceneSpec sim;
  TileGridParams tiling;
  PseudoRealParams pseudo_real;
  TranslatorConfig translator;
  SegmenterConfig segmenter;
  MosaicGeoref georef;
  CraterSchema crater_schema;

  /// Small networks on 128 px tiles cut from 256 px scenes; the default for
  /// `experiment` when no config file is given.
  static ExperimentConfig desk_scale();

  /// Strict: unknown sections or keys throw ConfigError.
  static ExperimentConfig from_document(const ConfigDocument& doc,
                                        ExperimentConfig base = desk_scale());

  ConfigDocument to_document() const;
  std::string hash() const;
  std::string run_id() const;
  ZeroDivision zero_division() const;
  void validate() const;
};

/// One supervised pair on disk. Paths are relative to the manifest file.
struct ManifestEntry {
  std::string tile_id;
  std::string parent_id;
  std::string tile_path;
  std::string mask_path;
  std::string provenance;  // sim | translated | real
  int origin_x = 0;
  int origin_y = 0;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::string split;  // train | val | test
  std::vector<ManifestEntry> entries;
  std::string config_hash;
  std::uint64_t seed = 0;
  double max_radius_km = std::numeric_limits<double>::infinity();

  void write(const std::filesystem::path& path) const;
  /// Throws ConfigError for a missing or malformed manifest.
  static DatasetManifest read(const std::filesystem::path& path);

  /// Loads tiles and masks, checking that files exist and dimensions agree.
  std::vector<Sample> load_samples(const std::filesystem::path& manifest_path) const;
  std::vector<Tile> load_tiles(const std::filesystem::path& manifest_path) const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Throws ConfigError if any parent id or tile id occurs in more than one
/// manifest.
void check_no_leakage(std::span<const DatasetManifest> manifests);

/// Reads a CSV of circles with columns cx_px, cy_px, r_px (other columns
/// are ignored).
std::vector<PixelCircle> read_circles_csv(const std::filesystem::path& path);

struct ExperimentOutcome {
  std::filesystem::path run_dir;
  MetricsReport sim_trained;
  MetricsReport translated_trained;
  Comparison comparison;
};

/// Generate scenes, tile and rasterize, train the translator, translate the
/// simulated tiles, train one segmenter on raw and one on translated tiles,
/// evaluate both on held-out target-domain tiles and compare.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out,
                                 std::ostream& log);

/// Command-line entry point. Returns 0 on success, 1 on validation errors,
/// 2 on runtime failures.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cratergan
