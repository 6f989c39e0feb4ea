#pragma once

#include <filesystem>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cratergan/pipeline.hpp"

namespace cratergan::stages {

namespace fs = std::filesystem;

/// "{run_root}/{stage}", created if missing.
fs::path stage_dir(const fs::path& run_root, const std::string& stage);

/// Path of `target` relative to `base`, with forward slashes.
std::string relative_to(const fs::path& target, const fs::path& base);

struct SceneFiles {
  std::string id;
  fs::path image;
  fs::path craters;
};

/// Renders a scene and writes "{id}.png" plus "{id}.csv" (its placements).
/// With `corruption` set, the image is passed through the pseudo-real
/// corruption first.
SceneFiles write_scene(const SimSceneSpec& spec, const std::string& id, const fs::path& dir,
                       const PseudoRealParams* corruption = nullptr,
                       std::uint64_t corruption_seed = 0);

/// Slices an image file and writes "{tile_id}.png" for at most `max_tiles`
/// tiles in grid order. Returned tiles carry the pixels exactly as stored.
std::vector<Tile> tile_image_file(const fs::path& image, const std::string& parent_id,
                                  const TileGridParams& grid, const fs::path& dir,
                                  const std::string& provenance = "sim",
                                  std::size_t max_tiles = SIZE_MAX);

/// Writes "{tile_id}_mask.png" for each tile into `mask_dir` and returns
/// manifest entries whose paths are relative to `manifest_dir`.
std::vector<ManifestEntry> rasterize_tiles(std::span<const Tile> tiles,
                                           std::span<const PixelCircle> parent_craters,
                                           const fs::path& tile_dir, const fs::path& mask_dir,
                                           const fs::path& manifest_dir);

/// Translates every tile of a manifest into `out_dir`; the returned manifest
/// (to be written at `out_manifest`) keeps the source masks.
DatasetManifest translate_manifest(TranslatorState& state, const DatasetManifest& src,
                                   const fs::path& src_manifest, const fs::path& out_dir,
                                   const fs::path& out_manifest);

/// Segmenter training on manifest pairs; the best-validation weights are
/// restored before the checkpoint and loss CSV are written into `dir`.
std::unique_ptr<SegmenterState> train_segmenter_stage(const fs::path& train_manifest,
                                                      const fs::path& val_manifest,
                                                      const SegmenterConfig& cfg,
                                                      const fs::path& dir, std::ostream& log,
                                                      const std::string& label);

MetricsReport evaluate_manifest(SegmenterState& state, const fs::path& manifest, double threshold,
                                ZeroDivision policy, const std::string& model_id);

// Whole stages of the experiment. Each reads its inputs from earlier stage
// directories under `root` and writes only into its own.
void run_simgen(const ExperimentConfig& cfg, const fs::path& root, std::ostream& log);
void run_ingest(const ExperimentConfig& cfg, const fs::path& root, std::ostream& log);
void run_tile(const ExperimentConfig& cfg, const fs::path& root, std::ostream& log);
void run_rasterize(const ExperimentConfig& cfg, const fs::path& root, std::ostream& log);
void run_train_translator(const ExperimentConfig& cfg, const fs::path& root, std::ostream& log);
void run_translate(const ExperimentConfig& cfg, const fs::path& root, std::ostream& log);
void run_train_segmenter(const ExperimentConfig& cfg, const fs::path& root, std::ostream& log);
std::pair<MetricsReport, MetricsReport> run_evaluate(const ExperimentConfig& cfg,
                                                     const fs::path& root, std::ostream& log);
Comparison run_compare(const fs::path& root, const MetricsReport& a, const MetricsReport& b,
                       std::ostream& log);

/// Writes the resolved config as "{dir}/config.toml".
void write_config(const ExperimentConfig& cfg, const fs::path& dir);

}  // namespace cratergan::stages
