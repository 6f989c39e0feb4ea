#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cratergan/common.hpp"
#include "cratergan/ingest.hpp"

namespace cratergan {

inline constexpr int kDefaultTilePx = 416;
inline constexpr int kDefaultStridePx = 208;

/// A fully contained square crop of a parent raster.
struct Tile {
  Image pixels;
  int origin_x = 0;
  int origin_y = 0;
  std::string parent_id;
  std::string tile_id;
  std::string provenance = "sim";  // sim | translated | real
};

struct TileGridParams {
  int tile_px = kDefaultTilePx;
  int stride_px = kDefaultStridePx;
  bool flush = false;  // add a final start at length - tile when the grid leaves a margin

  template <typename V>
  void visit(V&& v) {
    v("tile_px", tile_px);
    v("stride_px", stride_px);
    v("flush", flush);
  }
};

/// Start offsets {0, s, 2s, ...} with start + tile <= length. Throws
/// ConfigError("tile larger than raster") when tile_px > length_px.
std::vector<int> tile_starts(int length_px, int tile_px, int stride_px, bool flush = false);

/// Crops every grid tile. Tile ids are "{parent_id}_r{row}_c{col}".
std::vector<Tile> slice_raster(const Image& raster, const std::string& parent_id,
                               const TileGridParams& grid = {});

/// Area covered by a tile, in km^2.
double tile_footprint_km2(int tile_px, double pixel_scale_m);

struct Reassembly {
  Image image;                     // mean of overlapping copies, 0 where uncovered
  Grid<std::uint16_t> coverage;  // number of tiles covering each pixel
};

/// Averages tiles back into a parent-sized frame.
Reassembly reassemble(std::span<const Tile> tiles, int width, int height);

/// Writes "{dir}/{tile_id}.png" for each tile plus a JSON manifest recording
/// the parent, georef, grid parameters and every tile origin.
void write_tile_set(const std::filesystem::path& dir, std::span<const Tile> tiles,
                    const std::string& parent_id, const MosaicGeoref& georef,
                    const TileGridParams& grid);

}  // namespace cratergan
