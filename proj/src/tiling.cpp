#include "cratergan/tiling.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "cratergan/image_io.hpp"

namespace cratergan {

std::vector<int> tile_starts(int length_px, int tile_px, int stride_px, bool flush) {
  if (tile_px <= 0 || stride_px <= 0) throw ConfigError("tile and stride must be positive");
  if (stride_px > tile_px) throw ConfigError("stride larger than tile leaves gaps");
  if (tile_px > length_px) throw ConfigError("tile larger than raster");
  std::vector<int> starts;
  for (int s = 0; s + tile_px <= length_px; s += stride_px) starts.push_back(s);
  if (flush && starts.back() + tile_px < length_px) starts.push_back(length_px - tile_px);
  return starts;
}

std::vector<Tile> slice_raster(const Image& raster, const std::string& parent_id,
                               const TileGridParams& grid) {
  const auto rows = tile_starts(raster.height, grid.tile_px, grid.stride_px, grid.flush);
  const auto cols = tile_starts(raster.width, grid.tile_px, grid.stride_px, grid.flush);
  std::vector<Tile> tiles;
  tiles.reserve(rows.size() * cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      Tile t;
      t.origin_x = cols[c];
      t.origin_y = rows[r];
      t.parent_id = parent_id;
      t.tile_id = parent_id + "_r" + std::to_string(r) + "_c" + std::to_string(c);
      t.pixels = Image(grid.tile_px, grid.tile_px);
      for (int y = 0; y < grid.tile_px; ++y) {
        const float* src = &raster.data[static_cast<std::size_t>(t.origin_y + y) * raster.width +
                                        t.origin_x];
        std::copy(src, src + grid.tile_px, &t.pixels.data[static_cast<std::size_t>(y) * grid.tile_px]);
      }
      tiles.push_back(std::move(t));
    }
  }
  return tiles;
}

double tile_footprint_km2(int tile_px, double pixel_scale_m) {
  if (tile_px <= 0 || !(pixel_scale_m > 0.0)) {
    throw ConfigError("tile_footprint_km2: inputs must be positive");
  }
  const double side_km = tile_px * pixel_scale_m / 1000.0;
  return side_km * side_km;
}

Reassembly reassemble(std::span<const Tile> tiles, int width, int height) {
  Grid<double> sum(width, height, 0.0);
  Reassembly out{Image(width, height), Grid<std::uint16_t>(width, height, 0)};
  for (const auto& t : tiles) {
    for (int y = 0; y < t.pixels.height; ++y) {
      for (int x = 0; x < t.pixels.width; ++x) {
        sum.at(t.origin_x + x, t.origin_y + y) += t.pixels.at(x, y);
        ++out.coverage.at(t.origin_x + x, t.origin_y + y);
      }
    }
  }
  for (std::size_t i = 0; i < sum.size(); ++i) {
    if (out.coverage.data[i] > 0) {
      out.image.data[i] = static_cast<float>(sum.data[i] / out.coverage.data[i]);
    }
  }
  return out;
}

void write_tile_set(const std::filesystem::path& dir, std::span<const Tile> tiles,
                    const std::string& parent_id, const MosaicGeoref& georef,
                    const TileGridParams& grid) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["parent_id"] = parent_id;
  manifest["georef"] = {{"width_px", georef.width_px},
                        {"height_px", georef.height_px},
                        {"pixel_scale_m", georef.pixel_scale_m},
                        {"lat_min_deg", georef.lat_min_deg},
                        {"lat_max_deg", georef.lat_max_deg},
                        {"lon_min_deg", georef.lon_min_deg},
                        {"lon_max_deg", georef.lon_max_deg},
                        {"projection", georef.projection}};
  manifest["grid"] = {{"tile_px", grid.tile_px}, {"stride_px", grid.stride_px},
                      {"flush", grid.flush}};
  auto& entries = manifest["tiles"] = nlohmann::json::array();
  for (const auto& t : tiles) {
    const std::string file = t.tile_id + ".png";
    write_png8(dir / file, t.pixels);
    entries.push_back({{"tile_id", t.tile_id},
                       {"file", file},
                       {"origin_x", t.origin_x},
                       {"origin_y", t.origin_y}});
  }
  std::ofstream out(dir / "tiles.json");
  if (!out) throw RuntimeFailure("cannot write tile manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

}  // namespace cratergan
