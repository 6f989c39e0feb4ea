#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cratergan/common.hpp"
#include "cratergan/ingest.hpp"
#include "cratergan/tiling.hpp"

namespace cratergan {

/// Pixel-aligned crater mask; pixels hold 0 (background) or 1 (crater).
struct BinaryMask {
  Grid<std::uint8_t> pixels;
  int origin_x = 0;
  int origin_y = 0;
  std::string parent_id;
  std::string tile_id;

  std::size_t foreground() const;
};

/// Filled-disk rasterization: pixel (x, y) is foreground iff its center
/// (x + 0.5, y + 0.5) lies within some crater's radius. Craters with
/// r < 0.5 are rejected with ConfigError.
BinaryMask rasterize_craters(std::span<const PixelCircle> craters, int width, int height);

/// Translates parent-frame circles into the tile frame and keeps those whose
/// disk intersects the tile rectangle.
std::vector<PixelCircle> craters_in_tile(std::span<const PixelCircle> projected,
                                         const Tile& tile);

/// Mask for a tile, with metadata copied from it.
BinaryMask mask_for_tile(std::span<const PixelCircle> parent_frame_craters, const Tile& tile);

}  // namespace cratergan
