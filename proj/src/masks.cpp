#include "cratergan/masks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cratergan {

std::size_t BinaryMask::foreground() const {
  return static_cast<std::size_t>(std::count(pixels.data.begin(), pixels.data.end(), 1));
}

BinaryMask rasterize_craters(std::span<const PixelCircle> craters, int width, int height) {
  BinaryMask mask;
  mask.pixels = Grid<std::uint8_t>(width, height, 0);
  for (const auto& c : craters) {
    if (!(c.r >= 0.5)) throw ConfigError("crater radius below 0.5 px");
    const double r2 = c.r * c.r;
    // Pixel centers within [c - r, c + r] along each axis.
    const int x0 = std::max(0, static_cast<int>(std::ceil(c.cx - c.r - 0.5)));
    const int x1 = std::min(width - 1, static_cast<int>(std::floor(c.cx + c.r - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(c.cy - c.r - 0.5)));
    const int y1 = std::min(height - 1, static_cast<int>(std::floor(c.cy + c.r - 0.5)));
    for (int y = y0; y <= y1; ++y) {
      const double dy = y + 0.5 - c.cy;
      for (int x = x0; x <= x1; ++x) {
        const double dx = x + 0.5 - c.cx;
        if (dx * dx + dy * dy <= r2) mask.pixels.at(x, y) = 1;
      }
    }
  }
  return mask;
}

std::vector<PixelCircle> craters_in_tile(std::span<const PixelCircle> projected,
                                         const Tile& tile) {
  const double w = tile.pixels.width;
  const double h = tile.pixels.height;
  std::vector<PixelCircle> kept;
  for (const auto& c : projected) {
    const PixelCircle local{c.cx - tile.origin_x, c.cy - tile.origin_y, c.r};
    const double dx = std::max({0.0 - local.cx, 0.0, local.cx - w});
    const double dy = std::max({0.0 - local.cy, 0.0, local.cy - h});
    if (dx * dx + dy * dy < local.r * local.r) kept.push_back(local);
  }
  return kept;
}

BinaryMask mask_for_tile(std::span<const PixelCircle> parent_frame_craters, const Tile& tile) {
  auto local = craters_in_tile(parent_frame_craters, tile);
  BinaryMask mask = rasterize_craters(local, tile.pixels.width, tile.pixels.height);
  mask.origin_x = tile.origin_x;
  mask.origin_y = tile.origin_y;
  mask.parent_id = tile.parent_id;
  mask.tile_id = tile.tile_id;
  return mask;
}

}  // namespace cratergan
