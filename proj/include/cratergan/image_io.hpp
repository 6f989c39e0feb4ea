#pragma once

#include <filesystem>

#include "cratergan/common.hpp"

namespace cratergan {

/// Reads an 8- or 16-bit grayscale PNG/TIFF into [0, 1]. Color images are
/// converted to gray. Throws RuntimeFailure if the file cannot be decoded.
Image read_grayscale(const std::filesystem::path& path);

/// Writes an image as 8-bit PNG, rounding v * 255 after clamping to [0, 1].
void write_png8(const std::filesystem::path& path, const Image& image);

/// Quantizes to the values an 8-bit PNG round trip would produce.
Image quantize8(const Image& image);

/// Single-channel {0, 255} PNG.
void write_mask_png(const std::filesystem::path& path,
                    const Grid<std::uint8_t>& mask);

/// Reads a mask PNG; any nonzero pixel is foreground (stored as 1).
Grid<std::uint8_t> read_mask_png(const std::filesystem::path& path);

}  // namespace cratergan
