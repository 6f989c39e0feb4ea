#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cratergan/common.hpp"

namespace cratergan {

/// One crater from a crater database. Craters are treated as circles.
struct CraterRecord {
  std::string id;
  double lat_deg = 0.0;
  double lon_deg = 0.0;  // normalized to [0, 360)
  double radius_km = 0.0;

  friend bool operator==(const CraterRecord&, const CraterRecord&) = default;
};

/// Maps crater-database CSV header names onto CraterRecord fields.
struct CraterSchema {
  std::string id_column = "id";
  std::string lat_column = "lat";
  std::string lon_column = "lon";
  std::string radius_column = "radius_km";
  std::string radius_unit = "km";  // "km" or "m"

  template <typename V>
  void visit(V&& v) {
    v("id_column", id_column);
    v("lat_column", lat_column);
    v("lon_column", lon_column);
    v("radius_column", radius_column);
    v("radius_unit", radius_unit);
  }
};

struct CraterLoadResult {
  std::vector<CraterRecord> records;
  std::size_t skipped = 0;
};

/// Equirectangular georeferencing of a global mosaic.
struct MosaicGeoref {
  int width_px = 0;
  int height_px = 0;
  double pixel_scale_m = 100.0;
  double lat_min_deg = -60.0;
  double lat_max_deg = 60.0;
  double lon_min_deg = 0.0;
  double lon_max_deg = 360.0;
  std::string projection = "equirectangular";

  double lat_span() const { return lat_max_deg - lat_min_deg; }
  double lon_span() const { return lon_max_deg - lon_min_deg; }

  /// Throws ConfigError on an invalid georeference.
  void validate() const;

  template <typename V>
  void visit(V&& v) {
    v("pixel_scale_m", pixel_scale_m);
    v("lat_min_deg", lat_min_deg);
    v("lat_max_deg", lat_max_deg);
    v("lon_min_deg", lon_min_deg);
    v("lon_max_deg", lon_max_deg);
    v("projection", projection);
  }
};

struct GeoRaster {
  MosaicGeoref georef;
  Image pixels;
};

/// A circle in pixel coordinates of some frame.
struct PixelCircle {
  double cx = 0.0;
  double cy = 0.0;
  double r = 0.0;
};

struct ProjectedCrater {
  PixelCircle circle;
  bool in_bounds = false;
};

/// Wraps longitude into [0, 360).
double normalize_lon(double lon_deg);

/// Parses a crater CSV. Rows with missing or non-numeric mandatory fields, or
/// out-of-domain values, are skipped and counted. Throws ConfigError for a
/// missing file or a header lacking a mapped column.
CraterLoadResult load_crater_db(const std::filesystem::path& path,
                                const CraterSchema& schema = {});

/// Keeps records with radius_km strictly below max_radius_km, in order.
std::vector<CraterRecord> filter_craters(
    std::span<const CraterRecord> records,
    double max_radius_km = std::numeric_limits<double>::infinity());

/// Projects a crater onto mosaic pixel coordinates. Craters outside the
/// mosaic's latitude band come back with in_bounds == false.
ProjectedCrater project_to_pixel(const CraterRecord& rec,
                                 const MosaicGeoref& georef);

/// Inverse of the position part of project_to_pixel: (cx, cy) -> (lat, lon).
std::pair<double, double> pixel_to_latlon(double cx, double cy,
                                          const MosaicGeoref& georef);

/// Loads an 8- or 16-bit grayscale mosaic, normalized to [0, 1]. The image
/// dimensions override georef.width_px / height_px.
GeoRaster load_mosaic(const std::filesystem::path& path, MosaicGeoref georef);

}  // namespace cratergan
