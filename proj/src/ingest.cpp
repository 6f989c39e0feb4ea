#include "cratergan/ingest.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <unordered_map>

#include "cratergan/image_io.hpp"

namespace cratergan {
namespace {

// Splits one CSV line, honouring double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::optional<double> parse_double(const std::string& text) {
  std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

}  // namespace

void MosaicGeoref::validate() const {
  if (width_px <= 0 || height_px <= 0) {
    throw ConfigError("georef: width/height must be positive");
  }
  if (!(pixel_scale_m > 0.0)) throw ConfigError("georef: pixel_scale_m must be > 0");
  if (!(lat_max_deg > lat_min_deg)) throw ConfigError("georef: empty latitude band");
  if (!(lon_span() > 0.0)) throw ConfigError("georef: empty longitude span");
  if (projection != "equirectangular") {
    throw ConfigError("georef: unsupported projection '" + projection + "'");
  }
}

double normalize_lon(double lon_deg) {
  double l = std::fmod(lon_deg, 360.0);
  if (l < 0.0) l += 360.0;
  if (l >= 360.0) l -= 360.0;
  return l;
}

CraterLoadResult load_crater_db(const std::filesystem::path& path,
                                const CraterSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ConfigError("crater database not found: " + path.string());

  double radius_scale = 1.0;
  if (schema.radius_unit == "m") {
    radius_scale = 1e-3;
  } else if (schema.radius_unit != "km") {
    throw ConfigError("unknown radius unit '" + schema.radius_unit + "'");
  }

  std::string line;
  if (!std::getline(in, line)) throw ConfigError("crater database is empty: " + path.string());
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::unordered_map<std::string, std::size_t> column;
  auto header = split_csv_line(line);
  for (std::size_t i = 0; i < header.size(); ++i) column[trim(header[i])] = i;

  auto index_of = [&](const std::string& name) {
    auto it = column.find(name);
    if (it == column.end()) {
      throw ConfigError("crater database header lacks column '" + name + "'");
    }
    return it->second;
  };
  const std::size_t id_col = index_of(schema.id_column);
  const std::size_t lat_col = index_of(schema.lat_column);
  const std::size_t lon_col = index_of(schema.lon_column);
  const std::size_t rad_col = index_of(schema.radius_column);
  const std::size_t needed = std::max({id_col, lat_col, lon_col, rad_col}) + 1;

  CraterLoadResult result;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() < needed) {
      ++result.skipped;
      continue;
    }
    std::string id = trim(fields[id_col]);
    auto lat = parse_double(fields[lat_col]);
    auto lon = parse_double(fields[lon_col]);
    auto rad = parse_double(fields[rad_col]);
    if (id.empty() || !lat || !lon || !rad || *lat < -90.0 || *lat > 90.0 ||
        !(*rad > 0.0)) {
      ++result.skipped;
      continue;
    }
    result.records.push_back({std::move(id), *lat, normalize_lon(*lon), *rad * radius_scale});
  }
  return result;
}

std::vector<CraterRecord> filter_craters(std::span<const CraterRecord> records,
                                         double max_radius_km) {
  if (!(max_radius_km > 0.0)) throw ConfigError("max_radius_km must be > 0");
  std::vector<CraterRecord> out;
  for (const auto& r : records) {
    if (r.radius_km < max_radius_km) out.push_back(r);
  }
  return out;
}

ProjectedCrater project_to_pixel(const CraterRecord& rec, const MosaicGeoref& georef) {
  ProjectedCrater out;
  out.circle.r = rec.radius_km * 1000.0 / georef.pixel_scale_m;
  if (rec.lat_deg < georef.lat_min_deg || rec.lat_deg > georef.lat_max_deg) {
    return out;
  }
  out.circle.cx = (rec.lon_deg - georef.lon_min_deg) / georef.lon_span() * georef.width_px;
  out.circle.cy = (georef.lat_max_deg - rec.lat_deg) / georef.lat_span() * georef.height_px;
  out.in_bounds = true;
  return out;
}

std::pair<double, double> pixel_to_latlon(double cx, double cy,
                                          const MosaicGeoref& georef) {
  double lon = georef.lon_min_deg + cx / georef.width_px * georef.lon_span();
  double lat = georef.lat_max_deg - cy / georef.height_px * georef.lat_span();
  return {lat, lon};
}

GeoRaster load_mosaic(const std::filesystem::path& path, MosaicGeoref georef) {
  GeoRaster raster;
  raster.pixels = read_grayscale(path);
  georef.width_px = raster.pixels.width;
  georef.height_px = raster.pixels.height;
  georef.validate();
  raster.georef = georef;
  return raster;
}

}  // namespace cratergan
