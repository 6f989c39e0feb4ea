#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "cratergan/image_io.hpp"
#include "cratergan/pipeline.hpp"

namespace cratergan {

void DatasetManifest::write(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["split"] = split;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["filter"]["max_radius_km"] =
      std::isfinite(max_radius_km) ? nlohmann::json(max_radius_km) : nlohmann::json(nullptr);
  auto& arr = j["entries"] = nlohmann::json::array();
  for (const auto& e : entries) {
    arr.push_back({{"tile_id", e.tile_id},
                   {"parent_id", e.parent_id},
                   {"tile_path", e.tile_path},
                   {"mask_path", e.mask_path},
                   {"provenance", e.provenance},
                   {"origin_x", e.origin_x},
                   {"origin_y", e.origin_y}});
  }
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
}

DatasetManifest DatasetManifest::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("manifest not found: " + path.string());
  DatasetManifest m;
  try {
    const auto j = nlohmann::json::parse(in);
    m.split = j.at("split").get<std::string>();
    m.config_hash = j.value("config_hash", "");
    m.seed = j.value("seed", std::uint64_t{0});
    const auto& radius = j.at("filter").at("max_radius_km");
    m.max_radius_km =
        radius.is_null() ? std::numeric_limits<double>::infinity() : radius.get<double>();
    for (const auto& e : j.at("entries")) {
      m.entries.push_back({e.at("tile_id").get<std::string>(), e.at("parent_id").get<std::string>(),
                           e.at("tile_path").get<std::string>(), e.at("mask_path").get<std::string>(),
                           e.at("provenance").get<std::string>(), e.at("origin_x").get<int>(),
                           e.at("origin_y").get<int>()});
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError("malformed manifest " + path.string() + ": " + ex.what());
  }
  return m;
}

std::vector<Tile> DatasetManifest::load_tiles(const std::filesystem::path& manifest_path) const {
  const auto base = manifest_path.parent_path();
  std::vector<Tile> tiles;
  tiles.reserve(entries.size());
  for (const auto& e : entries) {
    Tile t;
    t.pixels = read_grayscale(base / e.tile_path);
    t.origin_x = e.origin_x;
    t.origin_y = e.origin_y;
    t.parent_id = e.parent_id;
    t.tile_id = e.tile_id;
    t.provenance = e.provenance;
    tiles.push_back(std::move(t));
  }
  return tiles;
}

std::vector<Sample> DatasetManifest::load_samples(const std::filesystem::path& manifest_path) const {
  const auto base = manifest_path.parent_path();
  auto tiles = load_tiles(manifest_path);
  std::vector<Sample> samples;
  samples.reserve(tiles.size());
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    BinaryMask mask;
    mask.pixels = read_mask_png(base / entries[i].mask_path);
    mask.origin_x = tiles[i].origin_x;
    mask.origin_y = tiles[i].origin_y;
    mask.parent_id = tiles[i].parent_id;
    mask.tile_id = tiles[i].tile_id;
    samples.push_back(make_sample(std::move(tiles[i]), std::move(mask)));
  }
  return samples;
}

void check_no_leakage(std::span<const DatasetManifest> manifests) {
  std::unordered_map<std::string, std::size_t> parent_owner;
  std::unordered_map<std::string, std::size_t> tile_owner;
  for (std::size_t m = 0; m < manifests.size(); ++m) {
    for (const auto& e : manifests[m].entries) {
      auto [pit, pnew] = parent_owner.emplace(e.parent_id, m);
      if (!pnew && pit->second != m) {
        throw ConfigError("parent '" + e.parent_id + "' appears in splits '" +
                          manifests[pit->second].split + "' and '" + manifests[m].split + "'");
      }
      auto [tit, tnew] = tile_owner.emplace(e.tile_id, m);
      if (!tnew) throw ConfigError("tile id '" + e.tile_id + "' is duplicated");
    }
  }
}

std::vector<PixelCircle> read_circles_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("crater file not found: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("crater file is empty: " + path.string());
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string f;
    while (std::getline(ss, f, ',')) out.push_back(f);
    return out;
  };
  std::map<std::string, std::size_t> col;
  const auto header = split(line);
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* need : {"cx_px", "cy_px", "r_px"}) {
    if (!col.contains(need)) {
      throw ConfigError(path.string() + ": header lacks column '" + need + "'");
    }
  }
  std::vector<PixelCircle> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    try {
      out.push_back({std::stod(f.at(col["cx_px"])), std::stod(f.at(col["cy_px"])),
                     std::stod(f.at(col["r_px"]))});
    } catch (const std::exception&) {
      throw ConfigError(path.string() + ": malformed row '" + line + "'");
    }
  }
  return out;
}

}  // namespace cratergan
