#include "cratergan/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

namespace cratergan {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

// Exterior rim contribution is negligible (exp(-14) ~ 1e-6) beyond this many
// decay lengths; crater patches are truncated there.
constexpr double kDecayLengthsKept = 14.0;

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

double lattice_value(std::uint64_t seed, int octave, std::int64_t i, std::int64_t j) {
  std::uint64_t h = Rng::mix(seed ^ (static_cast<std::uint64_t>(octave) * 0xD6E8FEB86659FD93ULL));
  h = Rng::mix(h ^ static_cast<std::uint64_t>(i) * 0x9E3779B97F4A7C15ULL);
  h = Rng::mix(h ^ static_cast<std::uint64_t>(j) * 0xC2B2AE3D27D4EB4FULL);
  return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

void gaussian_blur_inplace(cv::Mat& m, double sigma, int border) {
  if (sigma <= 0.0) return;
  cv::GaussianBlur(m, m, cv::Size(0, 0), sigma, sigma, border);
}

}  // namespace

void SimSceneSpec::validate() const {
  if (width_px <= 0 || height_px <= 0) throw ConfigError("sim: width/height must be positive");
  if (!(crater_density >= 0.0)) throw ConfigError("sim: crater_density must be >= 0");
  if (!(sfd_exponent > 0.0)) throw ConfigError("sim: sfd_exponent must be > 0");
  if (!(r_min_px >= 0.5) || !(r_min_px < r_max_px)) {
    throw ConfigError("sim: need 0.5 <= r_min_px < r_max_px");
  }
  if (2.0 * r_max_px > side_length_cap_px) {
    throw ConfigError("sim: crater diameter 2*r_max_px exceeds side_length_cap_px");
  }
  if (!(edge_decay >= 0.0)) throw ConfigError("sim: edge_decay must be >= 0");
  if (!(depth_ratio >= 0.0) || !(rim_ratio >= 0.0)) {
    throw ConfigError("sim: depth_ratio and rim_ratio must be >= 0");
  }
  if (!(age_min >= 0.0 && age_max <= 1.0 && age_min <= age_max)) {
    throw ConfigError("sim: age range must satisfy 0 <= age_min <= age_max <= 1");
  }
  if (!(sun_elevation_deg > 0.0 && sun_elevation_deg <= 90.0)) {
    throw ConfigError("sim: sun_elevation_deg must be in (0, 90]");
  }
  if (base_noise_octaves < 0 || !(base_noise_amplitude >= 0.0) || !(base_noise_cell_px > 0.0)) {
    throw ConfigError("sim: invalid base noise parameters");
  }
}

double truncated_power_law_quantile(double u, double r_min, double r_max, double alpha) {
  if (std::abs(alpha - 1.0) < 1e-12) {
    return r_min * std::pow(r_max / r_min, u);
  }
  const double e = 1.0 - alpha;
  const double lo = std::pow(r_min, e);
  const double hi = std::pow(r_max, e);
  return std::pow(lo + u * (hi - lo), 1.0 / e);
}

double truncated_power_law_cdf(double r, double r_min, double r_max, double alpha) {
  if (r <= r_min) return 0.0;
  if (r >= r_max) return 1.0;
  if (std::abs(alpha - 1.0) < 1e-12) return std::log(r / r_min) / std::log(r_max / r_min);
  const double e = 1.0 - alpha;
  return (std::pow(r, e) - std::pow(r_min, e)) / (std::pow(r_max, e) - std::pow(r_min, e));
}

std::vector<CraterPlacement> sample_craters(const SimSceneSpec& spec, Rng& rng) {
  spec.validate();
  const double megapixels =
      static_cast<double>(spec.width_px) * static_cast<double>(spec.height_px) / 1e6;
  const auto count = static_cast<std::size_t>(std::llround(spec.crater_density * megapixels));
  std::vector<CraterPlacement> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    CraterPlacement p;
    p.r_px = truncated_power_law_quantile(rng.uniform(), spec.r_min_px, spec.r_max_px,
                                          spec.sfd_exponent);
    p.r_px = std::clamp(p.r_px, spec.r_min_px, spec.r_max_px);
    p.cx_px = rng.uniform(0.0, spec.width_px);
    p.cy_px = rng.uniform(0.0, spec.height_px);
    p.age = rng.uniform(spec.age_min, spec.age_max);
    p.depth_px = spec.depth_ratio * 2.0 * p.r_px;
    out.push_back(p);
  }
  return out;
}

double crater_profile(double d_norm, double r_px, const SimSceneSpec& spec, double age) {
  const double depth = spec.depth_ratio * 2.0 * r_px;
  const double rim = spec.rim_ratio * 2.0 * r_px;
  double h = 0.0;
  if (d_norm < 1.0) {
    h = -depth + (depth + rim) * d_norm * d_norm;
  } else if (d_norm == 1.0) {
    h = rim;
  } else if (spec.edge_decay > 0.0) {
    h = rim * std::exp(-(d_norm - 1.0) / spec.edge_decay);
  }
  return h * (1.0 - age);
}

Heightfield value_noise(int width, int height, int octaves, double amplitude,
                        double cell_px, std::uint64_t seed) {
  Heightfield hf(width, height, 0.0);
  if (octaves <= 0 || amplitude == 0.0) return hf;
  double norm = 0.0;
  for (int o = 0; o < octaves; ++o) norm += std::pow(0.5, o);

  for (int o = 0; o < octaves; ++o) {
    const double cell = cell_px / std::pow(2.0, o);
    const double amp = amplitude * std::pow(0.5, o) / norm;
    for (int y = 0; y < height; ++y) {
      const double fy = (y + 0.5) / cell;
      const auto j = static_cast<std::int64_t>(std::floor(fy));
      const double ty = smoothstep(fy - j);
      for (int x = 0; x < width; ++x) {
        const double fx = (x + 0.5) / cell;
        const auto i = static_cast<std::int64_t>(std::floor(fx));
        const double tx = smoothstep(fx - i);
        const double v00 = lattice_value(seed, o, i, j);
        const double v10 = lattice_value(seed, o, i + 1, j);
        const double v01 = lattice_value(seed, o, i, j + 1);
        const double v11 = lattice_value(seed, o, i + 1, j + 1);
        const double top = v00 + (v10 - v00) * tx;
        const double bot = v01 + (v11 - v01) * tx;
        hf.at(x, y) += amp * (top + (bot - top) * ty);
      }
    }
  }
  return hf;
}

Heightfield compose_heightfield(const SimSceneSpec& spec,
                                std::span<const CraterPlacement> placements) {
  Heightfield hf = value_noise(spec.width_px, spec.height_px, spec.base_noise_octaves,
                               spec.base_noise_amplitude, spec.base_noise_cell_px,
                               Rng::mix(spec.seed ^ 0xA5A5A5A5DEADBEEFULL));

  for (const auto& p : placements) {
    const double sigma = p.age * p.r_px / 4.0;
    const double reach = p.r_px * (1.0 + kDecayLengthsKept * spec.edge_decay) +
                         std::ceil(4.0 * sigma) + 1.0;
    const int x0 = static_cast<int>(std::floor(p.cx_px - reach));
    const int y0 = static_cast<int>(std::floor(p.cy_px - reach));
    const int x1 = static_cast<int>(std::ceil(p.cx_px + reach));
    const int y1 = static_cast<int>(std::ceil(p.cy_px + reach));
    if (x1 < 0 || y1 < 0 || x0 >= spec.width_px || y0 >= spec.height_px) continue;

    cv::Mat patch(y1 - y0, x1 - x0, CV_64F);
    for (int y = y0; y < y1; ++y) {
      auto* row = patch.ptr<double>(y - y0);
      for (int x = x0; x < x1; ++x) {
        const double d = std::hypot(x + 0.5 - p.cx_px, y + 0.5 - p.cy_px) / p.r_px;
        row[x - x0] = crater_profile(d, p.r_px, spec, p.age);
      }
    }
    if (sigma >= 0.25) gaussian_blur_inplace(patch, sigma, cv::BORDER_CONSTANT);

    for (int y = std::max(y0, 0); y < std::min(y1, spec.height_px); ++y) {
      const auto* row = patch.ptr<double>(y - y0);
      for (int x = std::max(x0, 0); x < std::min(x1, spec.width_px); ++x) {
        hf.at(x, y) += row[x - x0];
      }
    }
  }
  return hf;
}

Image shade(const Heightfield& hf, double sun_azimuth_deg, double sun_elevation_deg) {
  if (!(sun_elevation_deg > 0.0 && sun_elevation_deg <= 90.0)) {
    throw ConfigError("shade: sun elevation must be in (0, 90]");
  }
  const double az = sun_azimuth_deg * kDegToRad;
  const double el = sun_elevation_deg * kDegToRad;
  // Image frame: +x east, +y south, +z up.
  const double sx = std::sin(az) * std::cos(el);
  const double sy = -std::cos(az) * std::cos(el);
  const double sz = std::sin(el);
  const double gain = 0.5 / sz;

  Image out(hf.width, hf.height);
  for (int y = 0; y < hf.height; ++y) {
    const int ym = std::max(y - 1, 0), yp = std::min(y + 1, hf.height - 1);
    for (int x = 0; x < hf.width; ++x) {
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, hf.width - 1);
      const double gx = xp > xm ? (hf.at(xp, y) - hf.at(xm, y)) / (xp - xm) : 0.0;
      const double gy = yp > ym ? (hf.at(x, yp) - hf.at(x, ym)) / (yp - ym) : 0.0;
      const double inv_norm = 1.0 / std::sqrt(gx * gx + gy * gy + 1.0);
      const double lambert = std::max(0.0, (-gx * sx - gy * sy + sz) * inv_norm);
      out.at(x, y) = static_cast<float>(std::clamp(gain * lambert, 0.0, 1.0));
    }
  }
  return out;
}

SimScene generate_scene(const SimSceneSpec& spec) {
  spec.validate();
  SimScene scene;
  Rng rng(spec.seed);
  scene.placements = sample_craters(spec, rng);
  scene.heights = compose_heightfield(spec, scene.placements);
  scene.raster.pixels = shade(scene.heights, spec.sun_azimuth_deg, spec.sun_elevation_deg);
  scene.raster.georef.width_px = spec.width_px;
  scene.raster.georef.height_px = spec.height_px;
  return scene;
}

std::vector<PixelCircle> placement_circles(std::span<const CraterPlacement> placements) {
  std::vector<PixelCircle> out;
  out.reserve(placements.size());
  for (const auto& p : placements) out.push_back({p.cx_px, p.cy_px, p.r_px});
  return out;
}

void write_placements_csv(const std::filesystem::path& path,
                          std::span<const CraterPlacement> placements) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << "cx_px,cy_px,r_px,age,depth_px\n";
  out.precision(17);
  for (const auto& p : placements) {
    out << p.cx_px << ',' << p.cy_px << ',' << p.r_px << ',' << p.age << ',' << p.depth_px
        << '\n';
  }
}

std::vector<CraterPlacement> read_placements_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("placements file not found: " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<CraterPlacement> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    CraterPlacement p;
    char comma = 0;
    if (!(row >> p.cx_px >> comma >> p.cy_px >> comma >> p.r_px >> comma >> p.age)) {
      throw ConfigError("malformed placements row in " + path.string() + ": " + line);
    }
    if (row >> comma) row >> p.depth_px;
    out.push_back(p);
  }
  return out;
}

Image corrupt_pseudo_real(const Image& image, const PseudoRealParams& params,
                          std::uint64_t seed) {
  Heightfield mottle = value_noise(image.width, image.height, 2, 1.0,
                                   params.mottling_cell_px, Rng::mix(seed ^ 0x5EED0F00DULL));
  cv::Mat work(image.height, image.width, CV_64F);
  for (int y = 0; y < image.height; ++y) {
    auto* row = work.ptr<double>(y);
    for (int x = 0; x < image.width; ++x) {
      row[x] = image.at(x, y) * (1.0 + params.mottling_amplitude * mottle.at(x, y));
    }
  }
  gaussian_blur_inplace(work, params.blur_sigma, cv::BORDER_REFLECT);

  Rng noise(Rng::mix(seed ^ 0x0BADC0FFEEULL));
  Image out(image.width, image.height);
  for (int y = 0; y < image.height; ++y) {
    const auto* row = work.ptr<double>(y);
    for (int x = 0; x < image.width; ++x) {
      double v = std::pow(std::max(row[x], 0.0), params.gamma);
      v += params.noise_sigma * noise.normal();
      out.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return out;
}

}  // namespace cratergan
