#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cratergan/common.hpp"
#include "cratergan/ingest.hpp"

namespace cratergan {

/// Inputs to the procedural lunar-terrain generator. Lengths are in pixels;
/// heights use the same pixel unit so that slopes are dimensionless.
struct SimSceneSpec {
  std::uint64_t seed = 0;
  int width_px = 512;
  int height_px = 512;
  double crater_density = 400.0;  // craters per megapixel
  double sfd_exponent = 2.0;
  double r_min_px = 3.0;
  double r_max_px = 40.0;
  double side_length_cap_px = 200.0;
  double depth_ratio = 0.2;  // depth / diameter
  double rim_ratio = 0.04;   // rim height / diameter
  double edge_decay = 0.1;   // exterior rim decay length, in crater radii
  double age_min = 0.0;
  double age_max = 0.8;
  double sun_azimuth_deg = 90.0;  // clockwise from north (image up)
  double sun_elevation_deg = 30.0;
  double base_noise_amplitude = 2.0;
  int base_noise_octaves = 4;
  double base_noise_cell_px = 64.0;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;

  template <typename V>
  void visit(V&& v) {
    v("seed", seed);
    v("width_px", width_px);
    v("height_px", height_px);
    v("crater_density", crater_density);
    v("sfd_exponent", sfd_exponent);
    v("r_min_px", r_min_px);
    v("r_max_px", r_max_px);
    v("side_length_cap_px", side_length_cap_px);
    v("depth_ratio", depth_ratio);
    v("rim_ratio", rim_ratio);
    v("edge_decay", edge_decay);
    v("age_min", age_min);
    v("age_max", age_max);
    v("sun_azimuth_deg", sun_azimuth_deg);
    v("sun_elevation_deg", sun_elevation_deg);
    v("base_noise_amplitude", base_noise_amplitude);
    v("base_noise_octaves", base_noise_octaves);
    v("base_noise_cell_px", base_noise_cell_px);
  }
};

/// Exact ground truth for one generated crater.
struct CraterPlacement {
  double cx_px = 0.0;
  double cy_px = 0.0;
  double r_px = 0.0;
  double age = 0.0;
  double depth_px = 0.0;

  friend bool operator==(const CraterPlacement&, const CraterPlacement&) = default;
};

using Heightfield = Grid<double>;

struct SimScene {
  GeoRaster raster;
  Heightfield heights;
  std::vector<CraterPlacement> placements;
};

/// Inverse CDF of the power law p(r) ~ r^-alpha truncated to [r_min, r_max].
double truncated_power_law_quantile(double u, double r_min, double r_max, double alpha);
double truncated_power_law_cdf(double r, double r_min, double r_max, double alpha);

/// Draws round(density * megapixels) craters with power-law radii, uniform
/// centers and uniform ages.
std::vector<CraterPlacement> sample_craters(const SimSceneSpec& spec, Rng& rng);

/// Height change at normalized distance d_norm (in crater radii) from the
/// center of a crater of radius r_px: parabolic bowl reaching -depth at the
/// center, rim of height rim_ratio * 2r at d_norm = 1, exponential decay
/// outside. Scaled by (1 - age). Blur is applied at composition time.
double crater_profile(double d_norm, double r_px, const SimSceneSpec& spec, double age);

/// Multi-octave value noise (lacunarity 2, persistence 0.5).
Heightfield value_noise(int width, int height, int octaves, double amplitude,
                        double cell_px, std::uint64_t seed);

/// Base terrain plus every crater's profile, composed additively.
Heightfield compose_heightfield(const SimSceneSpec& spec,
                                std::span<const CraterPlacement> placements);

/// Lambertian hillshade with central-difference normals. Flat terrain maps
/// to 0.5; output clamped to [0, 1].
Image shade(const Heightfield& hf, double sun_azimuth_deg, double sun_elevation_deg);

/// Full scene: sampled craters, heightfield and rendered image.
SimScene generate_scene(const SimSceneSpec& spec);

/// Placements as mask-ready circles.
std::vector<PixelCircle> placement_circles(std::span<const CraterPlacement> placements);

/// CSV with columns cx_px,cy_px,r_px,age (plus depth_px).
void write_placements_csv(const std::filesystem::path& path,
                          std::span<const CraterPlacement> placements);
std::vector<CraterPlacement> read_placements_csv(const std::filesystem::path& path);

/// Fixed corruption producing the pseudo-real target domain: low-frequency
/// albedo mottling, Gaussian blur, gamma, additive Gaussian noise.
struct PseudoRealParams {
  double blur_sigma = 1.5;
  double noise_sigma = 0.05;
  double gamma = 0.8;
  double mottling_amplitude = 0.15;
  double mottling_cell_px = 96.0;

  template <typename V>
  void visit(V&& v) {
    v("blur_sigma", blur_sigma);
    v("noise_sigma", noise_sigma);
    v("gamma", gamma);
    v("mottling_amplitude", mottling_amplitude);
    v("mottling_cell_px", mottling_cell_px);
  }
};

Image corrupt_pseudo_real(const Image& image, const PseudoRealParams& params,
                          std::uint64_t seed);

}  // namespace cratergan
