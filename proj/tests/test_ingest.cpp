#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "cratergan/image_io.hpp"
#include "cratergan/ingest.hpp"

using namespace cratergan;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& text) {
  const auto dir = fs::temp_directory_path() / "cratergan_ingest_test";
  fs::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path) << text;
  return path;
}

CraterSchema rad_schema() {
  CraterSchema s;
  s.radius_column = "rad";
  return s;
}

}  // namespace

TEST(LoadCraterDb, SkipsMalformedRows) {
  const auto path = write_temp("bad.csv", "id,lat,lon,rad\nA,10,20,3\nB,x,5,1\n");
  const auto res = load_crater_db(path, rad_schema());
  ASSERT_EQ(res.records.size(), 1u);
  EXPECT_EQ(res.records[0].id, "A");
  EXPECT_EQ(res.skipped, 1u);
}

TEST(LoadCraterDb, HeaderOnlyIsEmpty) {
  const auto res = load_crater_db(write_temp("empty.csv", "id,lat,lon,rad\n"), rad_schema());
  EXPECT_TRUE(res.records.empty());
  EXPECT_EQ(res.skipped, 0u);
}

TEST(LoadCraterDb, FixtureFieldsAreExact) {
  const auto path = write_temp("five.csv",
                               "lat,id,rad,lon,extra\n"
                               "-12.5,c1,0.75,33.25,z\n"
                               "0,c2,16,0,z\n"
                               "59.875,\"c,3\",2.5,359.5,z\n"
                               "-60,c4,15.999,180,z\n"
                               "45.125,c5,100,-90,z\n");
  const auto res = load_crater_db(path, rad_schema());
  ASSERT_EQ(res.records.size(), 5u);
  EXPECT_EQ(res.skipped, 0u);
  const std::vector<CraterRecord> want = {{"c1", -12.5, 33.25, 0.75},
                                          {"c2", 0.0, 0.0, 16.0},
                                          {"c,3", 59.875, 359.5, 2.5},
                                          {"c4", -60.0, 180.0, 15.999},
                                          {"c5", 45.125, 270.0, 100.0}};
  EXPECT_EQ(res.records, want);
}

TEST(LoadCraterDb, MetreUnitsAndErrors) {
  CraterSchema s = rad_schema();
  s.radius_unit = "m";
  const auto res = load_crater_db(write_temp("m.csv", "id,lat,lon,rad\nA,1,2,1500\n"), s);
  ASSERT_EQ(res.records.size(), 1u);
  EXPECT_DOUBLE_EQ(res.records[0].radius_km, 1.5);
  EXPECT_THROW(load_crater_db(write_temp("nohdr.csv", "id,lat,lon\nA,1,2\n"), s), ConfigError);
  EXPECT_THROW(load_crater_db("/nonexistent/craters.csv"), ConfigError);
  s.radius_unit = "furlong";
  EXPECT_THROW(load_crater_db(write_temp("m2.csv", "id,lat,lon,rad\n"), s), ConfigError);
}

TEST(LoadCraterDb, OutOfDomainRowsSkipped) {
  const auto res = load_crater_db(
      write_temp("dom.csv", "id,lat,lon,rad\nA,91,0,1\nB,0,0,-1\nC,0,0,0\nD,0,0,1\n,0,0,1\n"),
      rad_schema());
  ASSERT_EQ(res.records.size(), 1u);
  EXPECT_EQ(res.records[0].id, "D");
  EXPECT_EQ(res.skipped, 4u);
}

TEST(NormalizeLon, WrapsIntoRange) {
  EXPECT_DOUBLE_EQ(normalize_lon(-90), 270);
  EXPECT_DOUBLE_EQ(normalize_lon(360), 0);
  EXPECT_DOUBLE_EQ(normalize_lon(725), 5);
}

namespace {
std::vector<CraterRecord> with_radii(std::initializer_list<double> rs) {
  std::vector<CraterRecord> out;
  int i = 0;
  for (double r : rs) out.push_back({"r" + std::to_string(i++), 0, 0, r});
  return out;
}
}  // namespace

TEST(FilterCraters, StrictBoundary) {
  const auto in = with_radii({1, 15.9, 16.0, 40});
  const auto out = filter_craters(in, 16.0);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].radius_km, 1);
  EXPECT_EQ(out[1].radius_km, 15.9);
}

TEST(FilterCraters, InfiniteThresholdIsIdentity) {
  const auto in = with_radii({1, 15.9, 16.0, 40});
  EXPECT_EQ(filter_craters(in), in);
}

TEST(FilterCraters, MatchesLinearScanAndNests) {
  Rng rng(11);
  std::vector<CraterRecord> in;
  for (int i = 0; i < 1000; ++i) in.push_back({std::to_string(i), 0, 0, rng.uniform(0.1, 50)});
  for (double a : {0.5, 7.0, 16.0, 33.3}) {
    std::vector<CraterRecord> expect;
    for (const auto& r : in) {
      if (r.radius_km < a) expect.push_back(r);
    }
    const auto got = filter_craters(in, a);
    EXPECT_EQ(got, expect);
    EXPECT_EQ(filter_craters(got, a), got);
    for (double b : {1.0, 20.0}) {
      EXPECT_EQ(filter_craters(filter_craters(in, a), b), filter_craters(in, std::min(a, b)));
    }
  }
}

namespace {
MosaicGeoref georef_1200x3600() {
  MosaicGeoref g;
  g.width_px = 3600;
  g.height_px = 1200;
  return g;
}
}  // namespace

TEST(ProjectToPixel, RadiusInPixels) {
  const auto p = project_to_pixel({"a", 0, 10, 16.0}, georef_1200x3600());
  EXPECT_DOUBLE_EQ(p.circle.r, 16.0 * 1000.0 / 100.0);
}

TEST(ProjectToPixel, CornerAnchor) {
  const auto g = georef_1200x3600();
  const auto p = project_to_pixel({"a", g.lat_max_deg, g.lon_min_deg, 1.0}, g);
  EXPECT_TRUE(p.in_bounds);
  EXPECT_EQ(p.circle.cx, 0.0);
  EXPECT_EQ(p.circle.cy, 0.0);
}

TEST(ProjectToPixel, OutsideBandFlagged) {
  EXPECT_FALSE(project_to_pixel({"a", 61, 10, 1.0}, georef_1200x3600()).in_bounds);
  EXPECT_FALSE(project_to_pixel({"a", -60.5, 10, 1.0}, georef_1200x3600()).in_bounds);
}

TEST(ProjectToPixel, RoundTripsThroughInverse) {
  const auto g = georef_1200x3600();
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const CraterRecord rec{"x", rng.uniform(-60, 60), rng.uniform(0, 360), 1.0};
    const auto p = project_to_pixel(rec, g);
    const auto [lat, lon] = pixel_to_latlon(p.circle.cx, p.circle.cy, g);
    EXPECT_NEAR(lat, rec.lat_deg, 1e-9);
    EXPECT_NEAR(lon, rec.lon_deg, 1e-9);
  }
}

TEST(MosaicGeoref, Validation) {
  MosaicGeoref g = georef_1200x3600();
  EXPECT_NO_THROW(g.validate());
  g.projection = "polar-stereographic";
  EXPECT_THROW(g.validate(), ConfigError);
  g = georef_1200x3600();
  g.lat_min_deg = 70;
  EXPECT_THROW(g.validate(), ConfigError);
  g = georef_1200x3600();
  g.pixel_scale_m = 0;
  EXPECT_THROW(g.validate(), ConfigError);
  g = georef_1200x3600();
  g.width_px = 0;
  EXPECT_THROW(g.validate(), ConfigError);
}

TEST(LoadMosaic, DimensionsOverrideGeoref) {
  Image img(40, 20, 0.25f);
  const auto dir = fs::temp_directory_path() / "cratergan_ingest_test";
  fs::create_directories(dir);
  write_png8(dir / "mosaic.png", img);
  const auto r = load_mosaic(dir / "mosaic.png", MosaicGeoref{});
  EXPECT_EQ(r.georef.width_px, 40);
  EXPECT_EQ(r.georef.height_px, 20);
  EXPECT_EQ(r.pixels.width, 40);
  EXPECT_NEAR(r.pixels.at(3, 4), 64.0 / 255.0, 1e-6);
  EXPECT_THROW(load_mosaic(dir / "absent.png", MosaicGeoref{}), ConfigError);
}
