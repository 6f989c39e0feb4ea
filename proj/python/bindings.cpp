// Python bindings for the core library: scene generation, tiling, mask
// rasterization, crater ingest and the segmentation metrics. Training and
// translation stay on the C++ side (the cratergan executable).

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cratergan/evalmetrics.hpp"
#include "cratergan/ingest.hpp"
#include "cratergan/masks.hpp"
#include "cratergan/simgen.hpp"
#include "cratergan/tiling.hpp"

namespace py = pybind11;
using namespace cratergan;

namespace {

template <typename T>
using Array = py::array_t<T, py::array::c_style | py::array::forcecast>;

template <typename T>
Grid<T> to_grid(const Array<T>& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  Grid<T> g(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), g.data.begin());
  return g;
}

template <typename T>
Array<T> to_array(const Grid<T>& g) {
  Array<T> a({g.height, g.width});
  std::copy(g.data.begin(), g.data.end(), a.mutable_data());
  return a;
}

std::vector<PixelCircle> to_circles(const Array<double>& a) {
  if (a.size() == 0) return {};
  if (a.ndim() != 2 || a.shape(1) < 3) throw py::value_error("circles must be an (N, 3) array");
  std::vector<PixelCircle> out;
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out.push_back({r(i, 0), r(i, 1), r(i, 2)});
  return out;
}

Array<double> from_circles(const std::vector<PixelCircle>& cs) {
  Array<double> a({static_cast<py::ssize_t>(cs.size()), py::ssize_t{3}});
  auto w = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < cs.size(); ++i) {
    w(i, 0) = cs[i].cx;
    w(i, 1) = cs[i].cy;
    w(i, 2) = cs[i].r;
  }
  return a;
}

// Keyword arguments onto any struct with a visit() member; unknown names are
// rejected like unknown config keys.
template <typename Config>
Config from_kwargs(Config cfg, const py::kwargs& kwargs) {
  for (const auto& [key, value] : kwargs) {
    const auto name = py::cast<std::string>(key);
    bool found = false;
    cfg.visit([&](const char* field_name, auto& field) {
      if (name == field_name) {
        field = py::cast<std::remove_reference_t<decltype(field)>>(value);
        found = true;
      }
    });
    if (!found) throw ConfigError("unknown parameter '" + name + "'");
  }
  return cfg;
}

template <typename Config>
py::dict to_dict(Config cfg) {
  py::dict d;
  cfg.visit([&](const char* name, auto& field) { d[name] = field; });
  return d;
}

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  const auto v = m.values();
  for (std::size_t i = 0; i < kMetricCount; ++i) d[py::str(std::string(kMetricNames[i]))] = v[i];
  d["vacuous"] = m.vacuous;
  return d;
}

ZeroDivision policy_from(const std::string& s) {
  if (s == "one") return ZeroDivision::kOne;
  if (s == "zero") return ZeroDivision::kZero;
  throw ConfigError("zero_division must be 'one' or 'zero'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Crater dataset generation, tiling and segmentation metrics";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<RuntimeFailure>(m, "RuntimeFailure", PyExc_RuntimeError);

  m.def("derive_seed", &derive_seed, py::arg("seed"), py::arg("tag"), py::arg("index") = 0);

  // simgen
  m.def("default_scene_spec", [] { return to_dict(SimSceneSpec{}); },
        "Default scene parameters as a dict.");
  m.def(
      "generate_scene",
      [](const py::kwargs& kwargs) {
        const auto spec = from_kwargs(SimSceneSpec{}, kwargs);
        const auto scene = generate_scene(spec);
        Array<double> placements({static_cast<py::ssize_t>(scene.placements.size()), py::ssize_t{5}});
        auto w = placements.mutable_unchecked<2>();
        for (std::size_t i = 0; i < scene.placements.size(); ++i) {
          const auto& p = scene.placements[i];
          w(i, 0) = p.cx_px;
          w(i, 1) = p.cy_px;
          w(i, 2) = p.r_px;
          w(i, 3) = p.age;
          w(i, 4) = p.depth_px;
        }
        py::dict out;
        out["image"] = to_array(scene.raster.pixels);
        out["heights"] = to_array(scene.heights);
        out["placements"] = placements;  // columns: cx_px, cy_px, r_px, age, depth_px
        return out;
      },
      "Renders a synthetic scene. Keyword arguments override scene parameters.");
  m.def(
      "corrupt_pseudo_real",
      [](const Array<float>& image, std::uint64_t seed, const py::kwargs& kwargs) {
        return to_array(corrupt_pseudo_real(to_grid(image), from_kwargs(PseudoRealParams{}, kwargs), seed));
      },
      py::arg("image"), py::arg("seed"));
  m.def("truncated_power_law_cdf", &truncated_power_law_cdf, py::arg("r"), py::arg("r_min"),
        py::arg("r_max"), py::arg("alpha"));

  // tiling
  m.def("tile_starts", &tile_starts, py::arg("length_px"), py::arg("tile_px") = kDefaultTilePx,
        py::arg("stride_px") = kDefaultStridePx, py::arg("flush") = false);
  m.def("tile_footprint_km2", &tile_footprint_km2, py::arg("tile_px"), py::arg("pixel_scale_m"));

  py::class_<Tile>(m, "Tile")
      .def_property_readonly("pixels", [](const Tile& t) { return to_array(t.pixels); })
      .def_readonly("origin_x", &Tile::origin_x)
      .def_readonly("origin_y", &Tile::origin_y)
      .def_readonly("parent_id", &Tile::parent_id)
      .def_readonly("tile_id", &Tile::tile_id)
      .def_readonly("provenance", &Tile::provenance)
      .def("__repr__", [](const Tile& t) {
        return "<Tile " + t.tile_id + " at (" + std::to_string(t.origin_x) + ", " +
               std::to_string(t.origin_y) + ")>";
      });

  m.def(
      "slice_raster",
      [](const Array<float>& raster, const std::string& parent_id, int tile_px, int stride_px,
         bool flush) { return slice_raster(to_grid(raster), parent_id, {tile_px, stride_px, flush}); },
      py::arg("raster"), py::arg("parent_id"), py::arg("tile_px") = kDefaultTilePx,
      py::arg("stride_px") = kDefaultStridePx, py::arg("flush") = false);
  m.def(
      "reassemble",
      [](const std::vector<Tile>& tiles, int width, int height) {
        const auto r = reassemble(tiles, width, height);
        return py::make_tuple(to_array(r.image), to_array(r.coverage));
      },
      py::arg("tiles"), py::arg("width"), py::arg("height"),
      "Returns (mean image, coverage count).");

  // masks
  m.def(
      "rasterize_craters",
      [](const Array<double>& circles, int width, int height) {
        return to_array(rasterize_craters(to_circles(circles), width, height).pixels);
      },
      py::arg("circles"), py::arg("width"), py::arg("height"),
      "Filled-disk mask from an (N, 3) array of cx, cy, r in pixels.");
  m.def(
      "craters_in_tile",
      [](const Array<double>& circles, const Tile& tile) {
        return from_circles(craters_in_tile(to_circles(circles), tile));
      },
      py::arg("circles"), py::arg("tile"));

  // ingest
  m.def("normalize_lon", &normalize_lon);
  m.def(
      "load_crater_db",
      [](const std::filesystem::path& path, const py::kwargs& kwargs) {
        const auto res = load_crater_db(path, from_kwargs(CraterSchema{}, kwargs));
        py::list rows;
        for (const auto& r : res.records) {
          rows.append(py::dict(py::arg("id") = r.id, py::arg("lat_deg") = r.lat_deg,
                               py::arg("lon_deg") = r.lon_deg, py::arg("radius_km") = r.radius_km));
        }
        return py::make_tuple(rows, res.skipped);
      },
      py::arg("path"), "Returns (records, skipped row count).");
  m.def(
      "project_to_pixel",
      [](double lat, double lon, double radius_km, int width_px, int height_px,
         const py::kwargs& kwargs) {
        auto g = from_kwargs(MosaicGeoref{}, kwargs);
        g.width_px = width_px;
        g.height_px = height_px;
        g.validate();
        const auto p = project_to_pixel({"", lat, normalize_lon(lon), radius_km}, g);
        return py::make_tuple(p.circle.cx, p.circle.cy, p.circle.r, p.in_bounds);
      },
      py::arg("lat_deg"), py::arg("lon_deg"), py::arg("radius_km"), py::arg("width_px"),
      py::arg("height_px"), "Returns (cx, cy, r_px, in_bounds).");

  // evalmetrics
  m.def(
      "confusion",
      [](const Array<std::uint8_t>& pred, const Array<std::uint8_t>& gt) {
        const auto c = confusion(to_grid(pred), to_grid(gt));
        return py::dict(py::arg("tp") = c.tp, py::arg("fp") = c.fp, py::arg("fn") = c.fn,
                        py::arg("tn") = c.tn);
      },
      py::arg("pred"), py::arg("gt"));
  m.def(
      "compute_metrics",
      [](std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn,
         const std::string& zero_division) {
        return metrics_dict(compute_metrics({tp, fp, fn, tn}, policy_from(zero_division)));
      },
      py::arg("tp"), py::arg("fp"), py::arg("fn"), py::arg("tn"),
      py::arg("zero_division") = "one");
  m.def(
      "evaluate_masks",
      [](const std::vector<Array<std::uint8_t>>& preds, const std::vector<Array<std::uint8_t>>& gts,
         const std::string& zero_division) {
        if (preds.size() != gts.size()) throw ConfigError("evaluate_masks: list lengths differ");
        std::vector<Metrics> per;
        for (std::size_t i = 0; i < preds.size(); ++i) {
          per.push_back(compute_metrics(confusion(to_grid(preds[i]), to_grid(gts[i])),
                                        policy_from(zero_division)));
        }
        const auto r = aggregate(std::move(per));
        auto d = metrics_dict(r.mean);
        d["n_images"] = r.n_images;
        d["vacuous_images"] = r.vacuous_images;
        return d;
      },
      py::arg("preds"), py::arg("gts"), py::arg("zero_division") = "one",
      "Per-image metrics averaged without weighting.");
  m.def(
      "reference_comparison",
      [] {
        const auto [a, b] = reference_table_fixture();
        const auto c = compare_reports(a, b);
        py::list rows;
        for (const auto& r : c.rows) {
          rows.append(py::dict(py::arg("metric") = r.metric, py::arg("a") = r.a,
                               py::arg("b") = r.b, py::arg("delta") = r.delta,
                               py::arg("verdict") = r.verdict));
        }
        return py::make_tuple(rows, comparison_table(c));
      },
      "Comparison rows and text table for the shipped published-results fixture.");
}
