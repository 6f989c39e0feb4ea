#include <cmath>

#include "cratergan/pipeline.hpp"

namespace cratergan {

ExperimentConfig ExperimentConfig::desk_scale() {
  ExperimentConfig cfg;
  cfg.experiment.scene_px = 256;
  cfg.sim.width_px = 256;
  cfg.sim.height_px = 256;
  cfg.sim.r_min_px = 3.0;
  cfg.sim.r_max_px = 24.0;
  cfg.sim.crater_density = 600.0;
  cfg.tiling.tile_px = 128;
  cfg.tiling.stride_px = 64;

  cfg.translator.residual_blocks = 4;
  cfg.translator.gen_base_channels = 16;
  cfg.translator.disc_base_channels = 16;
  cfg.translator.iterations = 1000;
  cfg.translator.batch_size = 1;

  cfg.segmenter.base_channels = 8;
  cfg.segmenter.epochs = 30;
  cfg.segmenter.batch_size = 15;
  cfg.segmenter.learning_rate = 1e-4;
  return cfg;
}

ExperimentConfig ExperimentConfig::from_document(const ConfigDocument& doc, ExperimentConfig base) {
  for (const auto& [section, values] : doc.sections) {
    if (section == "experiment") {
      assign_fields(base.experiment, values, section);
    } else if (section == "sim") {
      assign_fields(base.sim, values, section);
    } else if (section == "tiling") {
      assign_fields(base.tiling, values, section);
    } else if (section == "pseudo_real") {
      assign_fields(base.pseudo_real, values, section);
    } else if (section == "translator") {
      assign_fields(base.translator, values, section);
    } else if (section == "segmenter") {
      assign_fields(base.segmenter, values, section);
    } else if (section == "georef") {
      assign_fields(base.georef, values, section);
    } else if (section == "crater_schema") {
      assign_fields(base.crater_schema, values, section);
    } else if (section.empty()) {
      if (!values.empty()) {
        throw ConfigError("config key '" + values.begin()->first + "' must be inside a section");
      }
    } else {
      throw ConfigError("unknown config section [" + section + "]");
    }
  }
  // Scenes are square; scene_px is the single source of truth for their size.
  base.sim.width_px = base.experiment.scene_px;
  base.sim.height_px = base.experiment.scene_px;
  return base;
}

ConfigDocument ExperimentConfig::to_document() const {
  ConfigDocument doc;
  auto put = [&](const std::string& section, const auto& cfg) {
    auto& sec = doc.sections[section];
    for (auto [k, v] : field_values(cfg)) {
      if (v.size() >= 2 && v.front() == '"') v = v.substr(1, v.size() - 2);
      sec[k] = v;
    }
  };
  put("experiment", experiment);
  put("sim", sim);
  put("tiling", tiling);
  put("pseudo_real", pseudo_real);
  put("translator", translator);
  put("segmenter", segmenter);
  put("georef", georef);
  put("crater_schema", crater_schema);
  return doc;
}

std::string ExperimentConfig::hash() const { return fnv1a_hex(to_document().render()); }

std::string ExperimentConfig::run_id() const {
  return experiment.run_id.empty() ? "seed-" + std::to_string(experiment.seed) : experiment.run_id;
}

ZeroDivision ExperimentConfig::zero_division() const {
  return experiment.zero_division == "zero" ? ZeroDivision::kZero : ZeroDivision::kOne;
}

void ExperimentConfig::validate() const {
  SimSceneSpec probe = sim;
  probe.width_px = probe.height_px = experiment.scene_px;
  probe.validate();
  translator.validate();
  segmenter.validate();
  if (experiment.scene_px < tiling.tile_px) {
    throw ConfigError("experiment.scene_px must be at least tiling.tile_px");
  }
  tile_starts(experiment.scene_px, tiling.tile_px, tiling.stride_px, tiling.flush);
  if (tiling.tile_px % 4 != 0 || tiling.tile_px % (1 << segmenter.down_blocks) != 0) {
    throw ConfigError("tiling.tile_px must be divisible by 4 and by 2^segmenter.down_blocks");
  }
  if (experiment.sim_tiles < 2 || experiment.real_tiles < 1 || experiment.test_tiles < 1) {
    throw ConfigError("experiment: need sim_tiles >= 2, real_tiles >= 1, test_tiles >= 1");
  }
  if (!(experiment.val_fraction > 0.0 && experiment.val_fraction < 1.0)) {
    throw ConfigError("experiment.val_fraction must be in (0, 1)");
  }
  if (!(experiment.max_radius_km > 0.0)) throw ConfigError("experiment.max_radius_km must be > 0");
  if (experiment.zero_division != "one" && experiment.zero_division != "zero") {
    throw ConfigError("experiment.zero_division must be 'one' or 'zero'");
  }
  if (!experiment.real_mosaic.empty() && experiment.real_craters.empty()) {
    throw ConfigError("experiment.real_mosaic requires experiment.real_craters");
  }
  if (!(experiment.real_test_fraction > 0.0 && experiment.real_test_fraction < 1.0)) {
    throw ConfigError("experiment.real_test_fraction must be in (0, 1)");
  }
}

}  // namespace cratergan
