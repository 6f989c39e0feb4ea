#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cratergan/pipeline.hpp"

using namespace cratergan;
namespace fs = std::filesystem;

namespace {

// Smallest settings that still exercise every stage.
const std::vector<std::string> kTiny = {
    "experiment.scene_px=128", "tiling.tile_px=64",          "tiling.stride_px=32",
    "experiment.sim_tiles=30", "experiment.real_tiles=9",    "experiment.test_tiles=4",
    "translator.iterations=3", "translator.residual_blocks=1", "translator.gen_base_channels=4",
    "translator.disc_base_channels=4", "segmenter.epochs=1",  "segmenter.base_channels=2",
    "segmenter.batch_size=8",  "sim.r_max_px=16"};

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args, bool tiny = false) {
  if (tiny) {
    for (const auto& s : kTiny) {
      args.push_back("--set");
      args.push_back(s);
    }
  }
  args.insert(args.begin(), "cratergan");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("cratergan_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(ExperimentConfig, PrecedenceOfSources) {
  const auto dir = fresh_dir("cfg");
  {
    std::ofstream f(dir / "c.toml");
    f << "[experiment]\nseed = 5\nsim_tiles = 40\n[segmenter]\nepochs = 3\n";
  }
  auto doc = ConfigDocument::load(dir / "c.toml");
  doc.set_override("segmenter.epochs=4");
  const auto cfg = ExperimentConfig::from_document(doc);
  EXPECT_EQ(cfg.experiment.seed, 5u);
  EXPECT_EQ(cfg.experiment.sim_tiles, 40);
  EXPECT_EQ(cfg.segmenter.epochs, 4);
  EXPECT_EQ(cfg.tiling.tile_px, ExperimentConfig::desk_scale().tiling.tile_px);
  EXPECT_EQ(cfg.run_id(), "seed-5");
}

TEST(ExperimentConfig, UnknownKeysAndSectionsRejected) {
  ConfigDocument doc;
  doc.set_override("segmenter.epochz=3");
  EXPECT_THROW(ExperimentConfig::from_document(doc), ConfigError);
  ConfigDocument doc2;
  doc2.set_override("nosuch.key=1");
  EXPECT_THROW(ExperimentConfig::from_document(doc2), ConfigError);
}

TEST(ExperimentConfig, RoundTripAndHash) {
  auto cfg = ExperimentConfig::desk_scale();
  cfg.segmenter.epochs = 7;
  const auto back = ExperimentConfig::from_document(cfg.to_document());
  EXPECT_EQ(back.segmenter.epochs, 7);
  EXPECT_EQ(back.hash(), cfg.hash());
  cfg.segmenter.epochs = 8;
  EXPECT_NE(back.hash(), cfg.hash());
}

TEST(ExperimentConfig, ValidationCatchesBadGeometry) {
  auto cfg = ExperimentConfig::desk_scale();
  cfg.tiling.tile_px = 130;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = ExperimentConfig::desk_scale();
  cfg.experiment.zero_division = "half";
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Cli, ExitCodes) {
  const auto dir = fresh_dir("cli");
  const auto out = dir.string();
  EXPECT_EQ(cli({"simgen", "--out", out, "--set", "segmenter.epochz=3"}).code, 1);
  EXPECT_EQ(cli({"simgen", "--out", out, "--device", "gpu"}).code, 1);
  EXPECT_EQ(cli({"simgen", "--out", out, "--device", "tpu"}).code, 1);
  EXPECT_EQ(cli({"--out", out}).code, 1);
  EXPECT_EQ(cli({"frobnicate"}).code, 1);
  EXPECT_EQ(cli({"--help"}).code, 0);
  EXPECT_EQ(cli({"simgen", "--config", (dir / "missing.toml").string()}).code, 1);

  const auto missing = cli({"evaluate", "--out", out, "--seed", "77"});
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("missing input"), std::string::npos);
  EXPECT_EQ(cli({"ingest", "--out", out}).code, 1);  // no mosaic configured
}

TEST(Cli, ReferenceTableComparison) {
  const auto dir = fresh_dir("cli_ref");
  const auto r = cli({"compare", "--reference-table", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("+8.02"), std::string::npos);
  const auto csv = slurp(dir / "seed-0" / "compare" / "comparison.csv");
  EXPECT_NE(csv.find("f1"), std::string::npos);
  EXPECT_EQ(csv.find("worsened"), std::string::npos);
}

TEST(Manifest, RoundTripAndLeakage) {
  const auto dir = fresh_dir("manifest");
  DatasetManifest m;
  m.split = "train";
  m.seed = 4;
  m.config_hash = "abc";
  m.entries.push_back({"p_r0_c0", "p", "t/p_r0_c0.png", "m/p_r0_c0_mask.png", "sim", 0, 0});
  m.entries.push_back({"p_r0_c1", "p", "t/p_r0_c1.png", "m/p_r0_c1_mask.png", "sim", 64, 0});
  m.write(dir / "m.json");
  EXPECT_EQ(DatasetManifest::read(dir / "m.json"), m);
  EXPECT_THROW(DatasetManifest::read(dir / "nope.json"), ConfigError);

  DatasetManifest other = m;
  other.split = "test";
  other.entries = {{"q_r0_c0", "q", "a", "b", "real", 0, 0}};
  EXPECT_NO_THROW(check_no_leakage(std::vector{m, other}));
  other.entries.push_back({"x", "p", "a", "b", "real", 0, 0});
  EXPECT_THROW(check_no_leakage(std::vector{m, other}), ConfigError);
}

TEST(Experiment, StagesByHandThenReproducible) {
  const auto a = fresh_dir("exp_a");
  const auto b = fresh_dir("exp_b");
  for (const char* stage : {"simgen", "tile", "rasterize", "train-translator", "translate",
                            "train-segmenter", "evaluate", "compare"}) {
    const auto r = cli({stage, "--out", a.string(), "--seed", "3"}, true);
    ASSERT_EQ(r.code, 0) << stage << ": " << r.err;
  }
  const auto r = cli({"experiment", "--out", b.string(), "--seed", "3"}, true);
  ASSERT_EQ(r.code, 0) << r.err;

  const auto ra = a / "seed-3", rb = b / "seed-3";
  for (const char* stage : {"simgen", "tile", "rasterize", "train-translator", "translate",
                            "train-segmenter", "evaluate", "compare"}) {
    EXPECT_TRUE(fs::is_directory(ra / stage)) << stage;
    EXPECT_TRUE(fs::is_directory(rb / stage)) << stage;
  }
  // Same seed, same artifacts whichever way the stages were invoked.
  for (const char* m : {"sim_train.json", "sim_val.json", "real_train.json", "real_test.json"}) {
    const auto ma = DatasetManifest::read(ra / "rasterize" / m);
    EXPECT_EQ(ma, DatasetManifest::read(rb / "rasterize" / m)) << m;
    EXPECT_FALSE(ma.entries.empty()) << m;
  }
  const auto first = DatasetManifest::read(ra / "rasterize" / "sim_train.json").entries.front();
  EXPECT_EQ(slurp(ra / "rasterize" / first.tile_path), slurp(rb / "rasterize" / first.tile_path));
  EXPECT_EQ(slurp(ra / "train-translator" / "loss.csv"), slurp(rb / "train-translator" / "loss.csv"));
  EXPECT_EQ(slurp(ra / "evaluate" / "translated.json"), slurp(rb / "evaluate" / "translated.json"));

  // Held-out tiles never share a parent with training tiles.
  std::vector<DatasetManifest> all;
  for (const char* m : {"sim_train.json", "sim_val.json", "real_train.json", "real_test.json"}) {
    all.push_back(DatasetManifest::read(ra / "rasterize" / m));
  }
  EXPECT_NO_THROW(check_no_leakage(all));

  // Translated tiles keep the ids, origins and masks of their sources.
  const auto sim = DatasetManifest::read(ra / "rasterize" / "sim_train.json");
  const auto tr = DatasetManifest::read(ra / "translate" / "translated_train.json");
  ASSERT_EQ(sim.entries.size(), tr.entries.size());
  for (std::size_t i = 0; i < sim.entries.size(); ++i) {
    EXPECT_EQ(tr.entries[i].tile_id, sim.entries[i].tile_id);
    EXPECT_EQ(tr.entries[i].origin_x, sim.entries[i].origin_x);
    EXPECT_EQ(tr.entries[i].provenance, "translated");
    EXPECT_EQ(fs::weakly_canonical(ra / "translate" / tr.entries[i].mask_path),
              fs::weakly_canonical(ra / "rasterize" / sim.entries[i].mask_path));
  }

  // Re-running evaluation reproduces the stored report.
  const auto stored = slurp(ra / "evaluate" / "sim.json");
  ASSERT_EQ(cli({"evaluate", "--out", a.string(), "--seed", "3"}, true).code, 0);
  EXPECT_EQ(slurp(ra / "evaluate" / "sim.json"), stored);
}

TEST(ShippedConfigs, LoadAndValidate) {
  const fs::path dir = fs::path(CRATERGAN_SOURCE_DIR) / "configs";
  const auto desk = ExperimentConfig::from_document(ConfigDocument::load((dir / "desk.toml").string()));
  EXPECT_NO_THROW(desk.validate());
  // desk.toml restates the built-in defaults.
  EXPECT_EQ(desk.hash(), ExperimentConfig::desk_scale().hash());
  const auto large =
      ExperimentConfig::from_document(ConfigDocument::load((dir / "full_scale.toml").string()));
  EXPECT_NO_THROW(large.validate());
  EXPECT_EQ(large.tiling.tile_px, 416);
  EXPECT_EQ(tile_starts(large.experiment.scene_px, 416, 208).size(), 38u);
}
