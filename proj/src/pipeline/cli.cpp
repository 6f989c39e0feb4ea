#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "cratergan/pipeline.hpp"
#include "pipeline/stages.hpp"

namespace cratergan {

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "runs";
  std::vector<std::string> sets;
  std::string device = "cpu";
};

// Precedence: desk-scale defaults < --config < --set < --seed.
ExperimentConfig resolve_config(const CommonFlags& flags) {
  ConfigDocument doc;
  if (!flags.config.empty()) doc = ConfigDocument::load(flags.config);
  for (const auto& s : flags.sets) doc.set_override(s);
  if (flags.seed) doc.set_override("experiment.seed=" + std::to_string(*flags.seed));
  auto cfg = ExperimentConfig::from_document(doc);
  cfg.validate();
  if (flags.device == "gpu") {
    throw ConfigError("--device gpu: this build trains on cpu only");
  }
  return cfg;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sim-to-real crater segmentation pipeline", "cratergan"};
  app.require_subcommand(1);
  CommonFlags flags;
  app.add_option("--config", flags.config, "Config file (TOML-style sections)");
  app.add_option("--seed", flags.seed, "Global seed (overrides experiment.seed)");
  app.add_option("--out", flags.out, "Output root; artifacts go to {out}/{run-id}/{stage}/");
  app.add_option("--set", flags.sets, "Override a config value, section.key=value (repeatable)")
      ->allow_extra_args(false);
  app.add_option("--device", flags.device, "Compute device")
      ->check(CLI::IsMember({"cpu", "gpu"}));

  using Stage = std::function<void(const ExperimentConfig&, const std::filesystem::path&)>;
  std::map<CLI::App*, Stage> actions;
  auto stage = [&](const char* name, const char* help, Stage fn) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    actions[sub] = std::move(fn);
    return sub;
  };

  stage("simgen", "Generate simulated and pseudo-real scenes",
        [&](const auto& cfg, const auto& root) { stages::run_simgen(cfg, root, out); });
  stage("ingest", "Load and project the crater database for a real mosaic",
        [&](const auto& cfg, const auto& root) { stages::run_ingest(cfg, root, out); });
  stage("tile", "Slice scenes (and the mosaic) into tiles",
        [&](const auto& cfg, const auto& root) { stages::run_tile(cfg, root, out); });
  stage("rasterize", "Rasterize crater masks and write dataset manifests",
        [&](const auto& cfg, const auto& root) { stages::run_rasterize(cfg, root, out); });
  stage("train-translator", "Train the sim-to-real translator",
        [&](const auto& cfg, const auto& root) { stages::run_train_translator(cfg, root, out); });
  stage("translate", "Translate the simulated tiles",
        [&](const auto& cfg, const auto& root) { stages::run_translate(cfg, root, out); });
  stage("train-segmenter", "Train the sim-trained and translated-trained segmenters",
        [&](const auto& cfg, const auto& root) { stages::run_train_segmenter(cfg, root, out); });
  stage("evaluate", "Evaluate both segmenters on the held-out target tiles",
        [&](const auto& cfg, const auto& root) { stages::run_evaluate(cfg, root, out); });

  std::string report_a, report_b;
  bool reference_table = false;
  auto* compare = stage("compare", "Compare two metric reports", [&](const auto&, const auto& root) {
    MetricsReport a, b;
    if (reference_table) {
      std::tie(a, b) = reference_table_fixture();
    } else {
      a = read_report(report_a.empty() ? root / "evaluate" / "sim.json"
                                       : std::filesystem::path(report_a));
      b = read_report(report_b.empty() ? root / "evaluate" / "translated.json"
                                       : std::filesystem::path(report_b));
    }
    stages::run_compare(root, a, b, out);
  });
  compare->add_option("--baseline", report_a, "Baseline report (default: evaluate/sim.json)");
  compare->add_option("--candidate", report_b,
                      "Candidate report (default: evaluate/translated.json)");
  compare->add_flag("--reference-table", reference_table,
                    "Compare the shipped published-results fixture");

  stage("experiment", "Run every stage end to end",
        [&](const auto& cfg, const auto&) {
          run_experiment(cfg, flags.out, out);
        });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    const ExperimentConfig cfg = resolve_config(flags);
    const auto root = std::filesystem::path(flags.out) / cfg.run_id();
    std::filesystem::create_directories(root);
    for (auto& [sub, fn] : actions) {
      if (sub->parsed()) fn(cfg, root);
    }
    return 0;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "runtime failure: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace cratergan
