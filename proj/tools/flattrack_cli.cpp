#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "flattrack/config.hpp"
#include "flattrack/error.hpp"
#include "flattrack/pipeline.hpp"

namespace fs = std::filesystem;
using namespace flattrack;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> gamma;
  std::vector<std::string> overrides;
  bool force = false;
  bool quiet = false;
};

ExperimentConfig resolve_config(const Globals& g) {
  ExperimentConfig cfg = g.config_path.empty() ? ExperimentConfig{} : load_config(g.config_path);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) cfg.seed = *g.seed;
  if (g.gamma) cfg.gamma = *g.gamma;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flattrack: lensless eye-tracking simulation, reconstruction and gaze regression"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "key=value experiment config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "master seed (overrides the config)");
  app.add_option("--gamma", g.gamma, "Wiener regularization weight (overrides the config)");
  app.add_option("--set", g.overrides, "extra key=value config override, repeatable");
  app.add_flag("--force", g.force, "overwrite existing outputs");
  app.add_flag("-q,--quiet", g.quiet, "suppress progress messages");

  std::string out, manifest, psf, models, model, per_point;

  auto* gen_psf = app.add_subcommand("gen-psf", "generate a contour PSF (FLTIMG)");
  gen_psf->add_option("--out", out, "output PSF path")->required();

  auto* render = app.add_subcommand("render", "render scene dataset for all subjects and rounds");
  render->add_option("--out", out, "output dataset directory")->required();

  auto* simulate = app.add_subcommand("simulate", "simulate lensless measurements of a scene dataset");
  auto* reconstruct = app.add_subcommand("reconstruct", "Wiener-reconstruct a measurement dataset");
  for (auto* sc : {simulate, reconstruct}) {
    sc->add_option("--manifest", manifest, "input dataset directory")->required();
    sc->add_option("--psf", psf, "PSF file")->required()->check(CLI::ExistingFile);
    sc->add_option("--out", out, "output dataset directory")->required();
  }

  auto* train = app.add_subcommand("train", "pretrain and fine-tune per subject");
  train->add_option("--manifest", manifest, "reconstruction dataset directory")->required();
  train->add_option("--out", out, "model output directory")->required();

  auto* eval = app.add_subcommand("eval", "evaluate per-subject models on held-out rounds");
  eval->add_option("--manifest", manifest, "reconstruction dataset directory")->required();
  eval->add_option("--models", models, "model directory written by train")->required();
  eval->add_option("--psf", psf, "PSF used for the reconstruction latency stage")->required()->check(
      CLI::ExistingFile);
  eval->add_option("--out", out, "report directory")->required();

  auto* grid = app.add_subcommand("grid-report", "per-grid-point error map as SVG");
  grid->add_option("--per-point", per_point, "per_point.csv written by eval")->required()->check(CLI::ExistingFile);
  grid->add_option("--out", out, "output SVG path")->required();

  auto* compare = app.add_subcommand("compare-lensed", "train/evaluate on clean scenes and on reconstructions");
  compare->add_option("--manifest", manifest, "scene dataset directory")->required();
  compare->add_option("--psf", psf, "PSF file")->required()->check(CLI::ExistingFile);
  compare->add_option("--out", out, "output CSV path")->required();

  auto* bench = app.add_subcommand("bench", "end-to-end single-frame latency");
  bench->add_option("--model", model, "FTKMDL model")->required()->check(CLI::ExistingFile);
  bench->add_option("--psf", psf, "PSF file")->required()->check(CLI::ExistingFile);
  bench->add_option("--out", out, "output CSV path")->required();

  auto* run = app.add_subcommand("run", "full pipeline from one config");
  run->add_option("--out", out, "run output directory")->required();

  auto* show = app.add_subcommand("show-config", "print the effective configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::config);
  }

  try {
    const ExperimentConfig cfg = resolve_config(g);
    if (!g.quiet) pipeline::set_log(&std::cerr);

    if (*gen_psf) {
      const double ratio = pipeline::cmd_gen_psf(cfg, out);
      std::cout << "spectral_flatness_ratio=" << ratio << "\n";
    } else if (*render) {
      pipeline::cmd_render_dataset(cfg, out, g.force);
    } else if (*simulate) {
      pipeline::cmd_simulate(manifest, psf, cfg, out, g.force);
    } else if (*reconstruct) {
      pipeline::cmd_reconstruct(manifest, psf, cfg, out, g.force);
    } else if (*train) {
      pipeline::cmd_train(manifest, cfg, out);
    } else if (*eval) {
      const auto s = pipeline::cmd_eval(manifest, models, psf, cfg, out);
      std::cout << "mean_err_deg=" << s.mean_err_deg << " best_case_err_deg=" << s.best_case_err_deg
                << " baseline_err_deg=" << s.baseline_err_deg << "\n";
    } else if (*grid) {
      pipeline::cmd_grid_report(per_point, cfg, out);
    } else if (*compare) {
      for (const auto& r : pipeline::cmd_compare_lensed(manifest, psf, cfg, out)) {
        std::cout << "subject " << r.subject_id << ": lensed " << r.lensed_err_deg << " deg, lensless "
                  << r.lensless_err_deg << " deg\n";
      }
    } else if (*bench) {
      const auto lat = pipeline::cmd_bench(model, psf, cfg, out);
      std::cout << "median_total_ms=" << lat.total.stats.median_ms << " fps=" << lat.fps() << "\n";
    } else if (*run) {
      pipeline::cmd_run(cfg, out, g.force);
    } else if (*show) {
      std::cout << to_config_text(cfg);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::data);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
