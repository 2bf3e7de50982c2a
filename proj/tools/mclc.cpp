#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "mclc/config.hpp"
#include "mclc/manifest.hpp"
#include "mclc/metrics.hpp"
#include "mclc/pipeline.hpp"
#include "mclc/plot.hpp"
#include "mclc/png_io.hpp"
#include "mclc/synth.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  bool no_crf = false;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "master noise seed (overrides the config)");
  cmd->add_option("--jobs", o.jobs, "targets processed concurrently")->check(CLI::PositiveNumber);
  cmd->add_flag("--no-crf", o.no_crf, "skip CRF refinement");
  cmd->add_option("--out", o.out, "output directory (overrides the config)");
}

mclc::RunConfig resolve_config(const CommonOptions& o) {
  mclc::RunConfig cfg = o.config.empty() ? mclc::RunConfig{} : mclc::load_run_config(o.config);
  if (o.seed) {
    cfg.mclc.noise.seed = *o.seed;
  }
  if (o.jobs) {
    cfg.jobs = *o.jobs;
  }
  if (o.no_crf) {
    cfg.crf.reset();
  }
  if (!o.out.empty()) {
    cfg.output_dir = o.out;
  }
  cfg.validate();
  return cfg;
}

void configure_logging() {
  spdlog::set_pattern("[%l] %v");
  const char* level = std::getenv("MCLC_LOG");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
}

int report_load_errors(const std::vector<mclc::LoadedEntry>& data) {
  int failures = 0;
  for (const auto& le : data) {
    if (!le.error.empty()) {
      spdlog::error("{}: {}", le.entry.id, le.error);
      ++failures;
    }
  }
  return failures;
}

int cmd_recover(const std::string& manifest_path, const CommonOptions& o, bool color) {
  const mclc::RunConfig cfg = resolve_config(o);
  const mclc::DatasetManifest m = mclc::load_manifest(manifest_path);
  const auto data = mclc::load_dataset(m);
  int failures = report_load_errors(data);

  spdlog::info("recovering {} images with {} job(s), crf {}", data.size(), cfg.jobs, cfg.crf ? "on" : "off");
  const auto results = mclc::recover_dataset(data, cfg);
  mclc::write_recover_outputs(m, data, results, cfg, cfg.output_dir, color);

  for (const auto& ir : results) {
    for (std::size_t t = 0; t < ir.targets.size(); ++t) {
      const auto& tr = ir.targets[t];
      if (!tr.error.empty()) {
        spdlog::error("{} target {}: {}", ir.id, t, tr.error);
        ++failures;
      } else if (!tr.warning.empty()) {
        spdlog::warn("{} target {}: {}", ir.id, t, tr.warning);
      } else {
        spdlog::debug("{} target {}: {} px, K={}, {:.3f}s", ir.id, t, tr.mask.count(), tr.runs, tr.seconds);
      }
    }
  }
  spdlog::info("wrote outputs to {}", cfg.output_dir.string());
  return failures == 0 ? 0 : 1;
}

int cmd_eval(const std::string& manifest_path, const std::string& pred_dir, const CommonOptions& o) {
  const mclc::RunConfig cfg = resolve_config(o);
  const mclc::DatasetManifest m = mclc::load_manifest(manifest_path);
  const auto data = mclc::load_dataset(m, true);
  if (report_load_errors(data) > 0) {
    return 1;
  }
  const auto preds = mclc::load_predictions(data, pred_dir);
  std::vector<mclc::PseudoMask> gts;
  for (const auto& le : data) {
    gts.push_back(*le.gt);
  }
  const auto report = mclc::evaluate_dataset(preds, gts, cfg.metrics.match_radius);
  const fs::path out = o.out.empty() ? fs::path(pred_dir) : fs::path(o.out);
  mclc::ensure_directory(out);
  mclc::write_json_file(mclc::to_json(report), out / "eval_report.json");
  const std::string table = mclc::format_table(report);
  std::ofstream(out / "eval_table.txt") << table;
  std::cout << table;
  std::cout << "corpus IoU " << report.iou << "\n";
  return 0;
}

int cmd_sweep(const std::string& manifest_path, const std::string& axis_name, const std::vector<std::string>& values,
              int repeats, const CommonOptions& o) {
  const mclc::RunConfig cfg = resolve_config(o);
  const auto axis = mclc::sweep_axis_from_string(axis_name);
  if (values.empty()) {
    throw mclc::InvalidParams("sweep needs at least one value");
  }
  const mclc::DatasetManifest m = mclc::load_manifest(manifest_path);
  const auto data = mclc::load_dataset(m, true);
  if (report_load_errors(data) > 0) {
    return 1;
  }
  spdlog::info("sweeping {} over {} value(s)", axis_name, values.size());
  const auto rows = mclc::run_sweep(data, cfg, axis, values, repeats);
  mclc::ensure_directory(cfg.output_dir);
  const fs::path csv = cfg.output_dir / ("sweep_" + axis_name + ".csv");
  std::ofstream(csv) << mclc::sweep_csv(rows);
  const auto plot = mclc::sweep_plot(axis_name, rows);
  mclc::save_rgb_png(plot.width(), plot.height(), plot.rgb(), cfg.output_dir / ("sweep_" + axis_name + ".png"));
  std::cout << mclc::sweep_csv(rows);
  return 0;
}

int cmd_synth(const std::string& out) {
  const auto m = mclc::export_corpus(mclc::standard_corpus(), out);
  spdlog::info("wrote {} scenes to {}", m.entries.size(), out);
  return 0;
}

/// A sweep CSV becomes a line plot; a grayscale TPM PNG becomes a heatmap.
int cmd_render(const std::string& input, const std::string& out) {
  const fs::path in(input);
  if (in.extension() == ".csv") {
    const auto plot = mclc::sweep_plot(in.stem().string(), mclc::parse_sweep_csv(in));
    mclc::save_rgb_png(plot.width(), plot.height(), plot.rgb(), out);
    return 0;
  }
  const mclc::InfraredImage img = mclc::load_image(in);
  std::vector<std::uint32_t> counts(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    counts[i] = static_cast<std::uint32_t>(std::lround(img[i]));
  }
  mclc::save_tpm_png(mclc::TargetProbabilityMap(img.width(), img.height(), std::move(counts), 255), out, true);
  return 0;
}

std::vector<std::string> split_values(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& r : raw) {
    std::size_t start = 0;
    for (std::size_t comma; (comma = r.find(',', start)) != std::string::npos; start = comma + 1) {
      if (comma > start) {
        out.push_back(r.substr(start, comma - start));
      }
    }
    if (start < r.size()) {
      out.push_back(r.substr(start));
    }
  }
  return out;
}

} // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Monte Carlo linear clustering: point annotations to pseudo masks"};
  app.require_subcommand(1);

  CommonOptions recover_opts;
  std::string recover_manifest;
  bool color = false;
  auto* recover = app.add_subcommand("recover", "recover pseudo masks for every annotation in a manifest");
  recover->add_option("manifest", recover_manifest, "dataset manifest JSON")->required();
  recover->add_flag("--color", color, "write TPMs with the heat colormap");
  add_common(recover, recover_opts);

  CommonOptions eval_opts;
  std::string eval_manifest, pred_dir;
  auto* eval = app.add_subcommand("eval", "score predicted masks against ground truth");
  eval->add_option("manifest", eval_manifest, "dataset manifest JSON with gt masks")->required();
  eval->add_option("pred_dir", pred_dir, "directory holding <id>_mask.png")->required();
  add_common(eval, eval_opts);

  CommonOptions sweep_opts;
  std::string sweep_manifest, axis;
  std::vector<std::string> raw_values;
  int repeats = 3;
  auto* sweep = app.add_subcommand("sweep", "recover and evaluate over one parameter axis");
  sweep->add_option("manifest", sweep_manifest, "dataset manifest JSON with gt masks")->required();
  sweep->add_option("--axis", axis, "noise-type|noise-intensity|cluster-count|label-deviation|binarize-threshold")
      ->required();
  sweep->add_option("--values", raw_values, "comma-separated values")->required();
  sweep->add_option("--repeats", repeats, "perturbation seeds per label-deviation value")
      ->check(CLI::PositiveNumber);
  add_common(sweep, sweep_opts);

  std::string synth_out = "corpus";
  auto* synth = app.add_subcommand("synth", "write the standard synthetic corpus");
  synth->add_option("--out", synth_out, "output directory");

  std::string render_in, render_out;
  auto* render = app.add_subcommand("render", "plot a sweep CSV or colour a grayscale TPM");
  render->add_option("input", render_in, "sweep CSV or TPM PNG")->required()->check(CLI::ExistingFile);
  render->add_option("--out", render_out, "output PNG")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*recover) return cmd_recover(recover_manifest, recover_opts, color);
    if (*eval) return cmd_eval(eval_manifest, pred_dir, eval_opts);
    if (*sweep) return cmd_sweep(sweep_manifest, axis, split_values(raw_values), repeats, sweep_opts);
    if (*synth) return cmd_synth(synth_out);
    if (*render) return cmd_render(render_in, render_out);
  } catch (const mclc::Error& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 1;
}
