#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mclc/config.hpp"
#include "mclc/manifest.hpp"
#include "mclc/mclc.hpp"
#include "mclc/metrics.hpp"
#include "mclc/plot.hpp"
#include "mclc/png_io.hpp"
#include "mclc/refine.hpp"
#include "mclc/synth.hpp"

namespace mclc {

/// Calls fn(i) for i in [0, n) on up to `jobs` threads. Work is claimed in
/// index order; callers write results by index so output order never depends
/// on completion order.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        fn(i);
      }
    });
  }
}

struct LoadedEntry {
  ManifestEntry entry;
  std::optional<InfraredImage> image;
  std::optional<PseudoMask> gt;
  std::string error;
};

/// Loads every entry; failures are recorded per entry instead of thrown.
inline std::vector<LoadedEntry> load_dataset(const DatasetManifest& m, bool need_gt = false) {
  std::vector<LoadedEntry> out;
  out.reserve(m.entries.size());
  for (const auto& e : m.entries) {
    LoadedEntry le{e, std::nullopt, std::nullopt, {}};
    try {
      le.image = check_entry(m, e);
      if (e.gt_mask_path) {
        le.gt = load_mask(m.resolve(*e.gt_mask_path));
        require_same_shape(*le.gt, PseudoMask(le.image->width(), le.image->height()));
      } else if (need_gt) {
        throw MissingGroundTruth("entry '" + e.id + "' has no ground-truth mask");
      }
    } catch (const Error& err) {
      le.error = err.what();
    }
    out.push_back(std::move(le));
  }
  return out;
}

/// Loaded entries straight from generated scenes, without touching disk.
inline std::vector<LoadedEntry> loaded_from_scenes(const std::vector<GeneratedScene>& scenes) {
  std::vector<LoadedEntry> out;
  for (const auto& s : scenes) {
    LoadedEntry le;
    le.entry.id = s.id;
    le.entry.image_path = "images/" + s.id + ".png";
    le.entry.gt_mask_path = std::filesystem::path("masks/" + s.id + ".png");
    le.entry.annotations = s.annotations;
    le.image = s.image;
    le.gt = s.gt_mask;
    out.push_back(std::move(le));
  }
  return out;
}

struct TargetResult {
  PointAnnotation anno;
  std::optional<TargetProbabilityMap> tpm;
  PseudoMask mask;
  int runs = 0;
  bool stopped_early = false;
  bool crf_applied = false;
  double seconds = 0.0;
  /// Non-empty when the target produced no mask (the mask is then empty).
  std::string warning;
  /// Non-empty when the target failed with an invalid-parameter or I/O error.
  std::string error;
};

/// MCLC, then CRF refinement when configured, else binarization.
inline TargetResult recover_target(const InfraredImage& img, const PointAnnotation& anno, const RunConfig& cfg) {
  TargetResult r;
  r.anno = anno;
  r.mask = PseudoMask(img.width(), img.height());
  const auto t0 = std::chrono::steady_clock::now();
  try {
    MclcOutcome mc = run_mclc_detailed(img, anno, cfg.mclc);
    r.runs = mc.runs;
    r.stopped_early = mc.stopped_early;
    r.tpm = std::move(mc.tpm);
    if (cfg.crf) {
      r.crf_applied = true;
      r.mask = refine_tpm(img, *r.tpm, anno, *cfg.crf);
    } else {
      r.mask = binarize(*r.tpm, anno, cfg.mclc.binarize_threshold);
    }
  } catch (const EmptyMask& e) {
    r.warning = e.what();
  } catch (const Error& e) {
    r.error = e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.mask.provenance = Provenance{cfg.crf ? "mclc+crf" : "mclc", cfg.mclc.noise.seed, to_json(cfg.mclc).dump()};
  return r;
}

struct ImageResult {
  std::string id;
  std::vector<TargetResult> targets;
  /// Pixel-wise OR of the target masks.
  std::optional<PseudoMask> merged;
  std::string error;

  bool failed() const {
    return !error.empty() || std::any_of(targets.begin(), targets.end(),
                                         [](const TargetResult& t) { return !t.error.empty(); });
  }
};

inline std::vector<ImageResult> recover_dataset(const std::vector<LoadedEntry>& data, const RunConfig& cfg) {
  cfg.validate();
  struct Job {
    std::size_t entry;
    std::size_t target;
  };
  std::vector<Job> jobs;
  std::vector<ImageResult> out(data.size());
  for (std::size_t e = 0; e < data.size(); ++e) {
    out[e].id = data[e].entry.id;
    out[e].error = data[e].error;
    if (data[e].image) {
      out[e].targets.resize(data[e].entry.annotations.size());
      for (std::size_t t = 0; t < data[e].entry.annotations.size(); ++t) {
        jobs.push_back({e, t});
      }
    }
  }
  parallel_for(jobs.size(), cfg.jobs, [&](std::size_t j) {
    const auto& [e, t] = jobs[j];
    out[e].targets[t] = recover_target(*data[e].image, data[e].entry.annotations[t], cfg);
  });
  for (std::size_t e = 0; e < data.size(); ++e) {
    if (!data[e].image) {
      continue;
    }
    PseudoMask merged(data[e].image->width(), data[e].image->height());
    for (const auto& t : out[e].targets) {
      merged |= t.mask;
    }
    merged.provenance.method = cfg.crf ? "mclc+crf" : "mclc";
    merged.provenance.seed = cfg.mclc.noise.seed;
    out[e].merged = std::move(merged);
  }
  return out;
}

/// Enough to re-run the target alone: image path, annotation and every
/// parameter, plus what the run produced.
inline Json target_record(const DatasetManifest& m, const LoadedEntry& le, std::size_t index, const TargetResult& r,
                          const RunConfig& cfg) {
  Json j{{"image_id", le.entry.id},
         {"image", std::filesystem::absolute(m.resolve(le.entry.image_path)).lexically_normal().generic_string()},
         {"target_index", index},
         {"annotation", Json{{"x", r.anno.x}, {"y", r.anno.y}, {"category", to_string(r.anno.category)}}},
         {"seed", cfg.mclc.noise.seed},
         {"runs", r.runs},
         {"stopped_early", r.stopped_early},
         {"wall_time_s", r.seconds},
         {"mask_pixels", r.mask.count()},
         {"mclc", to_json(cfg.mclc)},
         {"crf", r.crf_applied ? to_json(*cfg.crf) : Json(nullptr)},
         {"match_radius", cfg.metrics.match_radius}};
  j["warning"] = r.warning.empty() ? Json(nullptr) : Json(r.warning);
  j["error"] = r.error.empty() ? Json(nullptr) : Json(r.error);
  return j;
}

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  }
}

/// Layout under `out`:
///   <id>_mask.png                  merged mask per image
///   targets/<id>_t<i>_tpm.png      TPM (gray, or heat colours with `color`)
///   targets/<id>_t<i>_mask.png     per-target mask
///   targets/<id>_t<i>.json         per-target record
inline void write_recover_outputs(const DatasetManifest& m, const std::vector<LoadedEntry>& data,
                                  const std::vector<ImageResult>& results, const RunConfig& cfg,
                                  const std::filesystem::path& out, bool color) {
  ensure_directory(out / "targets");
  for (std::size_t e = 0; e < results.size(); ++e) {
    const auto& ir = results[e];
    if (!ir.merged) {
      continue;
    }
    save_mask_png(*ir.merged, out / (ir.id + "_mask.png"));
    for (std::size_t t = 0; t < ir.targets.size(); ++t) {
      const auto& tr = ir.targets[t];
      const std::string stem = ir.id + "_t" + std::to_string(t);
      if (tr.tpm) {
        save_tpm_png(*tr.tpm, out / "targets" / (stem + "_tpm.png"), color);
      }
      save_mask_png(tr.mask, out / "targets" / (stem + "_mask.png"));
      write_json_file(target_record(m, data[e], t, tr, cfg), out / "targets" / (stem + ".json"));
    }
  }
}

/// Evaluates merged predictions against ground truth. Entries without a
/// prediction or ground truth are an error.
inline EvalReport evaluate_results(const std::vector<LoadedEntry>& data, const std::vector<ImageResult>& results,
                                   double match_radius) {
  std::vector<PseudoMask> preds, gts;
  for (std::size_t e = 0; e < data.size(); ++e) {
    if (!data[e].gt) {
      throw MissingGroundTruth("entry '" + data[e].entry.id + "' has no ground truth");
    }
    if (!results[e].merged) {
      throw IoError("entry '" + data[e].entry.id + "' has no prediction: " + results[e].error);
    }
    preds.push_back(*results[e].merged);
    gts.push_back(*data[e].gt);
  }
  return evaluate_dataset(preds, gts, match_radius);
}

/// Reads `<pred_dir>/<id>_mask.png` for every entry. Throws IoError naming
/// every missing prediction.
inline std::vector<PseudoMask> load_predictions(const std::vector<LoadedEntry>& data,
                                                const std::filesystem::path& pred_dir) {
  std::vector<PseudoMask> preds;
  std::string missing;
  for (const auto& le : data) {
    const auto path = pred_dir / (le.entry.id + "_mask.png");
    if (!std::filesystem::exists(path)) {
      missing += (missing.empty() ? "" : ", ") + path.string();
      continue;
    }
    preds.push_back(load_mask(path));
  }
  if (!missing.empty()) {
    throw IoError("missing predictions: " + missing);
  }
  return preds;
}

inline Json to_json(const EvalReport& r) {
  const auto u = in_table_units(r);
  return Json{{"iou", r.iou},
              {"mean_iou", r.mean_iou},
              {"pd", r.pd},
              {"fa", r.fa},
              {"table_units", Json{{"iou_e-2", u.iou}, {"pd_e-2", u.pd}, {"fa_e-6", u.fa}}},
              {"n_targets_gt", r.n_targets_gt},
              {"n_targets_detected", r.n_targets_detected},
              {"n_false_components", r.n_false_components},
              {"n_images", r.n_images}};
}

enum class SweepAxis { NoiseType, NoiseIntensity, ClusterCount, LabelDeviation, BinarizeThreshold };

inline std::string to_string(SweepAxis a) {
  switch (a) {
  case SweepAxis::NoiseType: return "noise-type";
  case SweepAxis::NoiseIntensity: return "noise-intensity";
  case SweepAxis::ClusterCount: return "cluster-count";
  case SweepAxis::LabelDeviation: return "label-deviation";
  case SweepAxis::BinarizeThreshold: return "binarize-threshold";
  }
  return "noise-intensity";
}

inline SweepAxis sweep_axis_from_string(const std::string& s) {
  for (auto a : {SweepAxis::NoiseType, SweepAxis::NoiseIntensity, SweepAxis::ClusterCount, SweepAxis::LabelDeviation,
                 SweepAxis::BinarizeThreshold}) {
    if (to_string(a) == s) {
      return a;
    }
  }
  throw InvalidParams("unknown sweep axis '" + s + "'");
}

struct SweepRow {
  std::string value;
  EvalReport report;
};

namespace detail {

inline double parse_number(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) {
    throw InvalidParams("sweep value '" + s + "' is not a number");
  }
  return v;
}

inline EvalReport mean_report(const std::vector<EvalReport>& rs) {
  EvalReport m = rs.front();
  m.iou = m.mean_iou = m.pd = m.fa = 0.0;
  for (const auto& r : rs) {
    m.iou += r.iou / static_cast<double>(rs.size());
    m.mean_iou += r.mean_iou / static_cast<double>(rs.size());
    m.pd += r.pd / static_cast<double>(rs.size());
    m.fa += r.fa / static_cast<double>(rs.size());
  }
  return m;
}

} // namespace detail

/// Perturbation seed of target t of entry e in repeat r.
inline std::uint64_t deviation_seed(std::size_t repeat, std::size_t entry, std::size_t target) {
  return 1000003ULL * repeat + 1000ULL * entry + target + 1;
}

inline std::vector<LoadedEntry> perturbed(std::vector<LoadedEntry> data, double sigma, std::size_t repeat) {
  for (std::size_t e = 0; e < data.size(); ++e) {
    if (!data[e].image) {
      continue;
    }
    for (std::size_t t = 0; t < data[e].entry.annotations.size(); ++t) {
      auto& a = data[e].entry.annotations[t];
      a = perturb_annotation(a, sigma, deviation_seed(repeat, e, t), data[e].image->width(), data[e].image->height());
    }
  }
  return data;
}

/// Recover + evaluate once per value. Noise-type values are `salt`,
/// `pepper`, `gaussian`, optionally suffixed `:<intensity>`. Label-deviation
/// rows average `repeats` perturbation seeds.
inline std::vector<SweepRow> run_sweep(const std::vector<LoadedEntry>& data, const RunConfig& base, SweepAxis axis,
                                       const std::vector<std::string>& values, int repeats = 3) {
  if (values.empty()) {
    throw InvalidParams("sweep needs at least one value");
  }
  if (repeats < 1) {
    throw InvalidParams("sweep repeats must be at least 1");
  }
  std::vector<SweepRow> rows;
  for (const auto& v : values) {
    RunConfig cfg = base;
    std::vector<EvalReport> reports;
    switch (axis) {
    case SweepAxis::NoiseType: {
      const auto colon = v.find(':');
      cfg.mclc.noise.kind = noise_kind_from_string(v.substr(0, colon));
      if (colon != std::string::npos) {
        cfg.mclc.noise.intensity = detail::parse_number(v.substr(colon + 1));
      }
      break;
    }
    case SweepAxis::NoiseIntensity: cfg.mclc.noise.intensity = detail::parse_number(v); break;
    case SweepAxis::ClusterCount: {
      const double n = detail::parse_number(v);
      if (n != std::floor(n)) {
        throw InvalidParams("cluster count '" + v + "' is not an integer");
      }
      cfg.mclc.cluster.n_clusters = static_cast<int>(n);
      break;
    }
    case SweepAxis::BinarizeThreshold: cfg.mclc.binarize_threshold = detail::parse_number(v); break;
    case SweepAxis::LabelDeviation: break;
    }
    cfg.validate();
    if (axis == SweepAxis::LabelDeviation) {
      const double sigma = detail::parse_number(v);
      for (int r = 0; r < repeats; ++r) {
        const auto moved = perturbed(data, sigma, static_cast<std::size_t>(r));
        reports.push_back(evaluate_results(moved, recover_dataset(moved, cfg), cfg.metrics.match_radius));
      }
    } else {
      reports.push_back(evaluate_results(data, recover_dataset(data, cfg), cfg.metrics.match_radius));
    }
    rows.push_back({v, detail::mean_report(reports)});
  }
  return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string s = "value,iou,pd,fa\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), ",%.6f,%.6f,%.9f\n", r.report.iou, r.report.pd, r.report.fa);
    s += r.value + buf;
  }
  return s;
}

inline std::string diagnostics_csv(const std::vector<DiagnosticsRecord>& records) {
  std::string s = "intensity,delta_true,delta_false_min,delta_false_max,samples\n";
  char buf[160];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%g,%.9f,%.9f,%.9f,%d\n", r.noise_intensity, r.delta_dc_true,
                  r.delta_dc_false_min, r.delta_dc_false_max, r.samples);
    s += buf;
  }
  return s;
}

inline Canvas sweep_plot(const std::string& title, const std::vector<SweepRow>& rows) {
  std::vector<std::string> labels;
  PlotSeries iou{"iou", {}, {200, 30, 60}};
  PlotSeries pd{"pd", {}, {40, 90, 200}};
  for (const auto& r : rows) {
    labels.push_back(r.value);
    iou.ys.push_back(r.report.iou);
    pd.ys.push_back(r.report.pd);
  }
  return render_line_plot(title, labels, {iou, pd});
}

/// Parses a CSV produced by sweep_csv back into rows (report fields other
/// than iou/pd/fa stay zero).
inline std::vector<SweepRow> parse_sweep_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "'");
  }
  std::string line;
  std::getline(in, line);
  if (line.rfind("value,iou,pd,fa", 0) != 0) {
    throw FormatError("'" + path.string() + "' is not a sweep CSV");
  }
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (std::size_t comma; (comma = line.find(',', start)) != std::string::npos; start = comma + 1) {
      cells.push_back(line.substr(start, comma - start));
    }
    cells.push_back(line.substr(start));
    if (cells.size() != 4) {
      throw FormatError("bad sweep CSV row '" + line + "'");
    }
    SweepRow r;
    r.value = cells[0];
    r.report.iou = detail::parse_number(cells[1]);
    r.report.pd = detail::parse_number(cells[2]);
    r.report.fa = detail::parse_number(cells[3]);
    rows.push_back(r);
  }
  return rows;
}

/// Writes the corpus as images/<id>.png, masks/<id>.png and manifest.json.
inline DatasetManifest export_corpus(const std::vector<GeneratedScene>& scenes, const std::filesystem::path& dir) {
  ensure_directory(dir / "images");
  ensure_directory(dir / "masks");
  DatasetManifest m;
  m.root = ".";
  for (const auto& s : scenes) {
    ManifestEntry e;
    e.id = s.id;
    e.image_path = "images/" + s.id + ".png";
    e.gt_mask_path = std::filesystem::path("masks/" + s.id + ".png");
    e.annotations = s.annotations;
    save_image_png(s.image, dir / e.image_path);
    save_mask_png(s.gt_mask, dir / *e.gt_mask_path);
    m.entries.push_back(std::move(e));
  }
  write_json_file(to_json(m), dir / "manifest.json");
  return m;
}

} // namespace mclc
