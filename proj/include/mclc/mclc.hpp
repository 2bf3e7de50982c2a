#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "mclc/clustering.hpp"
#include "mclc/components.hpp"
#include "mclc/image.hpp"
#include "mclc/noise.hpp"

namespace mclc {

/// Monte Carlo regularisation settings. Run k (1-based) perturbs the image
/// with `noise` reseeded to noise.seed + k.
struct MclcParams {
  ClusterParams cluster;
  NoiseSpec noise;
  int max_runs = 100;
  double outer_threshold = 0.02;
  int check_interval = 10;
  double binarize_threshold = 0.5;
  /// Half-size of the square patch clustered around the annotation; 0
  /// clusters the whole image.
  int patch_radius = 20;

  void validate() const {
    cluster.validate();
    noise.validate();
    if (max_runs < 1) {
      throw InvalidParams("max_runs must be at least 1");
    }
    if (!(outer_threshold > 0.0)) {
      throw InvalidParams("outer_threshold must be positive");
    }
    if (check_interval < 1) {
      throw InvalidParams("check_interval must be at least 1");
    }
    if (!(binarize_threshold > 0.0 && binarize_threshold < 1.0)) {
      throw InvalidParams("binarize_threshold must lie in (0, 1)");
    }
    if (patch_radius < 0) {
      throw InvalidParams("patch_radius must be non-negative");
    }
  }

  friend bool operator==(const MclcParams&, const MclcParams&) = default;
};

struct MclcOutcome {
  TargetProbabilityMap tpm;
  Window patch;
  /// Runs executed; below max_runs when the outer test stopped early.
  int runs = 0;
  bool stopped_early = false;
};

/// One clustering pass over a patch: LCA, connectivity enforcement, then the
/// annotation's connected cluster (patch coordinates).
struct PatchClustering {
  ClusterField field;
  PseudoMask mask;
};

inline PatchClustering cluster_patch(const InfraredImage& patch_img, PixelCoord local, const ClusterParams& cluster) {
  PatchClustering r;
  r.field = run_lca(patch_img, cluster);
  if (cluster.min_segment_fraction > 0.0) {
    enforce_connectivity(r.field, min_segment_size(cluster, patch_img.width(), patch_img.height()));
  }
  r.mask = extract_target_cluster(r.field, local);
  return r;
}

inline PseudoMask paste(const PseudoMask& local, const Window& patch, int width, int height) {
  PseudoMask out(width, height);
  for (int y = 0; y < patch.height; ++y) {
    for (int x = 0; x < patch.width; ++x) {
      if (local.at(x, y)) {
        out.set(x + patch.x0, y + patch.y0, true);
      }
    }
  }
  return out;
}

/// Plain (noise-free, single run) LCA pseudo mask on the annotation patch.
inline PseudoMask lca_target_mask(const InfraredImage& img, const PointAnnotation& anno, const MclcParams& params) {
  params.validate();
  require_in_bounds(img, anno.coord());
  const Window patch = centered_window(anno.coord(), params.patch_radius, img.width(), img.height());
  params.cluster.validate_for(patch.width, patch.height);
  const auto r = cluster_patch(img.crop(patch), {anno.x - patch.x0, anno.y - patch.y0}, params.cluster);
  PseudoMask out = paste(r.mask, patch, img.width(), img.height());
  out.provenance.method = "lca";
  return out;
}

/// Integer hit counts over equally sized masks; the TPM divides once.
inline TargetProbabilityMap accumulate_masks(std::span<const PseudoMask> masks) {
  if (masks.empty()) {
    throw InvalidParams("no masks to accumulate");
  }
  std::vector<std::uint32_t> counts(masks[0].size(), 0);
  for (const auto& m : masks) {
    if (!m.same_shape(masks[0])) {
      throw DimensionMismatch("masks to accumulate differ in size");
    }
    for (std::size_t i = 0; i < m.size(); ++i) {
      counts[i] += m[i] ? 1U : 0U;
    }
  }
  return TargetProbabilityMap(masks[0].width(), masks[0].height(), std::move(counts),
                              static_cast<std::uint32_t>(masks.size()));
}

/// TPM = (1/K) sum_k extract(LCA(clip(I + N_k))), clustering only the patch
/// around the annotation. Every check_interval runs
/// the running mean of the annotation cluster's center (normalised as in the
/// distance) is compared with its value at the previous check; the loop stops
/// once it moves by less than outer_threshold.
inline MclcOutcome run_mclc_detailed(const InfraredImage& img, const PointAnnotation& anno,
                                     const MclcParams& params) {
  params.validate();
  require_in_bounds(img, anno.coord());
  const Window patch = centered_window(anno.coord(), params.patch_radius, img.width(), img.height());
  params.cluster.validate_for(patch.width, patch.height);
  const DistanceScale k = resolve_scale(params.cluster, patch.width, patch.height);
  const PixelCoord local{anno.x - patch.x0, anno.y - patch.y0};

  std::vector<std::uint32_t> counts(img.size(), 0);
  double sum_c = 0.0, sum_x = 0.0, sum_y = 0.0;
  std::optional<ClusterCenter> previous_mean;

  MclcOutcome out;
  out.patch = patch;
  for (int run = 1; run <= params.max_runs; ++run) {
    const auto noise = params.noise.with_seed(params.noise.seed + static_cast<std::uint64_t>(run));
    const auto r = cluster_patch(add_noise(img, noise).crop(patch), local, params.cluster);
    for (int y = 0; y < patch.height; ++y) {
      for (int x = 0; x < patch.width; ++x) {
        if (r.mask.at(x, y)) {
          ++counts[img.index(x + patch.x0, y + patch.y0)];
        }
      }
    }
    const auto& ctr = r.field.centers[static_cast<std::size_t>(r.field.label_at(local.x, local.y))];
    sum_c += ctr.c / k.mu_c;
    sum_x += (ctr.x + patch.x0) / k.mu_s;
    sum_y += (ctr.y + patch.y0) / k.mu_s;
    out.runs = run;

    if (run % params.check_interval == 0 && run < params.max_runs) {
      const ClusterCenter mean{sum_c / run, sum_x / run, sum_y / run};
      if (previous_mean) {
        const double dc = mean.c - previous_mean->c;
        const double dx = mean.x - previous_mean->x;
        const double dy = mean.y - previous_mean->y;
        if (std::sqrt(dc * dc + dx * dx + dy * dy) < params.outer_threshold) {
          out.stopped_early = true;
          break;
        }
      }
      previous_mean = mean;
    }
  }
  out.tpm = TargetProbabilityMap(img.width(), img.height(), std::move(counts),
                                 static_cast<std::uint32_t>(out.runs));
  return out;
}

inline TargetProbabilityMap run_mclc(const InfraredImage& img, const PointAnnotation& anno,
                                     const MclcParams& params) {
  return run_mclc_detailed(img, anno, params).tpm;
}

inline constexpr int kFallbackRadius = 5;

/// The 8-connected component of `member` pixels around the annotation. When
/// the annotation pixel is not a member, the component of the highest-scoring
/// member within kFallbackRadius of it is used instead (first in raster order
/// on ties). Throws EmptyMask when nothing qualifies.
template <typename Member, typename Score>
PseudoMask anchored_component(int width, int height, PixelCoord anno, Member&& member, Score&& score) {
  PixelCoord seed = anno;
  if (!member(anno.x, anno.y)) {
    double best = -std::numeric_limits<double>::infinity();
    bool found = false;
    for (int y = anno.y - kFallbackRadius; y <= anno.y + kFallbackRadius; ++y) {
      for (int x = anno.x - kFallbackRadius; x <= anno.x + kFallbackRadius; ++x) {
        const int dx = x - anno.x;
        const int dy = y - anno.y;
        if (x < 0 || y < 0 || x >= width || y >= height || dx * dx + dy * dy > kFallbackRadius * kFallbackRadius) {
          continue;
        }
        if (member(x, y) && score(x, y) > best) {
          best = score(x, y);
          seed = {x, y};
          found = true;
        }
      }
    }
    if (!found) {
      throw EmptyMask("no foreground pixel within " + std::to_string(kFallbackRadius) +
                      " px of the annotation");
    }
  }
  return flood_component(width, height, seed, member);
}

/// Threshold at tau and keep the component anchored at the annotation.
inline PseudoMask binarize(const TargetProbabilityMap& tpm, const PointAnnotation& anno, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw InvalidParams("binarize threshold must lie in (0, 1)");
  }
  require_in_bounds(tpm, anno.coord());
  auto member = [&](int x, int y) { return tpm.prob(x, y) >= tau; };
  bool any = false;
  for (std::size_t i = 0; i < tpm.size() && !any; ++i) {
    any = tpm.prob(i) >= tau;
  }
  if (!any) {
    throw EmptyMask("no probability reaches the threshold");
  }
  return anchored_component(tpm.width(), tpm.height(), anno.coord(), member,
                            [&](int x, int y) { return tpm.prob(x, y); });
}

struct DiagnosticsRecord {
  double noise_intensity = 0.0;
  double delta_dc_true = 0.0;
  double delta_dc_false_min = 0.0;
  double delta_dc_false_max = 0.0;
  int samples = 0;
};

/// Colour-distance shift caused by noise.
///
/// Centers are fixed by the clean image: the true center colour is the mean
/// intensity of the ground-truth target component, and the false centers are
/// the clean clusters owning pixels of the target's outer 8-neighbour ring,
/// each coloured by the mean clean intensity of its pixels outside the target.
/// The edge set is the target's boundary and is re-read from every noisy copy:
///   D_c(C) = mean over edge pixels e of |I(e) - c_C| / mu_c.
/// Each record holds the trial-averaged D_c(noisy) - D_c(clean) for the true
/// center and the min/max of the same quantity over false centers.
/// `samples` counts edge pixels times trials. Trial t uses seed
/// noise.seed + t + 1.
inline std::vector<DiagnosticsRecord> measure_color_shift(const InfraredImage& img, const PseudoMask& gt,
                                                          const PointAnnotation& anno, const MclcParams& params,
                                                          std::span<const double> intensities, int trials = 10) {
  params.validate();
  if (trials < 1) {
    throw InvalidParams("color shift needs at least one trial");
  }
  if (gt.width() != img.width() || gt.height() != img.height()) {
    throw MissingGroundTruth("ground-truth mask does not match the image");
  }
  require_in_bounds(img, anno.coord());
  if (!gt.at(anno.x, anno.y)) {
    throw MissingGroundTruth("annotation does not lie on a ground-truth target");
  }
  const Window patch = centered_window(anno.coord(), params.patch_radius, img.width(), img.height());
  const PixelCoord local{anno.x - patch.x0, anno.y - patch.y0};

  PseudoMask gt_local(patch.width, patch.height);
  for (int y = 0; y < patch.height; ++y) {
    for (int x = 0; x < patch.width; ++x) {
      gt_local.set(x, y, gt.at(x + patch.x0, y + patch.y0));
    }
  }
  const PseudoMask target = component_containing(gt_local, local);
  const std::vector<PixelCoord> edge = boundary_pixels(target);

  const InfraredImage clean = img.crop(patch);
  const ClusterField field = cluster_patch(clean, local, params.cluster).field;

  std::set<int> false_labels;
  for (int y = 0; y < patch.height; ++y) {
    for (int x = 0; x < patch.width; ++x) {
      if (target.at(x, y)) {
        continue;
      }
      bool ring = false;
      for (int dy = -1; dy <= 1 && !ring; ++dy) {
        for (int dx = -1; dx <= 1 && !ring; ++dx) {
          ring = target.in_bounds(x + dx, y + dy) && target.at(x + dx, y + dy);
        }
      }
      if (ring) {
        false_labels.insert(field.label_at(x, y));
      }
    }
  }
  if (false_labels.empty()) {
    throw InvalidParams("no false clustering center borders the target");
  }

  // Center colours: index 0 is the true center, then one per false label.
  std::vector<double> sum(1 + false_labels.size(), 0.0);
  std::vector<int> count(sum.size(), 0);
  std::vector<int> slot_of_label(field.centers.size(), -1);
  int next = 1;
  for (int l : false_labels) {
    slot_of_label[static_cast<std::size_t>(l)] = next++;
  }
  for (int y = 0; y < patch.height; ++y) {
    for (int x = 0; x < patch.width; ++x) {
      const int s = target.at(x, y) ? 0 : slot_of_label[static_cast<std::size_t>(field.label_at(x, y))];
      if (s >= 0) {
        sum[static_cast<std::size_t>(s)] += clean.at(x, y);
        ++count[static_cast<std::size_t>(s)];
      }
    }
  }
  std::vector<double> centers(sum.size());
  for (std::size_t s = 0; s < sum.size(); ++s) {
    centers[s] = sum[s] / count[s];
  }

  auto color_distances = [&](const InfraredImage& local_img) {
    std::vector<double> d(centers.size(), 0.0);
    for (const auto& p : edge) {
      for (std::size_t s = 0; s < centers.size(); ++s) {
        d[s] += std::abs(local_img.at(p.x, p.y) - centers[s]);
      }
    }
    for (double& v : d) {
      v /= static_cast<double>(edge.size()) * params.cluster.mu_c;
    }
    return d;
  };

  const std::vector<double> base = color_distances(clean);
  std::vector<DiagnosticsRecord> records;
  for (double intensity : intensities) {
    NoiseSpec noise = params.noise;
    noise.intensity = intensity;
    noise.validate();
    std::vector<double> acc(centers.size(), 0.0);
    for (int t = 0; t < trials; ++t) {
      const auto noisy = add_noise(img, noise.with_seed(params.noise.seed + static_cast<std::uint64_t>(t) + 1));
      const auto d = color_distances(noisy.crop(patch));
      for (std::size_t s = 0; s < centers.size(); ++s) {
        acc[s] += d[s] - base[s];
      }
    }
    DiagnosticsRecord rec;
    rec.noise_intensity = intensity;
    rec.delta_dc_true = acc[0] / trials;
    rec.delta_dc_false_min = std::numeric_limits<double>::infinity();
    rec.delta_dc_false_max = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 1; s < centers.size(); ++s) {
      rec.delta_dc_false_min = std::min(rec.delta_dc_false_min, acc[s] / trials);
      rec.delta_dc_false_max = std::max(rec.delta_dc_false_max, acc[s] / trials);
    }
    rec.samples = static_cast<int>(edge.size()) * trials;
    records.push_back(rec);
  }
  return records;
}

} // namespace mclc
