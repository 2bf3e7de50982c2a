#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "mclc/components.hpp"
#include "mclc/image.hpp"

namespace mclc {

inline constexpr double kDefaultMatchRadius = 3.0;

inline void require_same_shape(const PseudoMask& a, const PseudoMask& b) {
  if (!a.same_shape(b)) {
    throw DimensionMismatch("masks differ in size: " + std::to_string(a.width()) + "x" +
                            std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                            std::to_string(b.height()));
  }
}

struct OverlapCounts {
  std::size_t intersection = 0;
  std::size_t union_ = 0;
};

inline OverlapCounts overlap(const PseudoMask& pred, const PseudoMask& gt) {
  require_same_shape(pred, gt);
  OverlapCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    c.intersection += (pred[i] && gt[i]) ? 1 : 0;
    c.union_ += (pred[i] || gt[i]) ? 1 : 0;
  }
  return c;
}

/// |pred & gt| / |pred | gt|, or 1 when both are empty.
inline double compute_iou(const PseudoMask& pred, const PseudoMask& gt) {
  const auto c = overlap(pred, gt);
  return c.union_ == 0 ? 1.0 : static_cast<double>(c.intersection) / static_cast<double>(c.union_);
}

struct DetectionCounts {
  std::size_t targets = 0;
  std::size_t detected = 0;
  std::size_t false_components = 0;
  std::size_t false_pixels = 0;
  std::size_t pixels = 0;
};

/// Target-level matching. Ground-truth and predicted masks are split into
/// 8-connected components; every (pred, gt) pair whose centroids lie within
/// `match_radius` is a candidate, and candidates are accepted greedily by
/// increasing distance so each side is used at most once.
inline DetectionCounts match_targets(const PseudoMask& pred, const PseudoMask& gt, double match_radius) {
  require_same_shape(pred, gt);
  const auto gt_comps = connected_components(gt);
  const auto pred_comps = connected_components(pred);

  std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
  for (std::size_t p = 0; p < pred_comps.size(); ++p) {
    for (std::size_t g = 0; g < gt_comps.size(); ++g) {
      const double d = std::hypot(pred_comps[p].cx - gt_comps[g].cx, pred_comps[p].cy - gt_comps[g].cy);
      if (d <= match_radius) {
        candidates.emplace_back(d, p, g);
      }
    }
  }
  std::sort(candidates.begin(), candidates.end());

  std::vector<bool> pred_used(pred_comps.size(), false);
  std::vector<bool> gt_used(gt_comps.size(), false);
  DetectionCounts c;
  c.targets = gt_comps.size();
  c.pixels = pred.size();
  for (const auto& [d, p, g] : candidates) {
    if (pred_used[p] || gt_used[g]) {
      continue;
    }
    pred_used[p] = true;
    gt_used[g] = true;
    ++c.detected;
  }
  for (std::size_t p = 0; p < pred_comps.size(); ++p) {
    if (!pred_used[p]) {
      ++c.false_components;
      c.false_pixels += pred_comps[p].pixels.size();
    }
  }
  return c;
}

struct PdFa {
  double pd = 0.0;
  double fa = 0.0;
  DetectionCounts counts;
};

/// pd = detected / targets (1 when there are no targets);
/// fa = unmatched predicted pixels / image pixels.
inline PdFa compute_pd_fa(const PseudoMask& pred, const PseudoMask& gt, double match_radius = kDefaultMatchRadius) {
  PdFa r;
  r.counts = match_targets(pred, gt, match_radius);
  r.pd = r.counts.targets == 0 ? 1.0
                               : static_cast<double>(r.counts.detected) / static_cast<double>(r.counts.targets);
  r.fa = static_cast<double>(r.counts.false_pixels) / static_cast<double>(r.counts.pixels);
  return r;
}

struct EvalReport {
  /// Dataset-summed intersection over dataset-summed union.
  double iou = 0.0;
  /// Unweighted mean of per-image IoU.
  double mean_iou = 0.0;
  double pd = 0.0;
  double fa = 0.0;
  std::size_t n_targets_gt = 0;
  std::size_t n_targets_detected = 0;
  std::size_t n_false_components = 0;
  std::size_t n_images = 0;
};

/// Dataset totals: IoU from summed intersections and unions, Pd and Fa from
/// summed target and pixel counts.
inline EvalReport evaluate_dataset(std::span<const PseudoMask> preds, std::span<const PseudoMask> gts,
                                   double match_radius = kDefaultMatchRadius) {
  if (preds.size() != gts.size() || preds.empty()) {
    throw LengthMismatch("evaluation needs equally many (and at least one) predictions and ground truths; got " +
                         std::to_string(preds.size()) + " vs " + std::to_string(gts.size()));
  }
  std::size_t inter = 0, uni = 0, false_pixels = 0, pixels = 0;
  EvalReport r;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto o = overlap(preds[i], gts[i]);
    inter += o.intersection;
    uni += o.union_;
    r.mean_iou += (o.union_ == 0 ? 1.0 : static_cast<double>(o.intersection) / static_cast<double>(o.union_)) /
                  static_cast<double>(preds.size());
    const auto d = match_targets(preds[i], gts[i], match_radius);
    r.n_targets_gt += d.targets;
    r.n_targets_detected += d.detected;
    r.n_false_components += d.false_components;
    false_pixels += d.false_pixels;
    pixels += d.pixels;
  }
  r.n_images = preds.size();
  r.iou = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  r.pd = r.n_targets_gt == 0 ? 1.0 : static_cast<double>(r.n_targets_detected) / static_cast<double>(r.n_targets_gt);
  r.fa = static_cast<double>(false_pixels) / static_cast<double>(pixels);
  return r;
}

/// Table units: IoU and Pd in 1e-2, Fa in 1e-6.
struct ReportUnits {
  double iou = 0.0;
  double pd = 0.0;
  double fa = 0.0;
};

inline ReportUnits in_table_units(const EvalReport& r) { return {r.iou * 1e2, r.pd * 1e2, r.fa * 1e6}; }

inline std::string format_table(const EvalReport& r) {
  const auto u = in_table_units(r);
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%-8s %10s %10s %10s %8s %9s %7s\n"
                "%-8s %10.2f %10.2f %10.2f %8zu %9zu %7zu\n",
                "", "IoU(e-2)", "Pd(e-2)", "Fa(e-6)", "targets", "detected", "images", "total", u.iou, u.pd, u.fa,
                r.n_targets_gt, r.n_targets_detected, r.n_images);
  return buf;
}

} // namespace mclc
