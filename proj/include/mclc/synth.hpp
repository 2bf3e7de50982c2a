#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "mclc/components.hpp"
#include "mclc/image.hpp"
#include "mclc/rng.hpp"

namespace mclc {

enum class TargetKind { Point, Spot, Extended };

inline TargetCategory category_of(TargetKind k) {
  switch (k) {
  case TargetKind::Point: return TargetCategory::Point;
  case TargetKind::Spot: return TargetCategory::Spot;
  case TargetKind::Extended: return TargetCategory::Extended;
  }
  return TargetCategory::Unknown;
}

/// Gaussian blob peak * exp(-(dx^2 / 2 sx^2 + dy^2 / 2 sy^2)). Point and Spot
/// targets are isotropic (sigma_minor ignored); Extended targets stretch
/// along x by `sigma` and along y by `sigma_minor`.
struct TargetSpec {
  TargetKind kind = TargetKind::Spot;
  double x = 0.0;
  double y = 0.0;
  double peak = 200.0;
  double sigma = 2.0;
  double sigma_minor = 0.0;

  double sigma_x() const noexcept { return sigma; }
  double sigma_y() const noexcept {
    return kind == TargetKind::Extended && sigma_minor > 0.0 ? sigma_minor : sigma;
  }
};

struct BackgroundSpec {
  double base = 30.0;
  double clutter_sigma = 0.0;
  int blobs = 0;
};

struct SceneSpec {
  int width = 256;
  int height = 256;
  std::vector<TargetSpec> targets;
  BackgroundSpec background;
  std::uint64_t seed = 0;
};

struct GeneratedScene {
  std::string id;
  InfraredImage image;
  PseudoMask gt_mask;
  std::vector<PointAnnotation> annotations;
};

inline constexpr double kGtCutoff = 0.1;      // mask where contribution >= 10% of peak
inline constexpr double kMaxSmallTargetArea = 0.0015;

inline double target_contribution(const TargetSpec& t, double x, double y) {
  const double dx = x - t.x;
  const double dy = y - t.y;
  const double sx = t.sigma_x();
  const double sy = t.sigma_y();
  return t.peak * std::exp(-(dx * dx / (2.0 * sx * sx) + dy * dy / (2.0 * sy * sy)));
}

inline void validate(const SceneSpec& spec) {
  if (spec.width <= 0 || spec.height <= 0) {
    throw InvalidSpec("scene dimensions must be positive");
  }
  if (spec.background.base < 0.0 || spec.background.base > kMaxIntensity || spec.background.clutter_sigma < 0.0 ||
      spec.background.blobs < 0) {
    throw InvalidSpec("invalid background spec");
  }
  for (const auto& t : spec.targets) {
    if (t.x < 0.0 || t.y < 0.0 || t.x > spec.width - 1 || t.y > spec.height - 1) {
      throw InvalidSpec("target center out of bounds");
    }
    if (!(t.peak > 0.0) || t.peak > kMaxIntensity || !(t.sigma > 0.0)) {
      throw InvalidSpec("target peak must lie in (0, 255] and sigma must be positive");
    }
    if (t.kind != TargetKind::Extended) {
      // analytic area of the cutoff disc: pi * 2 sigma^2 ln(1 / cutoff)
      const double area = std::numbers::pi * 2.0 * t.sigma * t.sigma * std::log(1.0 / kGtCutoff);
      if (area > kMaxSmallTargetArea * spec.width * spec.height) {
        throw InvalidSpec("point/spot target exceeds 0.15% of the image area");
      }
    }
  }
}

/// Renders background + targets, rounds to integer intensities and derives
/// ground truth. Clutter depends on `seed`; targets and ground truth do not.
inline GeneratedScene generate_scene(const SceneSpec& spec) {
  validate(spec);
  const int w = spec.width;
  const int h = spec.height;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  std::vector<double> bg(n, spec.background.base);

  SplitMix64 rng(spec.seed);
  for (int b = 0; b < spec.background.blobs; ++b) {
    const double bx = rng.uniform() * w;
    const double by = rng.uniform() * h;
    const double bs = 10.0 + 25.0 * rng.uniform();
    const double amp = (rng.uniform() * 2.0 - 1.0) * 35.0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double dx = x - bx;
        const double dy = y - by;
        bg[static_cast<std::size_t>(y) * w + x] += amp * std::exp(-(dx * dx + dy * dy) / (2.0 * bs * bs));
      }
    }
  }
  if (spec.background.clutter_sigma > 0.0) {
    for (auto& v : bg) {
      v += spec.background.clutter_sigma * rng.normal();
    }
  }

  std::vector<double> fg(n, 0.0);
  PseudoMask gt(w, h);
  std::vector<PseudoMask> per_target;
  for (const auto& t : spec.targets) {
    PseudoMask m(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double v = target_contribution(t, x, y);
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        fg[i] += v;
        if (v >= kGtCutoff * t.peak) {
          m.set(i, true);
        }
      }
    }
    gt |= m;
    per_target.push_back(std::move(m));
  }

  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    data[i] = std::round(std::clamp(std::clamp(bg[i], 0.0, kMaxIntensity) + fg[i], 0.0, kMaxIntensity));
  }

  GeneratedScene scene;
  scene.image = InfraredImage(w, h, std::move(data));
  scene.gt_mask = std::move(gt);
  for (std::size_t k = 0; k < spec.targets.size(); ++k) {
    const PseudoMask& m = per_target[k];
    double sx = 0.0, sy = 0.0, sw = 0.0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (m.at(x, y)) {
          const double v = scene.image.at(x, y);
          sx += v * x;
          sy += v * y;
          sw += v;
        }
      }
    }
    PointAnnotation a;
    a.x = std::clamp(static_cast<int>(std::lround(sx / sw)), 0, w - 1);
    a.y = std::clamp(static_cast<int>(std::lround(sy / sw)), 0, h - 1);
    a.category = category_of(spec.targets[k].kind);
    scene.annotations.push_back(a);
  }
  return scene;
}

/// Spec of corpus scene `index` (1..20). Kinds cycle Point, Spot, Extended;
/// every other parameter is drawn from a SplitMix64 stream seeded by index.
inline SceneSpec corpus_scene_spec(int index) {
  SplitMix64 rng(0x5EED0000ULL + static_cast<std::uint64_t>(index));
  SceneSpec spec;
  spec.width = 256;
  spec.height = 256;
  spec.seed = static_cast<std::uint64_t>(index);
  spec.background.base = 25.0 + 50.0 * rng.uniform();
  spec.background.clutter_sigma = 2.0 + 6.0 * rng.uniform();
  spec.background.blobs = static_cast<int>(rng.below(7));

  TargetSpec t;
  switch ((index - 1) % 3) {
  case 0:
    t.kind = TargetKind::Point;
    t.sigma = 0.8 + 0.5 * rng.uniform();
    break;
  case 1:
    t.kind = TargetKind::Spot;
    t.sigma = 1.5 + 0.7 * rng.uniform();
    break;
  default:
    t.kind = TargetKind::Extended;
    t.sigma = 3.0 + 2.0 * rng.uniform();
    t.sigma_minor = 1.8 + 1.2 * rng.uniform();
    break;
  }
  t.peak = 130.0 + 100.0 * rng.uniform();
  t.x = 48.0 + std::floor(160.0 * rng.uniform());
  t.y = 48.0 + std::floor(160.0 * rng.uniform());
  spec.targets.push_back(t);
  return spec;
}

inline constexpr int kCorpusSize = 20;

inline std::string corpus_scene_id(int index) {
  std::string id = std::to_string(index);
  return "scene_" + std::string(2 - std::min<std::size_t>(2, id.size()), '0') + id;
}

inline GeneratedScene corpus_scene(int index) {
  GeneratedScene s = generate_scene(corpus_scene_spec(index));
  s.id = corpus_scene_id(index);
  for (auto& a : s.annotations) {
    a.image_id = s.id;
  }
  return s;
}

/// The fixed 20-scene corpus, seeds 1..20.
inline std::vector<GeneratedScene> standard_corpus() {
  std::vector<GeneratedScene> out;
  out.reserve(kCorpusSize);
  for (int i = 1; i <= kCorpusSize; ++i) {
    out.push_back(corpus_scene(i));
  }
  return out;
}

/// Labelling-deviation model: offset by a rounded isotropic Gaussian draw
/// (std `sigma`) truncated at radius 3 sigma, then clamped into the raster.
inline PointAnnotation perturb_annotation(const PointAnnotation& anno, double sigma, std::uint64_t seed, int width,
                                          int height) {
  if (sigma < 0.0 || !std::isfinite(sigma)) {
    throw InvalidSpec("perturbation sigma must be finite and non-negative");
  }
  PointAnnotation out = anno;
  if (sigma == 0.0) {
    return out;
  }
  SplitMix64 rng(seed);
  double dx = 0.0;
  double dy = 0.0;
  do {
    dx = sigma * rng.normal();
    dy = sigma * rng.normal();
  } while (dx * dx + dy * dy > 9.0 * sigma * sigma);
  out.x = std::clamp(anno.x + static_cast<int>(std::lround(dx)), 0, width - 1);
  out.y = std::clamp(anno.y + static_cast<int>(std::lround(dy)), 0, height - 1);
  return out;
}

} // namespace mclc
