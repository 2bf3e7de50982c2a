#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mclc/components.hpp"
#include "mclc/image.hpp"

namespace mclc {

enum class ClusterBackend { SlicLike, KMeans };

inline std::string to_string(ClusterBackend b) { return b == ClusterBackend::KMeans ? "kmeans" : "slic"; }

inline ClusterBackend backend_from_string(const std::string& s) {
  if (s == "slic") return ClusterBackend::SlicLike;
  if (s == "kmeans") return ClusterBackend::KMeans;
  throw InvalidParams("unknown clustering backend '" + s + "'");
}

struct ClusterParams {
  int n_clusters = 9;
  double mu_c = 10.0;
  /// Spatial normalisation; unset means the grid interval S of the image
  /// being clustered.
  std::optional<double> mu_s;
  double conv_threshold = 0.5;
  int max_iters = 10;
  ClusterBackend backend = ClusterBackend::SlicLike;
  /// Connectivity enforcement: 4-connected label fragments smaller than this
  /// fraction of S^2 are merged into a neighbour. 0 disables it.
  double min_segment_fraction = 0.25;

  void validate() const {
    if (n_clusters < 1) {
      throw InvalidParams("n_clusters must be at least 1");
    }
    if (!(mu_c > 0.0) || (mu_s && !(*mu_s > 0.0)) || !(conv_threshold > 0.0)) {
      throw InvalidParams("mu_c, mu_s and conv_threshold must be positive");
    }
    if (max_iters < 0) {
      throw InvalidParams("max_iters must be non-negative");
    }
    if (!(min_segment_fraction >= 0.0)) {
      throw InvalidParams("min_segment_fraction must be non-negative");
    }
  }

  void validate_for(int width, int height) const {
    validate();
    if (static_cast<long long>(n_clusters) > static_cast<long long>(width) * height) {
      throw InvalidParams("n_clusters (" + std::to_string(n_clusters) + ") exceeds pixel count");
    }
  }

  friend bool operator==(const ClusterParams&, const ClusterParams&) = default;
};

/// C_n = [c, s]: mean intensity and sub-pixel position.
struct ClusterCenter {
  double c = 0.0;
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const ClusterCenter&, const ClusterCenter&) = default;
};

/// Grid interval S = sqrt(W H / N).
inline double grid_interval(int width, int height, int n_clusters) {
  return std::sqrt(static_cast<double>(width) * static_cast<double>(height) / static_cast<double>(n_clusters));
}

/// Normalisation pair resolved against a concrete raster.
struct DistanceScale {
  double mu_c = 1.0;
  double mu_s = 1.0;
};

inline DistanceScale resolve_scale(const ClusterParams& p, int width, int height) {
  return {p.mu_c, p.mu_s.value_or(grid_interval(width, height, p.n_clusters))};
}

/// sqrt((c_i - c_n)^2 / mu_c^2 + |s_i - s_n|^2 / mu_s^2)
inline double distance(const ClusterCenter& center, double c, double x, double y, DistanceScale k) {
  const double dc = c - center.c;
  const double dx = x - center.x;
  const double dy = y - center.y;
  return std::sqrt((dc * dc) / (k.mu_c * k.mu_c) + (dx * dx + dy * dy) / (k.mu_s * k.mu_s));
}

/// How the N centers tile the raster: nx columns, ceil(N / nx) rows, cells of
/// real-valued size. For square N on a square raster the cell edge equals S.
struct GridLayout {
  int nx = 1;
  int ny = 1;
  double cell_w = 1.0;
  double cell_h = 1.0;
};

inline GridLayout grid_layout(int width, int height, int n_clusters) {
  const double s = grid_interval(width, height, n_clusters);
  GridLayout g;
  g.nx = std::clamp(static_cast<int>(std::lround(width / s)), 1, n_clusters);
  g.ny = (n_clusters + g.nx - 1) / g.nx;
  g.cell_w = static_cast<double>(width) / g.nx;
  g.cell_h = static_cast<double>(height) / g.ny;
  return g;
}

/// |I(x+1,y) - I(x-1,y)| + |I(x,y+1) - I(x,y-1)| with replicated borders.
inline double gradient_magnitude(const InfraredImage& img, int x, int y) {
  return std::abs(img.clamped_at(x + 1, y) - img.clamped_at(x - 1, y)) +
         std::abs(img.clamped_at(x, y + 1) - img.clamped_at(x, y - 1));
}

inline int round_to_pixel(double v, int extent) {
  return std::clamp(static_cast<int>(std::floor(v + 0.5)), 0, extent - 1);
}

/// Grid-seeded centers, each nudged to the flattest pixel of the 3x3
/// neighbourhood around its cell centroid. The centroid keeps its exact
/// real-valued position unless some neighbour is strictly flatter.
inline std::vector<ClusterCenter> init_centers(const InfraredImage& img, const ClusterParams& params) {
  params.validate_for(img.width(), img.height());
  const GridLayout g = grid_layout(img.width(), img.height(), params.n_clusters);
  std::vector<ClusterCenter> centers;
  centers.reserve(static_cast<std::size_t>(params.n_clusters));
  for (int n = 0; n < params.n_clusters; ++n) {
    const int col = n % g.nx;
    const int row = n / g.nx;
    const double cx = (col + 0.5) * g.cell_w - 0.5;
    const double cy = (row + 0.5) * g.cell_h - 0.5;
    const int px = round_to_pixel(cx, img.width());
    const int py = round_to_pixel(cy, img.height());

    double best = gradient_magnitude(img, px, py);
    int bx = px;
    int by = py;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int qx = px + dx;
        const int qy = py + dy;
        if (!img.in_bounds(qx, qy)) {
          continue;
        }
        const double g2 = gradient_magnitude(img, qx, qy);
        if (g2 < best) {
          best = g2;
          bx = qx;
          by = qy;
        }
      }
    }
    if (bx == px && by == py) {
      centers.push_back({img.at(px, py), cx, cy});
    } else {
      centers.push_back({img.at(bx, by), static_cast<double>(bx), static_cast<double>(by)});
    }
  }
  return centers;
}

/// Nearest center per pixel; ties go to the lower index. SlicLike restricts
/// candidates to centers inside the 2S x 2S window around the pixel and falls
/// back to all centers when that window is empty.
inline std::vector<int> assign(const InfraredImage& img, std::span<const ClusterCenter> centers,
                               const ClusterParams& params) {
  if (centers.empty()) {
    throw InvalidParams("assign needs at least one center");
  }
  const int n = static_cast<int>(centers.size());
  const DistanceScale k{params.mu_c,
                        params.mu_s.value_or(grid_interval(img.width(), img.height(), n))};
  const double s = grid_interval(img.width(), img.height(), n);
  const bool windowed = params.backend == ClusterBackend::SlicLike;

  std::vector<int> labels(img.size(), 0);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double c = img.at(x, y);
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      if (windowed) {
        for (int i = 0; i < n; ++i) {
          const auto& ctr = centers[static_cast<std::size_t>(i)];
          if (std::abs(ctr.x - x) > s || std::abs(ctr.y - y) > s) {
            continue;
          }
          const double d = distance(ctr, c, x, y, k);
          if (d < best_d) {
            best_d = d;
            best = i;
          }
        }
      }
      if (best < 0) {
        for (int i = 0; i < n; ++i) {
          const double d = distance(centers[static_cast<std::size_t>(i)], c, x, y, k);
          if (d < best_d) {
            best_d = d;
            best = i;
          }
        }
      }
      labels[img.index(x, y)] = best;
    }
  }
  return labels;
}

/// Member means of (c, x, y); an empty cluster keeps its previous center.
inline std::vector<ClusterCenter> update_centers(const InfraredImage& img, std::span<const int> labels,
                                                 std::span<const ClusterCenter> previous) {
  const std::size_t n = previous.size();
  std::vector<double> sc(n, 0.0), sx(n, 0.0), sy(n, 0.0);
  std::vector<std::size_t> count(n, 0);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const auto l = static_cast<std::size_t>(labels[img.index(x, y)]);
      sc[l] += img.at(x, y);
      sx[l] += x;
      sy[l] += y;
      ++count[l];
    }
  }
  std::vector<ClusterCenter> out(previous.begin(), previous.end());
  for (std::size_t i = 0; i < n; ++i) {
    if (count[i] == 0) {
      continue;
    }
    const auto m = static_cast<double>(count[i]);
    out[i] = {sc[i] / m, sx[i] / m, sy[i] / m};
  }
  return out;
}

/// Per-pixel labels plus the centers they were assigned against.
struct ClusterField {
  int width = 0;
  int height = 0;
  std::vector<int> labels;
  std::vector<ClusterCenter> centers;
  int iterations_run = 0;
  bool converged = false;

  int label_at(int x, int y) const noexcept {
    return labels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
  bool in_bounds(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width && y < height; }
};

/// Called once after the initial assignment (iteration 0) and once after
/// each update/assign step.
using LcaObserver =
    std::function<void(int iteration, std::span<const ClusterCenter> centers, std::span<const int> labels)>;

/// Largest normalised movement between two center sets.
inline double max_center_shift(std::span<const ClusterCenter> before, std::span<const ClusterCenter> after,
                               DistanceScale k) {
  double shift = 0.0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    shift = std::max(shift, distance(before[i], after[i].c, after[i].x, after[i].y, k));
  }
  return shift;
}

/// Linear clustering: grid init, then assign/update until no center moves by
/// T or more (normalised units) or max_iters updates have run.
inline ClusterField run_lca(const InfraredImage& img, const ClusterParams& params,
                            const LcaObserver& observer = {}) {
  params.validate_for(img.width(), img.height());
  const DistanceScale k = resolve_scale(params, img.width(), img.height());

  ClusterField field;
  field.width = img.width();
  field.height = img.height();
  field.centers = init_centers(img, params);
  field.labels = assign(img, field.centers, params);
  if (observer) {
    observer(0, field.centers, field.labels);
  }
  while (field.iterations_run < params.max_iters) {
    auto next = update_centers(img, field.labels, field.centers);
    const double shift = max_center_shift(field.centers, next, k);
    field.centers = std::move(next);
    field.labels = assign(img, field.centers, params);
    ++field.iterations_run;
    if (observer) {
      observer(field.iterations_run, field.centers, field.labels);
    }
    if (shift < params.conv_threshold) {
      field.converged = true;
      break;
    }
  }
  return field;
}

/// SLIC post-processing: relabels every 4-connected fragment of fewer than
/// `min_size` pixels with the label of the adjacent fragment it shares the
/// longest border with. Fragments are visited smallest first (raster order of
/// first pixel on ties); border ties go to the lower fragment id. Centers are
/// left untouched, so the result no longer satisfies nearest-center
/// optimality.
inline void enforce_connectivity(ClusterField& field, std::size_t min_size) {
  const int w = field.width;
  const int h = field.height;
  const std::size_t n = field.labels.size();
  std::vector<int> frag(n, -1);
  std::vector<std::size_t> size;
  std::vector<int> frag_label;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < n; ++start) {
    if (frag[start] >= 0) {
      continue;
    }
    const int id = static_cast<int>(size.size());
    const int label = field.labels[start];
    std::size_t count = 0;
    frag[start] = id;
    stack.assign(1, start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++count;
      const int px = static_cast<int>(p % static_cast<std::size_t>(w));
      const int py = static_cast<int>(p / static_cast<std::size_t>(w));
      const int nbr[4][2] = {{px + 1, py}, {px - 1, py}, {px, py + 1}, {px, py - 1}};
      for (const auto& q : nbr) {
        if (q[0] < 0 || q[1] < 0 || q[0] >= w || q[1] >= h) {
          continue;
        }
        const std::size_t qi = static_cast<std::size_t>(q[1]) * static_cast<std::size_t>(w) + static_cast<std::size_t>(q[0]);
        if (frag[qi] < 0 && field.labels[qi] == label) {
          frag[qi] = id;
          stack.push_back(qi);
        }
      }
    }
    size.push_back(count);
    frag_label.push_back(label);
  }

  const std::size_t frags = size.size();
  std::vector<std::map<int, std::size_t>> border(frags);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
      if (x + 1 < w && frag[i + 1] != frag[i]) {
        ++border[static_cast<std::size_t>(frag[i])][frag[i + 1]];
        ++border[static_cast<std::size_t>(frag[i + 1])][frag[i]];
      }
      if (y + 1 < h) {
        const std::size_t j = i + static_cast<std::size_t>(w);
        if (frag[j] != frag[i]) {
          ++border[static_cast<std::size_t>(frag[i])][frag[j]];
          ++border[static_cast<std::size_t>(frag[j])][frag[i]];
        }
      }
    }
  }

  std::vector<int> parent(frags);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&parent](int a) {
    while (parent[static_cast<std::size_t>(a)] != a) {
      parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
      a = parent[static_cast<std::size_t>(a)];
    }
    return a;
  };
  std::vector<std::size_t> merged_size = size;
  std::vector<int> order(frags);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&size](int a, int b) {
    return size[static_cast<std::size_t>(a)] < size[static_cast<std::size_t>(b)];
  });

  for (int f : order) {
    const int root = find(f);
    const auto r = static_cast<std::size_t>(root);
    if (merged_size[r] >= min_size) {
      continue;
    }
    // Accumulate borders against current roots.
    std::map<int, std::size_t> against;
    for (const auto& [other, len] : border[r]) {
      const int o = find(other);
      if (o != root) {
        against[o] += len;
      }
    }
    if (against.empty()) {
      continue;
    }
    int best = -1;
    std::size_t best_len = 0;
    for (const auto& [o, len] : against) {
      if (len > best_len) {
        best_len = len;
        best = o;
      }
    }
    const auto b = static_cast<std::size_t>(best);
    parent[r] = best;
    merged_size[b] += merged_size[r];
    for (const auto& [other, len] : border[r]) {
      border[b][other] += len;
    }
    border[r].clear();
  }
  for (std::size_t i = 0; i < n; ++i) {
    field.labels[i] = frag_label[static_cast<std::size_t>(find(frag[i]))];
  }
}

/// Minimum fragment size implied by the parameters on a width x height raster.
inline std::size_t min_segment_size(const ClusterParams& params, int width, int height) {
  const double s = grid_interval(width, height, params.n_clusters);
  return static_cast<std::size_t>(params.min_segment_fraction * s * s);
}

/// Pixels sharing the annotation's label, limited to the 8-connected region
/// that contains the annotation.
inline PseudoMask extract_target_cluster(const ClusterField& field, PixelCoord anno) {
  if (!field.in_bounds(anno.x, anno.y)) {
    throw OutOfBounds("annotation (" + std::to_string(anno.x) + ", " + std::to_string(anno.y) +
                      ") lies outside the clustered raster");
  }
  const int target = field.label_at(anno.x, anno.y);
  return flood_component(field.width, field.height, anno,
                         [&](int x, int y) { return field.label_at(x, y) == target; });
}

} // namespace mclc
