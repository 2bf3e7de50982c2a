#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "mclc/clustering.hpp"
#include "mclc/components.hpp"
#include "mclc/mclc.hpp"
#include "mclc/rng.hpp"
#include "mclc/synth.hpp"
#include "reference.hpp"

using namespace mclc;

using ref::ref_init;
using ref::ref_lca;

namespace {

struct Trace {
  std::vector<std::vector<ClusterCenter>> centers;
  std::vector<std::vector<int>> labels;
};

LcaObserver recorder(Trace& t) {
  return [&t](int, std::span<const ClusterCenter> c, std::span<const int> l) {
    t.centers.emplace_back(c.begin(), c.end());
    t.labels.emplace_back(l.begin(), l.end());
  };
}

InfraredImage random_image(SplitMix64& rng, int w, int h) {
  std::vector<double> d(static_cast<std::size_t>(w * h));
  for (auto& v : d) v = static_cast<double>(rng.below(256));
  return InfraredImage(w, h, std::move(d));
}

std::vector<double> as_vector(const InfraredImage& img) { return {img.data().begin(), img.data().end()}; }

} // namespace

TEST(Distance, Examples) {
  const DistanceScale unit{1.0, 1.0};
  EXPECT_EQ(distance({7.0, 2.0, 3.0}, 7.0, 2.0, 3.0, unit), 0.0);
  EXPECT_DOUBLE_EQ(distance({10.0, 0, 0}, 20.0, 0, 0, DistanceScale{10.0, 4.0}), 1.0);
  EXPECT_NEAR(distance({0.0, 0, 0}, 3.0, 3.0, 4.0, DistanceScale{3.0, 5.0}), std::sqrt(2.0), 1e-15);
}

TEST(InitCenters, GridIntervalAndLayout) {
  EXPECT_NEAR(grid_interval(256, 256, 9), 256.0 / 3.0, 1e-12);
  const InfraredImage img(256, 256, 40.0);
  ClusterParams p;
  p.n_clusters = 9;
  const auto c = init_centers(img, p);
  ASSERT_EQ(c.size(), 9U);
  const double s = 256.0 / 3.0;
  for (int k = 0; k < 9; ++k) {
    EXPECT_NEAR(c[k].x, (k % 3 + 0.5) * s - 0.5, 1e-12);
    EXPECT_NEAR(c[k].y, (k / 3 + 0.5) * s - 0.5, 1e-12);
  }
}

TEST(InitCenters, ConstantImageKeepsCentroids) {
  const InfraredImage img(10, 10, 17.0);
  ClusterParams p;
  p.n_clusters = 4;
  const auto c = init_centers(img, p);
  const std::vector<std::pair<double, double>> expected{{2, 2}, {7, 2}, {2, 7}, {7, 7}};
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(c[k].x, expected[k].first);
    EXPECT_EQ(c[k].y, expected[k].second);
    EXPECT_EQ(c[k].c, 17.0);
  }
}

TEST(InitCenters, MatchesBruteForceGradientSearch) {
  // Single bright pixel in a 4x4 ramp: the centroid (1.5, 1.5) rounds to
  // pixel (2, 2); the winner must be the flattest of its nine neighbours.
  std::vector<double> d(16);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) d[static_cast<std::size_t>(y * 4 + x)] = 10.0 * x + 3.0 * y * y;
  d[0] = 250.0;
  const InfraredImage img(4, 4, d);
  ClusterParams p;
  p.n_clusters = 1;
  const auto c = init_centers(img, p);

  double best = std::numeric_limits<double>::infinity();
  int bx = -1, by = -1;
  for (int y = 1; y <= 3; ++y) {
    for (int x = 1; x <= 3; ++x) {
      auto at = [&](int xx, int yy) { return img.at(std::clamp(xx, 0, 3), std::clamp(yy, 0, 3)); };
      const double g = std::abs(at(x + 1, y) - at(x - 1, y)) + std::abs(at(x, y + 1) - at(x, y - 1));
      if (g < best || (x == 2 && y == 2 && g == best)) {
        best = g;
        bx = x;
        by = y;
      }
    }
  }
  ASSERT_EQ(c.size(), 1U);
  if (bx == 2 && by == 2) {
    EXPECT_EQ(c[0].x, 1.5);
    EXPECT_EQ(c[0].y, 1.5);
  } else {
    EXPECT_EQ(c[0].x, bx);
    EXPECT_EQ(c[0].y, by);
  }
  EXPECT_EQ(c[0].c, img.at(static_cast<int>(std::lround(c[0].x)), static_cast<int>(std::lround(c[0].y))));
}

TEST(InitCenters, RandomImagesMatchReference) {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int w = 2 + static_cast<int>(rng.below(30));
    const int h = 2 + static_cast<int>(rng.below(30));
    const int n = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(w * h, 40))));
    const auto img = random_image(rng, w, h);
    ClusterParams p;
    p.n_clusters = n;
    const auto got = init_centers(img, p);
    const auto ref = ref_init(as_vector(img), w, h, n);
    ASSERT_EQ(got.size(), ref.size());
    for (std::size_t k = 0; k < got.size(); ++k) {
      EXPECT_EQ(got[k].c, ref[k].c);
      EXPECT_EQ(got[k].x, ref[k].x);
      EXPECT_EQ(got[k].y, ref[k].y);
    }
  }
}

TEST(InitCenters, RejectsTooManyClusters) {
  ClusterParams p;
  p.n_clusters = 17;
  EXPECT_THROW(init_centers(InfraredImage(4, 4), p), InvalidParams);
}

TEST(Assign, SingleCenterAndTieRule) {
  const InfraredImage img(5, 5, 9.0);
  ClusterParams p;
  const std::vector<ClusterCenter> one{{9.0, 2.0, 2.0}};
  for (int l : assign(img, one, p)) EXPECT_EQ(l, 0);

  // Pixel (2, 0) is equidistant from both centers.
  const std::vector<ClusterCenter> two{{9.0, 1.0, 0.0}, {9.0, 3.0, 0.0}};
  p.backend = ClusterBackend::KMeans;
  EXPECT_EQ(assign(img, two, p)[img.index(2, 0)], 0);
  const std::vector<ClusterCenter> swapped{{9.0, 3.0, 0.0}, {9.0, 1.0, 0.0}};
  EXPECT_EQ(assign(img, swapped, p)[img.index(2, 0)], 0);
}

TEST(Assign, SlicWindowFallsBackToGlobalSearch) {
  // Four centers on a 30x30 raster give S = 15. Pixels such as (20, 5) have
  // no center inside their window and fall back to the nearest overall.
  const InfraredImage img(30, 30, 0.0);
  ClusterParams p;
  const std::vector<ClusterCenter> cs{{0.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}, {0.0, 29.0, 29.0}};
  const auto labels = assign(img, cs, p);
  EXPECT_EQ(labels[img.index(0, 0)], 0);
  EXPECT_EQ(labels[img.index(22, 22)], 3);
  EXPECT_EQ(labels[img.index(20, 5)], 1);
  EXPECT_EQ(labels[img.index(5, 20)], 2);
}

TEST(Assign, TwoBlobKMeansMatchesLloyd) {
  std::vector<double> d(36, 20.0);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) d[static_cast<std::size_t>(y * 6 + x)] = 200.0;
  const InfraredImage img(6, 6, d);
  ClusterParams p;
  p.n_clusters = 2;
  p.backend = ClusterBackend::KMeans;
  p.max_iters = 20;
  const auto field = run_lca(img, p);
  const auto ref = ref_lca(d, 6, 6, 2, p.mu_c, p.conv_threshold, p.max_iters, false);
  EXPECT_EQ(field.labels, ref.labels.back());
}

TEST(UpdateCenters, Examples) {
  const InfraredImage img(3, 1, std::vector<double>{0.0, 7.0, 10.0});
  const std::vector<ClusterCenter> prev{{1, 1, 1}, {2, 2, 0}, {50, 0, 0}};
  const std::vector<int> labels{0, 1, 0};
  const auto next = update_centers(img, labels, prev);
  EXPECT_EQ(next[0], (ClusterCenter{5.0, 1.0, 0.0}));
  EXPECT_EQ(next[1], (ClusterCenter{7.0, 1.0, 0.0}));
  EXPECT_EQ(next[2], prev[2]);
}

TEST(RunLca, ConstantImageConvergesToInitialGrid) {
  const InfraredImage img(12, 12, 90.0);
  ClusterParams p;
  p.n_clusters = 4;
  const auto field = run_lca(img, p);
  EXPECT_TRUE(field.converged);
  EXPECT_LE(field.iterations_run, 2);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x) EXPECT_EQ(field.label_at(x, y), (y / 6) * 2 + x / 6);
}

TEST(RunLca, ZeroIterationsIsInitialAssignment) {
  const auto scene = corpus_scene(3);
  ClusterParams p;
  p.max_iters = 0;
  const auto field = run_lca(scene.image, p);
  EXPECT_FALSE(field.converged);
  EXPECT_EQ(field.iterations_run, 0);
  EXPECT_EQ(field.labels, assign(scene.image, init_centers(scene.image, p), p));
}

TEST(RunLca, SlicTraceMatchesStraightLineReferenceOnScene7) {
  const auto scene = corpus_scene(7);
  ClusterParams p;
  p.n_clusters = 9;
  Trace t;
  const auto field = run_lca(scene.image, p, recorder(t));
  const auto ref = ref_lca(as_vector(scene.image), 256, 256, 9, p.mu_c, p.conv_threshold, p.max_iters, true);
  ASSERT_EQ(t.centers.size(), ref.centers.size());
  EXPECT_EQ(field.converged, ref.converged);
  for (std::size_t it = 0; it < t.centers.size(); ++it) {
    for (std::size_t k = 0; k < 9; ++k) {
      EXPECT_NEAR(t.centers[it][k].c, ref.centers[it][k].c, 1e-9);
      EXPECT_NEAR(t.centers[it][k].x, ref.centers[it][k].x, 1e-9);
      EXPECT_NEAR(t.centers[it][k].y, ref.centers[it][k].y, 1e-9);
    }
    EXPECT_EQ(t.labels[it], ref.labels[it]) << "iteration " << it;
  }
}

TEST(RunLca, KMeansMatchesExhaustiveLloyd) {
  SplitMix64 seeds(2024);
  for (int trial = 0; trial < 50; ++trial) {
    SplitMix64 rng(seeds());
    for (int n = 1; n <= 3; ++n) {
      const auto img = random_image(rng, 8, 8);
      ClusterParams p;
      p.n_clusters = n;
      p.backend = ClusterBackend::KMeans;
      p.max_iters = 50;
      const auto field = run_lca(img, p);
      const auto ref = ref_lca(as_vector(img), 8, 8, n, p.mu_c, p.conv_threshold, p.max_iters, false);
      ASSERT_EQ(field.labels, ref.labels.back()) << "trial " << trial << " N=" << n;
    }
  }
}

TEST(RunLca, KMeansMatchesLloydOnSmallShapes) {
  SplitMix64 rng(77);
  for (int w = 1; w <= 8; ++w) {
    for (int h = 1; h <= 8; ++h) {
      for (int n = 1; n <= std::min(3, w * h); ++n) {
        const auto img = random_image(rng, w, h);
        ClusterParams p;
        p.n_clusters = n;
        p.backend = ClusterBackend::KMeans;
        p.max_iters = 50;
        const auto ref = ref_lca(as_vector(img), w, h, n, p.mu_c, p.conv_threshold, p.max_iters, false);
        ASSERT_EQ(run_lca(img, p).labels, ref.labels.back()) << w << "x" << h << " N=" << n;
      }
    }
  }
}

TEST(ClusteringProperty, AssignmentOptimalAtConvergence) {
  for (int idx : {1, 5, 9, 14}) {
    const auto scene = corpus_scene(idx);
    for (auto backend : {ClusterBackend::SlicLike, ClusterBackend::KMeans}) {
      ClusterParams p;
      p.backend = backend;
      p.max_iters = 100;
      const auto patch = scene.image.crop(centered_window(scene.annotations[0].coord(), 20, 256, 256));
      const auto field = run_lca(patch, p);
      if (!field.converged) continue;
      const auto k = resolve_scale(p, patch.width(), patch.height());
      const double s = grid_interval(patch.width(), patch.height(), p.n_clusters);
      for (int y = 0; y < patch.height(); ++y) {
        for (int x = 0; x < patch.width(); ++x) {
          const double mine = distance(field.centers[field.label_at(x, y)], patch.at(x, y), x, y, k);
          bool any_in_window = false;
          for (const auto& c : field.centers)
            any_in_window = any_in_window || (std::abs(c.x - x) <= s && std::abs(c.y - y) <= s);
          for (const auto& c : field.centers) {
            const bool candidate = backend == ClusterBackend::KMeans || !any_in_window ||
                                   (std::abs(c.x - x) <= s && std::abs(c.y - y) <= s);
            if (candidate) ASSERT_LE(mine, distance(c, patch.at(x, y), x, y, k));
          }
        }
      }
    }
  }
}

TEST(ClusteringProperty, LoopTerminatesWithinCap) {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const auto img = random_image(rng, 24, 24);
    ClusterParams p;
    p.n_clusters = 1 + static_cast<int>(rng.below(16));
    p.max_iters = static_cast<int>(rng.below(8));
    p.conv_threshold = 1e-6;
    const auto field = run_lca(img, p);
    EXPECT_LE(field.iterations_run, p.max_iters);
    for (int l : field.labels) {
      ASSERT_GE(l, 0);
      ASSERT_LT(l, p.n_clusters);
    }
  }
}

TEST(ClusteringProperty, TranslationMovesTheMask) {
  const auto scene = corpus_scene(2);
  const auto anno = scene.annotations[0];
  MclcParams p;
  const auto base = lca_target_mask(scene.image, anno, p);
  for (auto [dx, dy] : {std::pair{5, -3}, std::pair{-11, 8}}) {
    std::vector<double> d(scene.image.size(), 40.0);
    for (int y = 0; y < 256; ++y)
      for (int x = 0; x < 256; ++x)
        if (scene.image.in_bounds(x - dx, y - dy)) d[scene.image.index(x, y)] = scene.image.at(x - dx, y - dy);
    const InfraredImage moved(256, 256, d);
    PointAnnotation a2 = anno;
    a2.x += dx;
    a2.y += dy;
    const auto m2 = lca_target_mask(moved, a2, p);
    ASSERT_EQ(m2.count(), base.count());
    for (int y = 0; y < 256; ++y)
      for (int x = 0; x < 256; ++x)
        if (base.at(x, y)) ASSERT_TRUE(m2.at(x + dx, y + dy));
  }
}

TEST(Extract, AllSameLabelGivesFullMask) {
  ClusterField f{4, 3, std::vector<int>(12, 0), {{0, 1, 1}}, 0, false};
  EXPECT_EQ(extract_target_cluster(f, {3, 2}).count(), 12U);
}

TEST(Extract, SinglePixelClusterAndConnectivity) {
  // Label 1 covers a single pixel at (1, 1) and two pixels in the far
  // corner; only the component holding the annotation survives.
  std::vector<int> labels(25, 0);
  labels[6] = 1;
  labels[23] = 1;
  labels[24] = 1;
  ClusterField f{5, 5, labels, {{0, 0, 0}, {0, 1, 1}}, 0, false};
  const auto m = extract_target_cluster(f, {1, 1});
  EXPECT_EQ(m.count(), 1U);
  EXPECT_TRUE(m.at(1, 1));
  const auto far = extract_target_cluster(f, {4, 4});
  EXPECT_EQ(far.count(), 2U);
  EXPECT_FALSE(far.at(1, 1));
  EXPECT_THROW(extract_target_cluster(f, {5, 0}), OutOfBounds);
}

TEST(EnforceConnectivity, SmallFragmentsMergeIntoLongestBorder) {
  // 6x6 raster: label 0 left half, label 1 right half, with a stray single
  // label-1 pixel inside the left half.
  std::vector<int> labels(36);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) labels[static_cast<std::size_t>(y * 6 + x)] = x < 3 ? 0 : 1;
  labels[2 * 6 + 1] = 1;
  ClusterField f{6, 6, labels, {{0, 1, 2}, {0, 4, 2}}, 0, false};
  enforce_connectivity(f, 2);
  EXPECT_EQ(f.label_at(1, 2), 0);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) EXPECT_EQ(f.label_at(x, y), x < 3 ? 0 : 1);
}

TEST(EnforceConnectivity, EveryFragmentReachesMinimumSize) {
  for (int idx = 1; idx <= 20; idx += 3) {
    const auto scene = corpus_scene(idx);
    const auto patch = scene.image.crop(centered_window(scene.annotations[0].coord(), 20, 256, 256));
    ClusterParams p;
    auto field = run_lca(patch, p);
    const std::size_t min_size = min_segment_size(p, patch.width(), patch.height());
    enforce_connectivity(field, min_size);
    // 4-connected fragments of the relabelled field.
    std::vector<int> seen(field.labels.size(), 0);
    const int w = field.width, h = field.height;
    for (int s = 0; s < w * h; ++s) {
      if (seen[s]) continue;
      std::vector<int> stack{s};
      seen[s] = 1;
      std::size_t size = 0;
      while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        ++size;
        const int x = i % w, y = i / w;
        const int nb[4][2] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
        for (auto& q : nb) {
          if (q[0] < 0 || q[1] < 0 || q[0] >= w || q[1] >= h) continue;
          const int j = q[1] * w + q[0];
          if (!seen[j] && field.labels[j] == field.labels[i]) {
            seen[j] = 1;
            stack.push_back(j);
          }
        }
      }
      EXPECT_GE(size, min_size) << scene.id;
    }
  }
}

TEST(Backend, NamesRoundTrip) {
  EXPECT_EQ(backend_from_string(to_string(ClusterBackend::KMeans)), ClusterBackend::KMeans);
  EXPECT_EQ(backend_from_string(to_string(ClusterBackend::SlicLike)), ClusterBackend::SlicLike);
  EXPECT_THROW(backend_from_string("watershed"), InvalidParams);
}
