#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <gtest/gtest.h>

#include "mclc/image.hpp"
#include "mclc/noise.hpp"
#include "mclc/png_io.hpp"
#include "mclc/rng.hpp"
#include "mclc/synth.hpp"
#include "test_util.hpp"

using namespace mclc;

namespace {

InfraredImage ramp(int w, int h) {
  std::vector<double> d(static_cast<std::size_t>(w * h));
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = static_cast<double>((i * 37) % 256);
  }
  return InfraredImage(w, h, std::move(d));
}

std::size_t changed_pixels(const InfraredImage& a, const InfraredImage& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    n += a[i] != b[i];
  }
  return n;
}

} // namespace

TEST(Image, RejectsOutOfRangeValuesAndShapes) {
  EXPECT_THROW(InfraredImage(0, 3), InvalidSpec);
  EXPECT_THROW(InfraredImage(2, 2, std::vector<double>{0, 1, 2}), InvalidSpec);
  EXPECT_THROW(InfraredImage(1, 1, std::vector<double>{256.0}), InvalidSpec);
  EXPECT_THROW(InfraredImage(1, 1, std::vector<double>{-0.5}), InvalidSpec);
  EXPECT_THROW(InfraredImage(1, 1, std::vector<double>{std::nan("")}), InvalidSpec);
  EXPECT_NO_THROW(InfraredImage(1, 2, std::vector<double>{0.0, 255.0}));
}

TEST(Image, CropAndCenteredWindow) {
  const auto img = ramp(10, 8);
  const Window w = centered_window({1, 7}, 2, 10, 8);
  EXPECT_EQ(w, (Window{0, 3, 5, 5}));
  const auto c = img.crop(w);
  EXPECT_EQ(c.at(0, 0), img.at(0, 3));
  EXPECT_EQ(c.at(4, 4), img.at(4, 7));
  EXPECT_EQ(centered_window({5, 5}, 0, 10, 8), (Window{0, 0, 10, 8}));
  EXPECT_EQ(centered_window({5, 5}, 20, 10, 8), (Window{0, 0, 10, 8}));
  EXPECT_THROW(img.crop(Window{8, 0, 5, 5}), OutOfBounds);
}

TEST(Tpm, ProbabilitiesAreMultiplesOfOneOverK) {
  const TargetProbabilityMap tpm(2, 2, {0, 1, 2, 3}, 3);
  EXPECT_DOUBLE_EQ(tpm.prob(0), 0.0);
  EXPECT_DOUBLE_EQ(tpm.prob(1, 0), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(tpm.prob(3), 1.0);
  EXPECT_THROW(TargetProbabilityMap(2, 2, {0, 1, 2, 4}, 3), InvalidSpec);
  EXPECT_THROW(TargetProbabilityMap(2, 2, {0, 0, 0, 0}, 0), InvalidSpec);
}

TEST(Rng, SplitMixReferenceStream) {
  // Reference outputs of SplitMix64 seeded with 0.
  SplitMix64 rng(0);
  EXPECT_EQ(rng(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(rng(), 0x6E789E6AA1B965F4ULL);
  EXPECT_EQ(rng(), 0x06C45D188009454FULL);
}

TEST(Rng, BelowStaysInRangeAndUniformInUnitInterval) {
  SplitMix64 rng(42);
  for (int i = 0; i < 10000; ++i) {
    EXPECT_LT(rng.below(7), 7U);
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(PngIo, EightBitGrayIsDecodedVerbatim) {
  testutil::TempDir dir("png8");
  testutil::write_gray_png(dir / "a.png", 2, 2, 8, {0, 255, 128, 64});
  const auto img = load_image(dir / "a.png");
  ASSERT_EQ(img.width(), 2);
  ASSERT_EQ(img.height(), 2);
  EXPECT_EQ(std::vector<double>(img.data().begin(), img.data().end()), (std::vector<double>{0, 255, 128, 64}));
}

TEST(PngIo, SixteenBitIsRescaledLinearly) {
  testutil::TempDir dir("png16");
  testutil::write_gray_png(dir / "a.png", 3, 1, 16, {65535, 0, 32768});
  const auto img = load_image(dir / "a.png");
  EXPECT_DOUBLE_EQ(img.at(0, 0), 255.0);
  EXPECT_DOUBLE_EQ(img.at(1, 0), 0.0);
  EXPECT_NEAR(img.at(2, 0), 32768.0 * 255.0 / 65535.0, 1e-12);
}

TEST(PngIo, RgbIsReducedByLuma) {
  testutil::TempDir dir("pngrgb");
  const std::vector<std::uint8_t> rgb{255, 0, 0, 0, 255, 0, 0, 0, 255, 10, 20, 30};
  save_rgb_png(4, 1, rgb, dir / "c.png");
  const auto img = load_image(dir / "c.png");
  EXPECT_NEAR(img.at(0, 0), 0.299 * 255, 1e-9);
  EXPECT_NEAR(img.at(1, 0), 0.587 * 255, 1e-9);
  EXPECT_NEAR(img.at(2, 0), 0.114 * 255, 1e-9);
  EXPECT_NEAR(img.at(3, 0), 0.299 * 10 + 0.587 * 20 + 0.114 * 30, 1e-9);
}

TEST(PngIo, MissingTruncatedAndForeignFilesFail) {
  testutil::TempDir dir("pngbad");
  EXPECT_THROW(load_image(dir / "nope.png"), IoError);

  testutil::write_gray_png(dir / "ok.png", 16, 16, 8, std::vector<std::uint16_t>(256, 7));
  auto bytes = testutil::read_bytes(dir / "ok.png");
  bytes.resize(bytes.size() / 2);
  testutil::write_bytes(dir / "cut.png", bytes);
  EXPECT_THROW(load_image(dir / "cut.png"), IoError);

  testutil::write_bytes(dir / "short.png", {0x89, 'P'});
  EXPECT_THROW(load_image(dir / "short.png"), IoError);

  testutil::write_bytes(dir / "text.png", std::vector<unsigned char>(64, 'x'));
  EXPECT_THROW(load_image(dir / "text.png"), FormatError);
}

TEST(PngIo, MaskAndTpmExports) {
  testutil::TempDir dir("pngout");
  int w = 0, h = 0;

  save_mask_png(PseudoMask(2, 2, {1, 0, 0, 1}), dir / "m.png");
  EXPECT_EQ(testutil::read_png_bytes(dir / "m.png", w, h), (std::vector<std::uint8_t>{255, 0, 0, 255}));

  save_tpm_png(TargetProbabilityMap(3, 1, {4, 4, 4}, 4), dir / "one.png");
  EXPECT_EQ(testutil::read_png_bytes(dir / "one.png", w, h), (std::vector<std::uint8_t>{255, 255, 255}));

  save_tpm_png(TargetProbabilityMap(3, 1, {0, 0, 0}, 4), dir / "zero.png");
  EXPECT_EQ(testutil::read_png_bytes(dir / "zero.png", w, h), (std::vector<std::uint8_t>{0, 0, 0}));

  save_tpm_png(TargetProbabilityMap(3, 1, {1, 2, 3}, 4), dir / "mid.png");
  EXPECT_EQ(testutil::read_png_bytes(dir / "mid.png", w, h), (std::vector<std::uint8_t>{64, 128, 191}));

  save_tpm_png(TargetProbabilityMap(2, 1, {0, 4}, 4), dir / "heat.png", true);
  const auto rgb = testutil::read_png_bytes(dir / "heat.png", w, h, PNG_FORMAT_RGB);
  EXPECT_EQ(rgb, (std::vector<std::uint8_t>{0, 0, 0, 252, 252, 190}));

  const auto mask = load_mask(dir / "m.png");
  EXPECT_TRUE(mask.at(0, 0));
  EXPECT_FALSE(mask.at(1, 0));
  EXPECT_TRUE(mask.at(1, 1));
}

TEST(PngIo, ImageRoundTripsThroughEightBits) {
  testutil::TempDir dir("roundtrip");
  const auto img = ramp(13, 7);
  save_image_png(img, dir / "r.png");
  EXPECT_EQ(load_image(dir / "r.png"), img);
}

TEST(Noise, ZeroIntensityIsIdentity) {
  const auto img = ramp(9, 9);
  for (auto kind : {NoiseKind::Salt, NoiseKind::Pepper, NoiseKind::Gaussian}) {
    EXPECT_EQ(add_noise(img, {kind, 0.0, 5}), img);
  }
}

TEST(Noise, SaltReplacesExactlyRoundedFraction) {
  const InfraredImage img(10, 10, 100.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto out = add_noise(img, {NoiseKind::Salt, 0.05, seed});
    EXPECT_EQ(changed_pixels(img, out), 5U);
    EXPECT_EQ(std::count(out.data().begin(), out.data().end(), 255.0), 5);
  }
}

TEST(Noise, PepperSetsZero) {
  const InfraredImage img(10, 10, 100.0);
  const auto out = add_noise(img, {NoiseKind::Pepper, 0.13, 3});
  EXPECT_EQ(std::count(out.data().begin(), out.data().end(), 0.0), 13);
}

TEST(Noise, GaussianIsClippedAtBothEnds) {
  for (double base : {250.0, 3.0}) {
    const InfraredImage img(32, 32, base);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto out = add_noise(img, {NoiseKind::Gaussian, 100.0, seed});
      for (double v : out.data()) {
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 255.0);
      }
    }
  }
}

TEST(Noise, RejectsInvalidIntensity) {
  const InfraredImage img(4, 4, 1.0);
  EXPECT_THROW(add_noise(img, {NoiseKind::Salt, 1.5, 0}), InvalidSpec);
  EXPECT_THROW(add_noise(img, {NoiseKind::Pepper, -0.1, 0}), InvalidSpec);
  EXPECT_THROW(add_noise(img, {NoiseKind::Gaussian, -1.0, 0}), InvalidSpec);
  EXPECT_NO_THROW(add_noise(img, {NoiseKind::Gaussian, 300.0, 0}));
  EXPECT_THROW(noise_kind_from_string("speckle"), InvalidSpec);
}

TEST(NoiseProperty, Determinism) {
  const auto img = ramp(31, 17);
  for (auto kind : {NoiseKind::Salt, NoiseKind::Pepper, NoiseKind::Gaussian}) {
    for (std::uint64_t seed : {0ULL, 1ULL, 0xDEADBEEFULL}) {
      const NoiseSpec spec{kind, kind == NoiseKind::Gaussian ? 20.0 : 0.2, seed};
      EXPECT_EQ(add_noise(img, spec), add_noise(img, spec));
    }
  }
}

TEST(NoiseProperty, SaltCountLaw) {
  SplitMix64 gen(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int w = 1 + static_cast<int>(gen.below(40));
    const int h = 1 + static_cast<int>(gen.below(40));
    std::vector<double> d(static_cast<std::size_t>(w * h));
    bool has_saturated = false;
    for (auto& v : d) {
      v = gen.below(4) == 0 ? 255.0 : static_cast<double>(gen.below(255));
      has_saturated = has_saturated || v == 255.0;
    }
    const InfraredImage img(w, h, d);
    const double p = gen.uniform();
    const auto out = add_noise(img, {NoiseKind::Salt, p, gen()});
    const std::size_t expected = impulse_count(p, img.size());
    const std::size_t changed = changed_pixels(img, out);
    EXPECT_LE(changed, expected);
    if (!has_saturated) {
      EXPECT_EQ(changed, expected);
    }
    const auto saturated = static_cast<std::size_t>(std::count(out.data().begin(), out.data().end(), 255.0));
    EXPECT_GE(saturated, expected);
  }
}

TEST(NoiseProperty, ClipSafety) {
  SplitMix64 gen(7);
  for (int trial = 0; trial < 100; ++trial) {
    const auto img = ramp(16, 16);
    const auto kind = static_cast<NoiseKind>(gen.below(3));
    const double intensity = kind == NoiseKind::Gaussian ? 500.0 * gen.uniform() : gen.uniform();
    const auto out = add_noise(img, {kind, intensity, gen()});
    EXPECT_NO_THROW(InfraredImage(out.width(), out.height(),
                                  std::vector<double>(out.data().begin(), out.data().end())));
  }
}

TEST(NoiseProperty, BackgroundIsMoreSensitiveThanSaturatedTargets) {
  int scenes_checked = 0;
  for (const auto& s : standard_corpus()) {
    std::vector<std::size_t> bg, tg;
    for (std::size_t i = 0; i < s.image.size(); ++i) {
      if (s.image[i] < 100.0) bg.push_back(i);
      if (s.image[i] > 200.0) tg.push_back(i);
    }
    if (tg.empty() || bg.empty()) {
      continue;
    }
    double dbg = 0.0, dtg = 0.0;
    const int seeds = 10;
    for (int seed = 1; seed <= seeds; ++seed) {
      const auto out = add_noise(s.image, {NoiseKind::Salt, 0.05, static_cast<std::uint64_t>(seed)});
      for (auto i : bg) dbg += std::abs(out[i] - s.image[i]) / static_cast<double>(bg.size());
      for (auto i : tg) dtg += std::abs(out[i] - s.image[i]) / static_cast<double>(tg.size());
    }
    EXPECT_GT(dbg / seeds, dtg / seeds) << s.id;
    ++scenes_checked;
  }
  EXPECT_GT(scenes_checked, 0);
}
