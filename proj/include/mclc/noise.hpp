#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "mclc/image.hpp"
#include "mclc/rng.hpp"

namespace mclc {

enum class NoiseKind { Salt, Pepper, Gaussian };

inline std::string to_string(NoiseKind k) {
  switch (k) {
  case NoiseKind::Salt: return "salt";
  case NoiseKind::Pepper: return "pepper";
  case NoiseKind::Gaussian: return "gaussian";
  }
  return "salt";
}

inline NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "salt") return NoiseKind::Salt;
  if (s == "pepper") return NoiseKind::Pepper;
  if (s == "gaussian") return NoiseKind::Gaussian;
  throw InvalidSpec("unknown noise kind '" + s + "'");
}

/// Salt/Pepper: `intensity` is the fraction of pixels replaced (0..1).
/// Gaussian: `intensity` is the standard deviation in intensity units.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::Salt;
  double intensity = 0.05;
  std::uint64_t seed = 0;

  void validate() const {
    if (!std::isfinite(intensity) || intensity < 0.0) {
      throw InvalidSpec("noise intensity must be finite and non-negative");
    }
    if (kind != NoiseKind::Gaussian && intensity > 1.0) {
      throw InvalidSpec("salt/pepper intensity must lie in [0, 1]");
    }
  }

  NoiseSpec with_seed(std::uint64_t s) const {
    NoiseSpec copy = *this;
    copy.seed = s;
    return copy;
  }

  friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

/// Number of pixels a salt/pepper spec replaces on a raster of `pixels`.
inline std::size_t impulse_count(double intensity, std::size_t pixels) {
  return static_cast<std::size_t>(std::llround(intensity * static_cast<double>(pixels)));
}

/// clip(img + noise). Deterministic in (img, spec).
inline InfraredImage add_noise(const InfraredImage& img, const NoiseSpec& spec) {
  spec.validate();
  InfraredImage out = img;
  if (spec.intensity == 0.0) {
    return out;
  }
  SplitMix64 rng(spec.seed);
  switch (spec.kind) {
  case NoiseKind::Salt:
  case NoiseKind::Pepper: {
    const double value = spec.kind == NoiseKind::Salt ? kMaxIntensity : 0.0;
    for (std::size_t i : sample_without_replacement(rng, img.size(), impulse_count(spec.intensity, img.size()))) {
      out.set(i, value);
    }
    break;
  }
  case NoiseKind::Gaussian:
    for (std::size_t i = 0; i < img.size(); ++i) {
      out.set(i, img[i] + spec.intensity * rng.normal());
    }
    break;
  }
  return out;
}

} // namespace mclc
