#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mclc/errors.hpp"

namespace mclc {

inline constexpr double kMaxIntensity = 255.0;

/// Integer pixel coordinate, origin top-left, x to the right.
struct PixelCoord {
  int x = 0;
  int y = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// Axis-aligned pixel rectangle [x0, x0 + width) x [y0, y0 + height).
struct Window {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;

  bool contains(int x, int y) const noexcept {
    return x >= x0 && y >= y0 && x < x0 + width && y < y0 + height;
  }
  friend bool operator==(const Window&, const Window&) = default;
};

/// Square window of half-size `radius` centred on `center`, shifted (not
/// shrunk) so it stays inside a width x height raster. A radius of zero or one
/// that would not fit yields the whole raster along that axis.
inline Window centered_window(PixelCoord center, int radius, int width, int height) {
  auto axis = [radius](int c, int extent) -> std::pair<int, int> {
    const int span = 2 * radius + 1;
    if (radius <= 0 || span >= extent) {
      return {0, extent};
    }
    const int lo = std::clamp(c - radius, 0, extent - span);
    return {lo, span};
  };
  const auto [x0, w] = axis(center.x, width);
  const auto [y0, h] = axis(center.y, height);
  return Window{x0, y0, w, h};
}

/// Single-channel intensity raster with values in [0, 255], row-major.
class InfraredImage {
public:
  InfraredImage() = default;

  InfraredImage(int width, int height, double fill = 0.0) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
      throw InvalidSpec("image dimensions must be positive");
    }
    check_value(fill);
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  InfraredImage(int width, int height, std::vector<double> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width <= 0 || height <= 0) {
      throw InvalidSpec("image dimensions must be positive");
    }
    if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw InvalidSpec("image data length does not match width x height");
    }
    for (double v : data_) {
      check_value(v);
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  bool in_bounds(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  double at(int x, int y) const noexcept { return data_[index(x, y)]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Clamped store; the only mutating access, so the value-range invariant
  /// cannot be broken from outside.
  void set(int x, int y, double v) noexcept { data_[index(x, y)] = std::clamp(v, 0.0, kMaxIntensity); }
  void set(std::size_t i, double v) noexcept { data_[i] = std::clamp(v, 0.0, kMaxIntensity); }

  std::span<const double> data() const noexcept { return data_; }

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  /// Replicated-border read.
  double clamped_at(int x, int y) const noexcept {
    return at(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1));
  }

  InfraredImage crop(const Window& w) const {
    if (w.x0 < 0 || w.y0 < 0 || w.x0 + w.width > width_ || w.y0 + w.height > height_) {
      throw OutOfBounds("crop window exceeds image bounds");
    }
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(w.width) * static_cast<std::size_t>(w.height));
    for (int y = w.y0; y < w.y0 + w.height; ++y) {
      const auto row = data_.begin() + static_cast<std::ptrdiff_t>(index(w.x0, y));
      out.insert(out.end(), row, row + w.width);
    }
    InfraredImage img;
    img.width_ = w.width;
    img.height_ = w.height;
    img.data_ = std::move(out);
    return img;
  }

  friend bool operator==(const InfraredImage&, const InfraredImage&) = default;

private:
  static void check_value(double v) {
    if (!(v >= 0.0 && v <= kMaxIntensity)) {
      throw InvalidSpec("intensity outside [0, 255]");
    }
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Where a mask came from. `params` holds a serialized parameter set so a
/// mask can be traced back to the exact run that produced it.
struct Provenance {
  std::string method;
  std::uint64_t seed = 0;
  std::string params;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// Binary per-pixel foreground mask.
class PseudoMask {
public:
  PseudoMask() = default;
  PseudoMask(int width, int height) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
      throw InvalidSpec("mask dimensions must be positive");
    }
    bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
  }
  PseudoMask(int width, int height, std::vector<std::uint8_t> bits) : PseudoMask(width, height) {
    if (bits.size() != bits_.size()) {
      throw InvalidSpec("mask data length does not match width x height");
    }
    for (std::size_t i = 0; i < bits.size(); ++i) {
      bits_[i] = bits[i] ? 1 : 0;
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return bits_.size(); }
  bool in_bounds(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  bool at(int x, int y) const noexcept { return bits_[index(x, y)] != 0; }
  bool operator[](std::size_t i) const noexcept { return bits_[i] != 0; }
  void set(int x, int y, bool v) noexcept { bits_[index(x, y)] = v ? 1 : 0; }
  void set(std::size_t i, bool v) noexcept { bits_[i] = v ? 1 : 0; }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }
  bool any() const noexcept { return count() > 0; }

  bool same_shape(const PseudoMask& o) const noexcept { return width_ == o.width_ && height_ == o.height_; }

  /// Pixel-wise OR, used to merge per-target masks of one image.
  PseudoMask& operator|=(const PseudoMask& o) {
    if (!same_shape(o)) {
      throw DimensionMismatch("cannot OR masks of different sizes");
    }
    for (std::size_t i = 0; i < bits_.size(); ++i) {
      bits_[i] = static_cast<std::uint8_t>(bits_[i] | o.bits_[i]);
    }
    return *this;
  }

  Provenance provenance;

  /// Equality compares pixels only; provenance is metadata.
  friend bool operator==(const PseudoMask& a, const PseudoMask& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.bits_ == b.bits_;
  }

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Per-pixel foreground frequency over `runs` binary clustering outcomes.
/// Stored as integer hit counts so accumulation order never matters; the
/// probability of a pixel is count / runs.
class TargetProbabilityMap {
public:
  TargetProbabilityMap() = default;
  TargetProbabilityMap(int width, int height, std::vector<std::uint32_t> counts, std::uint32_t runs)
      : width_(width), height_(height), runs_(runs), counts_(std::move(counts)) {
    if (width <= 0 || height <= 0) {
      throw InvalidSpec("probability map dimensions must be positive");
    }
    if (runs == 0) {
      throw InvalidSpec("probability map needs at least one run");
    }
    if (counts_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw InvalidSpec("probability map data length does not match width x height");
    }
    for (auto c : counts_) {
      if (c > runs) {
        throw InvalidSpec("hit count exceeds number of runs");
      }
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return counts_.size(); }
  std::uint32_t runs_accumulated() const noexcept { return runs_; }
  bool in_bounds(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  std::uint32_t count(std::size_t i) const noexcept { return counts_[i]; }
  std::span<const std::uint32_t> counts() const noexcept { return counts_; }

  double prob(std::size_t i) const noexcept {
    return static_cast<double>(counts_[i]) / static_cast<double>(runs_);
  }
  double prob(int x, int y) const noexcept { return prob(index(x, y)); }

  std::vector<double> probs() const {
    std::vector<double> out(counts_.size());
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      out[i] = prob(i);
    }
    return out;
  }

  friend bool operator==(const TargetProbabilityMap&, const TargetProbabilityMap&) = default;

private:
  int width_ = 0;
  int height_ = 0;
  std::uint32_t runs_ = 0;
  std::vector<std::uint32_t> counts_;
};

enum class TargetCategory { Unknown, Point, Spot, Extended };

inline std::string to_string(TargetCategory c) {
  switch (c) {
  case TargetCategory::Point: return "point";
  case TargetCategory::Spot: return "spot";
  case TargetCategory::Extended: return "extend";
  case TargetCategory::Unknown: break;
  }
  return "unknown";
}

inline TargetCategory category_from_string(const std::string& s) {
  if (s == "point") return TargetCategory::Point;
  if (s == "spot") return TargetCategory::Spot;
  if (s == "extend" || s == "extended") return TargetCategory::Extended;
  return TargetCategory::Unknown;
}

/// One labelled point per target.
struct PointAnnotation {
  std::string image_id;
  int x = 0;
  int y = 0;
  TargetCategory category = TargetCategory::Unknown;

  PixelCoord coord() const noexcept { return {x, y}; }
  friend bool operator==(const PointAnnotation&, const PointAnnotation&) = default;
};

template <typename Raster>
void require_in_bounds(const Raster& r, PixelCoord p) {
  if (!r.in_bounds(p.x, p.y)) {
    throw OutOfBounds("annotation (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                      ") lies outside the " + std::to_string(r.width()) + "x" +
                      std::to_string(r.height()) + " raster");
  }
}

} // namespace mclc
