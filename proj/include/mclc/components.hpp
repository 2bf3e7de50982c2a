#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mclc/image.hpp"

namespace mclc {

/// 8-connected flood fill from `seed` over pixels where `member(x, y)` holds.
/// Returns an all-zero mask when the seed itself is not a member.
template <typename Pred>
PseudoMask flood_component(int width, int height, PixelCoord seed, Pred&& member) {
  PseudoMask out(width, height);
  if (seed.x < 0 || seed.y < 0 || seed.x >= width || seed.y >= height || !member(seed.x, seed.y)) {
    return out;
  }
  std::vector<PixelCoord> stack{seed};
  out.set(seed.x, seed.y, true);
  while (!stack.empty()) {
    const PixelCoord p = stack.back();
    stack.pop_back();
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = p.x + dx;
        const int ny = p.y + dy;
        if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= width || ny >= height) {
          continue;
        }
        if (out.at(nx, ny) || !member(nx, ny)) {
          continue;
        }
        out.set(nx, ny, true);
        stack.push_back({nx, ny});
      }
    }
  }
  return out;
}

inline PseudoMask component_containing(const PseudoMask& mask, PixelCoord seed) {
  return flood_component(mask.width(), mask.height(), seed,
                         [&mask](int x, int y) { return mask.at(x, y); });
}

/// One 8-connected foreground component.
struct Component {
  std::vector<PixelCoord> pixels;
  double cx = 0.0;
  double cy = 0.0;
};

/// All 8-connected components, in raster order of their first pixel.
inline std::vector<Component> connected_components(const PseudoMask& mask) {
  std::vector<Component> comps;
  std::vector<std::uint8_t> seen(mask.size(), 0);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y) || seen[mask.index(x, y)]) {
        continue;
      }
      Component c;
      std::vector<PixelCoord> stack{{x, y}};
      seen[mask.index(x, y)] = 1;
      while (!stack.empty()) {
        const PixelCoord p = stack.back();
        stack.pop_back();
        c.pixels.push_back(p);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = p.x + dx;
            const int ny = p.y + dy;
            if (!mask.in_bounds(nx, ny) || !mask.at(nx, ny) || seen[mask.index(nx, ny)]) {
              continue;
            }
            seen[mask.index(nx, ny)] = 1;
            stack.push_back({nx, ny});
          }
        }
      }
      double sx = 0.0;
      double sy = 0.0;
      for (const auto& p : c.pixels) {
        sx += p.x;
        sy += p.y;
      }
      c.cx = sx / static_cast<double>(c.pixels.size());
      c.cy = sy / static_cast<double>(c.pixels.size());
      comps.push_back(std::move(c));
    }
  }
  return comps;
}

/// Foreground pixels with at least one 8-neighbour that is background or
/// outside the raster.
inline std::vector<PixelCoord> boundary_pixels(const PseudoMask& mask) {
  std::vector<PixelCoord> out;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) {
        continue;
      }
      bool edge = false;
      for (int dy = -1; dy <= 1 && !edge; ++dy) {
        for (int dx = -1; dx <= 1 && !edge; ++dx) {
          const int nx = x + dx;
          const int ny = y + dy;
          edge = !mask.in_bounds(nx, ny) || !mask.at(nx, ny);
        }
      }
      if (edge) {
        out.push_back({x, y});
      }
    }
  }
  return out;
}

} // namespace mclc
