#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "mclc/errors.hpp"

namespace mclc {

using Rgb = std::array<std::uint8_t, 3>;

struct PlotSeries {
  std::string name;
  std::vector<double> ys;
  Rgb color{0, 0, 0};
};

/// RGB raster with minimal drawing primitives.
class Canvas {
public:
  Canvas(int width, int height, Rgb background = {255, 255, 255})
      : width_(width), height_(height), rgb_(static_cast<std::size_t>(width) * height * 3) {
    for (std::size_t i = 0; i < rgb_.size(); i += 3) {
      std::copy(background.begin(), background.end(), rgb_.begin() + static_cast<std::ptrdiff_t>(i));
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const std::vector<std::uint8_t>& rgb() const noexcept { return rgb_; }

  void put(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= width_ || y >= height_) {
      return;
    }
    const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
    std::copy(c.begin(), c.end(), rgb_.begin() + static_cast<std::ptrdiff_t>(i));
  }

  void fill_rect(int x0, int y0, int x1, int y1, Rgb c) {
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        put(x, y, c);
      }
    }
  }

  /// Bresenham line drawn with a square pen of half-width `pen`.
  void line(int x0, int y0, int x1, int y1, Rgb c, int pen = 0) {
    const int dx = std::abs(x1 - x0);
    const int dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1;
    const int sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      fill_rect(x0 - pen, y0 - pen, x0 + pen, y0 + pen, c);
      if (x0 == x1 && y0 == y1) {
        break;
      }
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  /// 3x5 bitmap text, `scale` device pixels per font pixel. Unknown
  /// characters render as blanks.
  void text(int x, int y, const std::string& s, Rgb c, int scale = 2) {
    for (char ch : s) {
      const auto rows = glyph(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
      for (int r = 0; r < 5; ++r) {
        for (int col = 0; col < 3; ++col) {
          if (rows[static_cast<std::size_t>(r)] & (4 >> col)) {
            fill_rect(x + col * scale, y + r * scale, x + (col + 1) * scale - 1, y + (r + 1) * scale - 1, c);
          }
        }
      }
      x += 4 * scale;
    }
  }

  static int text_width(const std::string& s, int scale = 2) { return static_cast<int>(s.size()) * 4 * scale; }

private:
  static std::array<std::uint8_t, 5> glyph(char ch) {
    static constexpr std::array<std::array<std::uint8_t, 5>, 10> digits{{
        {7, 5, 5, 5, 7}, {2, 6, 2, 2, 7}, {7, 1, 7, 4, 7}, {7, 1, 7, 1, 7}, {5, 5, 7, 1, 1},
        {7, 4, 7, 1, 7}, {7, 4, 7, 5, 7}, {7, 1, 1, 1, 1}, {7, 5, 7, 5, 7}, {7, 5, 7, 1, 7},
    }};
    static constexpr std::array<std::array<std::uint8_t, 5>, 26> letters{{
        {2, 5, 7, 5, 5}, {6, 5, 6, 5, 6}, {3, 4, 4, 4, 3}, {6, 5, 5, 5, 6}, {7, 4, 6, 4, 7}, {7, 4, 6, 4, 4},
        {3, 4, 5, 5, 3}, {5, 5, 7, 5, 5}, {7, 2, 2, 2, 7}, {1, 1, 1, 5, 2}, {5, 5, 6, 5, 5}, {4, 4, 4, 4, 7},
        {5, 7, 7, 5, 5}, {6, 5, 5, 5, 5}, {2, 5, 5, 5, 2}, {6, 5, 6, 4, 4}, {2, 5, 5, 6, 3}, {6, 5, 6, 5, 5},
        {3, 4, 2, 1, 6}, {7, 2, 2, 2, 2}, {5, 5, 5, 5, 7}, {5, 5, 5, 5, 2}, {5, 5, 7, 7, 5}, {5, 5, 2, 5, 5},
        {5, 5, 2, 2, 2}, {7, 1, 2, 4, 7},
    }};
    if (ch >= '0' && ch <= '9') return digits[static_cast<std::size_t>(ch - '0')];
    if (ch >= 'a' && ch <= 'z') return letters[static_cast<std::size_t>(ch - 'a')];
    switch (ch) {
    case '.': return {0, 0, 0, 0, 2};
    case '-': return {0, 0, 7, 0, 0};
    case ':': return {0, 2, 0, 2, 0};
    case '_': return {0, 0, 0, 0, 7};
    case '=': return {0, 7, 0, 7, 0};
    default: return {0, 0, 0, 0, 0};
    }
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> rgb_;
};

/// Line plot on [0, 1] with evenly spaced categorical x positions labelled
/// by `x_labels`; one polyline with square markers per series.
inline Canvas render_line_plot(const std::string& title, const std::vector<std::string>& x_labels,
                               const std::vector<PlotSeries>& series, int width = 640, int height = 400) {
  if (x_labels.empty()) {
    throw InvalidSpec("plot needs at least one x value");
  }
  for (const auto& s : series) {
    if (s.ys.size() != x_labels.size()) {
      throw LengthMismatch("series '" + s.name + "' does not match the x values");
    }
  }
  Canvas cv(width, height);
  const Rgb black{0, 0, 0};
  const Rgb grid{220, 220, 220};
  const int left = 60, right = width - 20, top = 40, bottom = height - 50;

  auto px = [&](std::size_t i) {
    if (x_labels.size() == 1) {
      return (left + right) / 2;
    }
    return left + static_cast<int>(std::lround(static_cast<double>(i) * (right - left) /
                                               static_cast<double>(x_labels.size() - 1)));
  };
  auto py = [&](double v) {
    return bottom - static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * (bottom - top)));
  };

  for (int t = 0; t <= 4; ++t) {
    const double v = t / 4.0;
    cv.line(left, py(v), right, py(v), grid);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    cv.text(left - Canvas::text_width(buf) - 6, py(v) - 5, buf, black);
  }
  cv.line(left, top, left, bottom, black);
  cv.line(left, bottom, right, bottom, black);
  for (std::size_t i = 0; i < x_labels.size(); ++i) {
    cv.line(px(i), bottom, px(i), bottom + 4, black);
    cv.text(px(i) - Canvas::text_width(x_labels[i]) / 2, bottom + 10, x_labels[i], black);
  }
  cv.text((width - Canvas::text_width(title)) / 2, 12, title, black);

  int legend_x = left + 10;
  for (const auto& s : series) {
    for (std::size_t i = 0; i + 1 < s.ys.size(); ++i) {
      cv.line(px(i), py(s.ys[i]), px(i + 1), py(s.ys[i + 1]), s.color, 1);
    }
    for (std::size_t i = 0; i < s.ys.size(); ++i) {
      cv.fill_rect(px(i) - 3, py(s.ys[i]) - 3, px(i) + 3, py(s.ys[i]) + 3, s.color);
    }
    cv.fill_rect(legend_x, height - 22, legend_x + 12, height - 12, s.color);
    cv.text(legend_x + 18, height - 22, s.name, black);
    legend_x += 30 + Canvas::text_width(s.name);
  }
  return cv;
}

} // namespace mclc
