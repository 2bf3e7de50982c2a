#pragma once

#include <png.h>

#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "mclc/image.hpp"

namespace mclc {

namespace detail {

struct PngErrorSink {
  std::jmp_buf jump;
  char message[256] = {};
};

inline void png_error_to_sink(png_structp png, png_const_charp msg) {
  auto* sink = static_cast<PngErrorSink*>(png_get_error_ptr(png));
  std::snprintf(sink->message, sizeof(sink->message), "%s", msg ? msg : "libpng error");
  std::longjmp(sink->jump, 1);
}

inline void png_warning_ignore(png_structp, png_const_charp) {}

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) {
      std::fclose(f);
    }
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

/// Raw decoded PNG: samples per pixel after palette/low-bit expansion and
/// alpha stripping, in native bit depth (8 or 16).
struct DecodedPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint16_t> samples;
};

// Everything with a destructor lives in the caller; this frame only holds
// trivially destructible state across setjmp.
inline bool decode_png(std::FILE* fp, DecodedPng& out, std::vector<png_byte>& buffer,
                       std::vector<png_bytep>& rows, PngErrorSink& sink) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &sink, png_error_to_sink,
                                           png_warning_ignore);
  if (!png) {
    std::snprintf(sink.message, sizeof(sink.message), "out of memory");
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    std::snprintf(sink.message, sizeof(sink.message), "out of memory");
    return false;
  }
  if (setjmp(sink.jump)) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
  }
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (color & PNG_COLOR_MASK_ALPHA) {
    png_set_strip_alpha(png);
  }
  png_set_swap(png); // 16-bit samples land in host (little-endian) order
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);

  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * static_cast<std::size_t>(out.height));
  rows.resize(static_cast<std::size_t>(out.height));
  for (int y = 0; y < out.height; ++y) {
    rows[static_cast<std::size_t>(y)] = buffer.data() + rowbytes * static_cast<std::size_t>(y);
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t n = static_cast<std::size_t>(out.width) * static_cast<std::size_t>(out.height) *
                        static_cast<std::size_t>(out.channels);
  out.samples.resize(n);
  if (out.bit_depth == 16) {
    for (std::size_t i = 0; i < n; ++i) {
      out.samples[i] = static_cast<std::uint16_t>(buffer[2 * i] | (buffer[2 * i + 1] << 8));
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      out.samples[i] = buffer[i];
    }
  }
  return true;
}

inline void write_png(const std::filesystem::path& path, int width, int height, std::uint32_t format,
                      const void* pixels) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, pixels, 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot write PNG '" + path.string() + "': " + msg);
  }
}

} // namespace detail

/// Loads an 8/16-bit grayscale or RGB(A)/palette PNG as intensities in
/// [0, 255]. 16-bit data is rescaled linearly (65535 -> 255); colour input is
/// reduced with luma weights 0.299 R + 0.587 G + 0.114 B.
inline InfraredImage load_image(const std::filesystem::path& path) {
  detail::FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) {
    throw IoError("cannot open image '" + path.string() + "'");
  }
  std::array<png_byte, 8> sig{};
  if (std::fread(sig.data(), 1, sig.size(), fp.get()) != sig.size()) {
    throw IoError("truncated image '" + path.string() + "'");
  }
  if (png_sig_cmp(sig.data(), 0, sig.size()) != 0) {
    throw FormatError("'" + path.string() + "' is not a PNG file");
  }
  std::rewind(fp.get());

  detail::DecodedPng png;
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  detail::PngErrorSink sink;
  if (!detail::decode_png(fp.get(), png, buffer, rows, sink)) {
    throw IoError("cannot decode '" + path.string() + "': " + sink.message);
  }
  if (png.channels != 1 && png.channels != 3) {
    throw FormatError("unsupported PNG channel layout in '" + path.string() + "'");
  }

  const double scale = png.bit_depth == 16 ? kMaxIntensity / 65535.0 : 1.0;
  const std::size_t pixels = static_cast<std::size_t>(png.width) * static_cast<std::size_t>(png.height);
  std::vector<double> data(pixels);
  for (std::size_t i = 0; i < pixels; ++i) {
    double v = 0.0;
    if (png.channels == 1) {
      v = png.samples[i];
    } else {
      v = 0.299 * png.samples[3 * i] + 0.587 * png.samples[3 * i + 1] + 0.114 * png.samples[3 * i + 2];
    }
    data[i] = std::clamp(v * scale, 0.0, kMaxIntensity);
  }
  return InfraredImage(png.width, png.height, std::move(data));
}

/// Loads a PNG as a binary mask: any non-zero pixel is foreground.
inline PseudoMask load_mask(const std::filesystem::path& path) {
  const InfraredImage img = load_image(path);
  PseudoMask mask(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) {
    mask.set(i, img[i] > 0.0);
  }
  return mask;
}

/// Writes an intensity image rounded to 8-bit gray.
inline void save_image_png(const InfraredImage& img, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    bytes[i] = static_cast<std::uint8_t>(std::lround(img[i]));
  }
  detail::write_png(path, img.width(), img.height(), PNG_FORMAT_GRAY, bytes.data());
}

/// Mask as 8-bit gray with values {0, 255}.
inline void save_mask_png(const PseudoMask& mask, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    bytes[i] = mask[i] ? 255 : 0;
  }
  detail::write_png(path, mask.width(), mask.height(), PNG_FORMAT_GRAY, bytes.data());
}

/// Heatmap colormap used by `--color` exports: piecewise-linear through
/// black (0.00), indigo (0.25), crimson (0.50), orange (0.75), pale yellow
/// (1.00).
inline std::array<std::uint8_t, 3> heat_color(double p) {
  static constexpr std::array<std::array<double, 3>, 5> stops{{
      {0.0, 0.0, 0.0},
      {72.0, 12.0, 120.0},
      {200.0, 30.0, 60.0},
      {250.0, 140.0, 20.0},
      {252.0, 252.0, 190.0},
  }};
  p = std::clamp(p, 0.0, 1.0);
  const double pos = p * 4.0;
  const int lo = std::min(static_cast<int>(pos), 3);
  const double t = pos - lo;
  std::array<std::uint8_t, 3> rgb{};
  for (int c = 0; c < 3; ++c) {
    const double v = stops[static_cast<std::size_t>(lo)][static_cast<std::size_t>(c)] * (1.0 - t) +
                     stops[static_cast<std::size_t>(lo + 1)][static_cast<std::size_t>(c)] * t;
    rgb[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(std::lround(v));
  }
  return rgb;
}

/// Probability map as 8-bit gray with round(255 p), or through heat_color()
/// as RGB when `color` is set.
inline void save_tpm_png(const TargetProbabilityMap& tpm, const std::filesystem::path& path,
                         bool color = false) {
  if (!color) {
    std::vector<std::uint8_t> bytes(tpm.size());
    for (std::size_t i = 0; i < tpm.size(); ++i) {
      bytes[i] = static_cast<std::uint8_t>(std::lround(255.0 * tpm.prob(i)));
    }
    detail::write_png(path, tpm.width(), tpm.height(), PNG_FORMAT_GRAY, bytes.data());
    return;
  }
  std::vector<std::uint8_t> bytes(3 * tpm.size());
  for (std::size_t i = 0; i < tpm.size(); ++i) {
    const auto rgb = heat_color(tpm.prob(i));
    std::copy(rgb.begin(), rgb.end(), bytes.begin() + static_cast<std::ptrdiff_t>(3 * i));
  }
  detail::write_png(path, tpm.width(), tpm.height(), PNG_FORMAT_RGB, bytes.data());
}

inline void save_rgb_png(int width, int height, const std::vector<std::uint8_t>& rgb,
                         const std::filesystem::path& path) {
  if (rgb.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3) {
    throw InvalidSpec("RGB buffer size does not match dimensions");
  }
  detail::write_png(path, width, height, PNG_FORMAT_RGB, rgb.data());
}

} // namespace mclc
