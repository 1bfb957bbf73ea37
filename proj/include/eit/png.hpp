// SPDX-License-Identifier: Apache-2.0
#pragma once

// 8-bit RGB export of conductivity images with a fixed colormap, so figures
// from different runs are directly comparable.

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "eit/common.hpp"

namespace eit::png {

inline constexpr double color_min = 0.3;
inline constexpr double color_max = 2.5;

// Stops at equal spacing over [color_min, color_max]; blue-white-red with
// white at the midpoint 1.4.
inline constexpr std::array<std::array<unsigned char, 3>, 9> colormap{{
    {{8, 29, 88}},
    {{37, 52, 148}},
    {{34, 94, 168}},
    {{65, 182, 196}},
    {{247, 247, 247}},
    {{253, 219, 199}},
    {{244, 165, 130}},
    {{214, 96, 77}},
    {{103, 0, 31}},
}};

inline std::array<unsigned char, 3> color_of(double v) {
  const double t = std::clamp((v - color_min) / (color_max - color_min), 0.0, 1.0) * (colormap.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(t), colormap.size() - 2);
  const double f = t - static_cast<double>(i);
  std::array<unsigned char, 3> out{};
  for (int c = 0; c < 3; ++c)
    out[c] = static_cast<unsigned char>(std::lround((1.0 - f) * colormap[i][c] + f * colormap[i + 1][c]));
  return out;
}

// Row 0 of the grid is the bottom of the picture (negative imaginary part).
inline void write_png(const std::filesystem::path& path, const Grid<double>& img) {
  // allocated before setjmp so a longjmp never skips a destructor
  std::vector<unsigned char> row(3 * img.width());
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw Error("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw Error("png encoding failed for " + path.string());
  }
  png_init_io(png, fp);
  const auto w = static_cast<png_uint_32>(img.width()), h = static_cast<png_uint_32>(img.height());
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = img.height(); r-- > 0;) {
    for (std::size_t c = 0; c < img.width(); ++c) {
      const auto rgb = color_of(img(r, c));
      std::copy(rgb.begin(), rgb.end(), row.begin() + 3 * c);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace eit::png
